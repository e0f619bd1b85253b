"""Named random substreams derived from a single 64-bit seed."""

import zlib

import numpy as np

STREAMS = ("map-gen", "start-pose", "epsilon-greedy", "init", "replay")


def rng_for(seed: int, stream: str, *keys: int) -> np.random.Generator:
    """Independent generator for ``stream`` (optionally sub-keyed, e.g. by episode)."""
    if stream not in STREAMS:
        raise ValueError(f"unknown random stream {stream!r}")
    seq = np.random.SeedSequence(
        entropy=int(seed) & 0xFFFFFFFFFFFFFFFF,
        spawn_key=(zlib.crc32(stream.encode()), *[int(k) for k in keys]),
    )
    return np.random.default_rng(seq)
