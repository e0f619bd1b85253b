"""Versioned binary checkpoints.

Layout::

    FCQN1\\n
    <variant> [input=HxW] <net config tokens>\\n
    per tensor:  <name>\\n  <dim dim ...>\\n  <float32 little-endian payload>
    8-byte little-endian checksum (blake2b-64) of everything before it
"""

import hashlib

import numpy as np

from .network import VARIANTS, NetConfig, NetworkParams, ShapeMismatch, _shapes

MAGIC_PREFIX = b"FCQN"
VERSION = 1
MAGIC = MAGIC_PREFIX + str(VERSION).encode() + b"\n"


class CheckpointError(ValueError):
    pass


class BadMagic(CheckpointError):
    pass


class VersionMismatch(CheckpointError):
    pass


class Corrupt(CheckpointError):
    pass


class VariantMismatch(CheckpointError):
    pass


def _checksum(payload: bytes) -> bytes:
    return hashlib.blake2b(payload, digest_size=8).digest()


def save_checkpoint(params: NetworkParams) -> bytes:
    head = [params.variant]
    if params.input_hw is not None:
        head.append(f"input={params.input_hw[0]}x{params.input_hw[1]}")
    head.append(params.config.to_tokens())
    parts = [MAGIC, (" ".join(head) + "\n").encode()]
    for name, t in params.tensors.items():
        parts.append(f"{name}\n".encode())
        parts.append((" ".join(map(str, t.shape)) + "\n").encode())
        parts.append(np.ascontiguousarray(t, dtype="<f4").tobytes())
    payload = b"".join(parts)
    return payload + _checksum(payload)


def _readline(data: bytes, pos: int):
    end = data.find(b"\n", pos)
    if end < 0:
        raise Corrupt("truncated checkpoint (missing line)")
    return data[pos:end].decode("ascii", errors="strict"), end + 1


def load_checkpoint(data: bytes, expected_variant: str | None = None) -> NetworkParams:
    if not data.startswith(MAGIC_PREFIX):
        raise BadMagic("not a checkpoint file")
    if not data.startswith(MAGIC):
        raise VersionMismatch(f"unsupported checkpoint version {data[:8]!r}")
    if len(data) < len(MAGIC) + 8:
        raise Corrupt("truncated checkpoint")
    payload, digest = data[:-8], data[-8:]
    if _checksum(payload) != digest:
        raise Corrupt("checksum mismatch (truncated or damaged file)")
    try:
        header, pos = _readline(payload, len(MAGIC))
        tokens = header.split()
        variant = tokens[0]
        if variant not in VARIANTS:
            raise Corrupt(f"unknown variant tag {variant!r}")
        input_hw = None
        rest = []
        for tok in tokens[1:]:
            if tok.startswith("input="):
                h, w = tok[len("input="):].split("x")
                input_hw = (int(h), int(w))
            else:
                rest.append(tok)
        config = NetConfig.from_tokens(rest)
        tensors = {}
        while pos < len(payload):
            name, pos = _readline(payload, pos)
            shape_line, pos = _readline(payload, pos)
            shape = tuple(int(s) for s in shape_line.split())
            nbytes = 4 * int(np.prod(shape, dtype=np.int64))
            if pos + nbytes > len(payload):
                raise Corrupt(f"truncated tensor {name}")
            tensors[name] = np.frombuffer(payload[pos:pos + nbytes], dtype="<f4").astype(np.float32).reshape(shape)
            pos += nbytes
    except (UnicodeDecodeError, ValueError, IndexError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise Corrupt(str(exc)) from exc
    if expected_variant is not None and variant != expected_variant:
        raise VariantMismatch(f"checkpoint holds {variant}, expected {expected_variant}")
    expected = _shapes(variant, config, input_hw)
    got = {k: v.shape for k, v in tensors.items()}
    if got != expected:
        raise ShapeMismatch(f"tensor shapes {got} do not match a {variant} network {expected}")
    return NetworkParams(variant, tensors, config, input_hw)


def write_checkpoint(params: NetworkParams, path) -> None:
    with open(path, "wb") as f:
        f.write(save_checkpoint(params))


def read_checkpoint(path, expected_variant: str | None = None) -> NetworkParams:
    with open(path, "rb") as f:
        return load_checkpoint(f.read(), expected_variant)

