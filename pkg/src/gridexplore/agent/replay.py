from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    done: bool
    seg_labels: np.ndarray | None = None


@dataclass
class Batch:
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    next_states: np.ndarray
    dones: np.ndarray
    seg_labels: np.ndarray | None = None

    def __len__(self):
        return len(self.actions)


class ReplayBuffer:
    """FIFO ring buffer of transitions.

    State channels only take the values 0, 0.5 and 1, so they are stored as
    ``uint8`` (value * 2) to keep large buffers affordable.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: list = []
        self._next = 0

    def __len__(self):
        return len(self._items)

    def push(self, t: Transition) -> None:
        packed = (
            _pack(t.state), int(t.action), float(t.reward), _pack(t.next_state), bool(t.done),
            None if t.seg_labels is None else np.asarray(t.seg_labels, dtype=np.uint8),
        )
        if len(self._items) < self.capacity:
            self._items.append(packed)
        else:
            self._items[self._next] = packed
        self._next = (self._next + 1) % self.capacity

    def oldest(self) -> Transition:
        i = self._next if len(self._items) == self.capacity else 0
        return self._unpack(self._items[i])

    def sample(self, batch_size: int, rng: np.random.Generator) -> Batch:
        """Uniform sample without replacement."""
        idx = rng.choice(len(self._items), size=batch_size, replace=False)
        items = [self._items[i] for i in idx]
        seg = None
        if all(it[5] is not None for it in items):
            seg = np.stack([it[5] for it in items]).astype(np.int64)
        return Batch(
            states=np.stack([it[0] for it in items]).astype(np.float32) / 2,
            actions=np.array([it[1] for it in items], dtype=np.int64),
            rewards=np.array([it[2] for it in items], dtype=np.float64),
            next_states=np.stack([it[3] for it in items]).astype(np.float32) / 2,
            dones=np.array([it[4] for it in items], dtype=bool),
            seg_labels=seg,
        )

    @staticmethod
    def _unpack(it) -> Transition:
        return Transition(it[0].astype(np.float32) / 2, it[1], it[2], it[3].astype(np.float32) / 2, it[4],
                          None if it[5] is None else it[5].astype(np.int64))


def _pack(state: np.ndarray) -> np.ndarray:
    packed = np.rint(np.asarray(state) * 2)
    if packed.min() < 0 or packed.max() > 2 or not np.allclose(packed, np.asarray(state) * 2):
        raise ValueError("state values must be 0, 0.5 or 1")
    return packed.astype(np.uint8)
