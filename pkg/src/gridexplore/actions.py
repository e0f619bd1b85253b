"""Goal-point actions and the rasterised action lattice."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Action:
    """A goal cell ``(x, y)``, or the terminal action when ``goal`` is None."""
    goal: tuple[int, int] | None = None

    @property
    def is_terminal(self) -> bool:
        return self.goal is None

    @classmethod
    def terminal(cls) -> "Action":
        return cls(None)


TERMINAL = Action.terminal()


class ActionSpace:
    """Goal points sampled every ``stride`` cells plus a trailing terminal action.

    Index ``i * cols + j`` is the lattice point in row ``i``, column ``j``,
    centred at cell ``(x, y) = (j*stride + stride//2, i*stride + stride//2)``.
    """

    def __init__(self, height: int, width: int, stride: int):
        if stride <= 0 or height % stride or width % stride:
            raise ValueError(f"{height}x{width} is not divisible by stride {stride}")
        self.height = height
        self.width = width
        self.stride = stride
        self.rows = height // stride
        self.cols = width // stride

    @property
    def n_goals(self) -> int:
        return self.rows * self.cols

    @property
    def terminal_index(self) -> int:
        return self.n_goals

    def __len__(self) -> int:
        return self.n_goals + 1

    def cell(self, index: int) -> tuple[int, int] | None:
        if not 0 <= index <= self.n_goals:
            raise IndexError(index)
        if index == self.n_goals:
            return None
        i, j = divmod(index, self.cols)
        half = self.stride // 2
        return (j * self.stride + half, i * self.stride + half)

    def index(self, cell: tuple[int, int] | None) -> int:
        if cell is None:
            return self.terminal_index
        x, y = cell
        half = self.stride // 2
        j, rx = divmod(x - half, self.stride)
        i, ry = divmod(y - half, self.stride)
        if rx or ry or not (0 <= i < self.rows and 0 <= j < self.cols):
            raise ValueError(f"{cell} is not a lattice point")
        return i * self.cols + j

    def action(self, index: int) -> Action:
        return Action(self.cell(index))


def build_action_space(height: int, width: int, stride: int) -> ActionSpace:
    return ActionSpace(height, width, stride)
