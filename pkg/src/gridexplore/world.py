"""Ground-truth worlds: ASCII map files and a room-and-door generator.

Cells are indexed ``[row, col]`` (``[y, x]``) with row 0 at the top.
``WorldMap.occupied`` is a boolean array, True for walls.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from .rng import rng_for

MIN_WORLD_SIDE = 3
MIN_GENERATED_SIDE = 8
DEFAULT_RESOLUTION = 0.05
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class WorldError(ValueError):
    pass


class MalformedHeader(WorldError):
    pass


class UnknownCell(WorldError):
    pass


class OpenBorder(WorldError):
    pass


class DisconnectedFreeSpace(WorldError):
    pass


class InfeasibleConfig(WorldError):
    pass


@dataclass(frozen=True, eq=False)
class WorldMap:
    occupied: np.ndarray
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self):
        occ = np.array(self.occupied, dtype=bool)
        occ.setflags(write=False)
        object.__setattr__(self, "occupied", occ)
        validate_world(self)

    @property
    def height(self) -> int:
        return self.occupied.shape[0]

    @property
    def width(self) -> int:
        return self.occupied.shape[1]

    @property
    def free(self) -> np.ndarray:
        return ~self.occupied

    def is_free(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height and not self.occupied[y, x]

    def free_cells(self) -> np.ndarray:
        """(N, 2) array of free ``(x, y)`` cells in row-major order."""
        ys, xs = np.nonzero(~self.occupied)
        return np.stack([xs, ys], axis=1)

    def __eq__(self, other):
        if not isinstance(other, WorldMap):
            return NotImplemented
        return (self.resolution == other.resolution
                and np.array_equal(self.occupied, other.occupied))


def validate_world(world: WorldMap) -> None:
    occ = world.occupied
    if occ.ndim != 2:
        raise WorldError("world grid must be 2-D")
    h, w = occ.shape
    if h < MIN_WORLD_SIDE or w < MIN_WORLD_SIDE:
        raise WorldError(f"world must be at least {MIN_WORLD_SIDE}x{MIN_WORLD_SIDE}, got {w}x{h}")
    if not world.resolution > 0:
        raise WorldError("resolution must be positive")
    if not (occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()):
        raise OpenBorder("all border cells must be occupied")
    _, n = ndimage.label(~occ, structure=EIGHT_CONNECTED)
    if n == 0:
        raise DisconnectedFreeSpace("world has no free cells")
    if n > 1:
        raise DisconnectedFreeSpace(f"free space has {n} 8-connected components")


def free_cell_count(world: WorldMap) -> int:
    return int(np.count_nonzero(~world.occupied))


# ---------------------------------------------------------------------------
# map files

def load_world(text: str) -> WorldMap:
    lines = text.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines:
        raise MalformedHeader("empty map file")
    parts = lines[0].split()
    if len(parts) != 3:
        raise MalformedHeader(f"expected 'width height resolution', got {lines[0]!r}")
    try:
        width, height, resolution = int(parts[0]), int(parts[1]), float(parts[2])
    except ValueError as exc:
        raise MalformedHeader(f"bad header {lines[0]!r}") from exc
    if width <= 0 or height <= 0:
        raise MalformedHeader("width and height must be positive")
    rows = lines[1:]
    if len(rows) != height:
        raise MalformedHeader(f"header says {height} rows, file has {len(rows)}")
    occ = np.zeros((height, width), dtype=bool)
    for y, row in enumerate(rows):
        if len(row) != width:
            raise MalformedHeader(f"row {y} has {len(row)} cells, expected {width}")
        for x, ch in enumerate(row):
            if ch == "#":
                occ[y, x] = True
            elif ch != ".":
                raise UnknownCell(f"unknown cell character {ch!r} at row {y}, col {x}")
    return WorldMap(occ, resolution)


def dump_world(world: WorldMap) -> str:
    rows = ["".join("#" if c else "." for c in row) for row in world.occupied]
    return f"{world.width} {world.height} {world.resolution!r}\n" + "\n".join(rows) + "\n"


def read_world(path) -> WorldMap:
    with open(path, encoding="ascii", newline="") as f:
        return load_world(f.read())


def write_world(world: WorldMap, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as f:
        f.write(dump_world(world))


# ---------------------------------------------------------------------------
# generation

@dataclass(frozen=True)
class MapGenConfig:
    width: int = 64
    height: int = 64
    resolution: float = DEFAULT_RESOLUTION
    room_count_range: tuple[int, int] = (3, 6)
    door_width: int = 4
    seed: int = 0
    robot_radius: int = 2
    max_retries: int = 50
    min_room: int = field(default=0)

    def validate(self) -> None:
        if self.width < MIN_GENERATED_SIDE or self.height < MIN_GENERATED_SIDE:
            raise ValueError(f"width and height must be >= {MIN_GENERATED_SIDE}")
        if not self.resolution > 0:
            raise ValueError("resolution must be positive")
        lo, hi = self.room_count_range
        if lo < 1 or hi < lo:
            raise ValueError(f"empty room_count_range {self.room_count_range}")
        if self.door_width < 2 * self.robot_radius:
            raise ValueError("door_width must be at least the robot diameter in cells")

    @property
    def room_side(self) -> int:
        return self.min_room or self.door_width + 2


def default_room_range(width: int, height: int) -> tuple[int, int]:
    area = width * height
    if area <= 32 * 32:
        return (2, 3)
    if area <= 64 * 64:
        return (3, 6)
    return (4, 8)


def generate_world(cfg: MapGenConfig) -> WorldMap:
    """Recursive wall placement with door gaps; a pure function of ``cfg``."""
    return generate_layout(cfg)[0]


def generate_layout(cfg: MapGenConfig):
    """Like :func:`generate_world` but also returns the room rectangles
    ``(x0, y0, x1, y1)`` (inclusive interior bounds)."""
    cfg.validate()
    rng = rng_for(cfg.seed, "map-gen")
    for _ in range(cfg.max_retries):
        result = _try_generate(cfg, rng)
        if result is not None:
            occ, rooms = result
            return WorldMap(occ, cfg.resolution), rooms
    raise InfeasibleConfig(
        f"could not place {cfg.room_count_range} rooms in a {cfg.width}x{cfg.height} map "
        f"after {cfg.max_retries} attempts")


def _try_generate(cfg: MapGenConfig, rng: np.random.Generator):
    w, h = cfg.width, cfg.height
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    doors = np.zeros_like(occ)
    side = cfg.room_side
    target = int(rng.integers(cfg.room_count_range[0], cfg.room_count_range[1] + 1))
    # rooms as inclusive interior rectangles (x0, y0, x1, y1)
    rooms = [(1, 1, w - 2, h - 2)]
    while len(rooms) < target:
        order = sorted(range(len(rooms)),
                       key=lambda i: -(rooms[i][2] - rooms[i][0] + 1) * (rooms[i][3] - rooms[i][1] + 1))
        for i in order:
            split = _split_room(rooms[i], occ, doors, side, cfg.door_width, rng)
            if split is not None:
                rooms[i:i + 1] = split
                break
        else:
            return None
    if not (cfg.room_count_range[0] <= len(rooms) <= cfg.room_count_range[1]):
        return None
    return occ, rooms


def _split_room(room, occ, doors, side, door_width, rng):
    x0, y0, x1, y1 = room
    rw, rh = x1 - x0 + 1, y1 - y0 + 1
    options = []
    if rw >= 2 * side + 1:
        options.append("v")
    if rh >= 2 * side + 1:
        options.append("h")
    if not options:
        return None
    rng.shuffle(options)
    for orient in options:
        if orient == "v":
            cands = [c for c in range(x0 + side, x1 - side + 1)
                     if not _near_door(doors, c, (y0 - 1, y1 + 1), axis="v")]
        else:
            cands = [r for r in range(y0 + side, y1 - side + 1)
                     if not _near_door(doors, r, (x0 - 1, x1 + 1), axis="h")]
        if not cands:
            continue
        pos = int(cands[rng.integers(len(cands))])
        if orient == "v":
            span = rh
            d = y0 + int(rng.integers(span - door_width + 1))
            occ[y0:y1 + 1, pos] = True
            occ[d:d + door_width, pos] = False
            doors[d:d + door_width, pos] = True
            return [(x0, y0, pos - 1, y1), (pos + 1, y0, x1, y1)]
        span = rw
        d = x0 + int(rng.integers(span - door_width + 1))
        occ[pos, x0:x1 + 1] = True
        occ[pos, d:d + door_width] = False
        doors[pos, d:d + door_width] = True
        return [(x0, y0, x1, pos - 1), (x0, pos + 1, x1, y1)]
    return None


def _near_door(doors, pos, ends, axis, margin=2):
    """True if a wall at ``pos`` would end within ``margin`` cells of a door gap."""
    h, w = doors.shape
    for e in ends:
        if axis == "v":
            if 0 <= e < h and doors[e, max(pos - margin, 0):pos + margin + 1].any():
                return True
        else:
            if 0 <= e < w and doors[max(pos - margin, 0):pos + margin + 1, e].any():
                return True
    return False
