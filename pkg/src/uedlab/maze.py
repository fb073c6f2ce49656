"""Parameterized grid mazes with an egocentric, partially observed student.

A level is built from a sequence of design actions: place the agent's start,
place the goal, then drop up to ``max_blocks`` wall blocks. Blocks landing on
the start, the goal or an existing wall are skipped, so any generator can
emit a full-length sequence without a legality check.

Coordinates are ``(x, y)`` with ``x`` the column and ``y`` the row; a flat
cell index is ``y * width + x``. Facing directions follow the usual grid
convention 0=east, 1=south, 2=west, 3=north.
"""

from __future__ import annotations

import enum
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import (
    ConfigurationError,
    InvalidDesignError,
    LevelParams,
    ParseError,
    PreconditionError,
    UsageError,
)

DIRECTIONS = ((1, 0), (0, 1), (-1, 0), (0, -1))

FORWARD, TURN_LEFT, TURN_RIGHT = 0, 1, 2
NUM_STUDENT_ACTIONS = 3

# observation channels
EMPTY, WALL, GOAL, OUT_OF_BOUNDS = 0, 1, 2, 3
NUM_CHANNELS = 4

DEFAULT_WIDTH = DEFAULT_HEIGHT = 13
DEFAULT_MAX_BLOCKS = 25
DEFAULT_HORIZON = 100
DEFAULT_VIEW = 5


class DesignKind(enum.Enum):
    PLACE_START = "place_start"
    PLACE_GOAL = "place_goal"
    PLACE_BLOCK = "place_block"


class DesignAction(NamedTuple):
    kind: DesignKind
    cell: int


@dataclass(frozen=True)
class MazeLevel:
    width: int
    height: int
    start: tuple[int, int]
    goal: tuple[int, int]
    walls: frozenset = frozenset()
    start_dir: int = 0
    # None for hand-authored levels, which may hold more walls than a generator could place
    max_blocks: int | None = field(default=DEFAULT_MAX_BLOCKS, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "start", tuple(int(v) for v in self.start))
        object.__setattr__(self, "goal", tuple(int(v) for v in self.goal))
        object.__setattr__(self, "walls", frozenset(tuple(int(v) for v in w) for w in self.walls))
        if self.width < 1 or self.height < 1:
            raise PreconditionError("maze dimensions must be positive")
        for cell in (self.start, self.goal, *self.walls):
            if not self.inside(cell):
                raise PreconditionError(f"cell {cell} lies outside a {self.width}x{self.height} grid")
        if self.start == self.goal:
            raise PreconditionError("start and goal must differ")
        if self.start in self.walls or self.goal in self.walls:
            raise PreconditionError("start and goal must not be walls")
        if self.max_blocks is not None and len(self.walls) > self.max_blocks:
            raise PreconditionError(f"{len(self.walls)} walls exceed max_blocks={self.max_blocks}")
        if self.start_dir not in range(4):
            raise PreconditionError("start_dir must be one of 0..3")

    def inside(self, cell) -> bool:
        x, y = cell
        return 0 <= x < self.width and 0 <= y < self.height

    def codes(self) -> np.ndarray:
        """Grid of channel codes, shape ``(height, width)``."""
        grid = np.full((self.height, self.width), EMPTY, dtype=np.int8)
        for x, y in self.walls:
            grid[y, x] = WALL
        grid[self.goal[1], self.goal[0]] = GOAL
        return grid


def cell_to_xy(cell: int, width: int) -> tuple[int, int]:
    return int(cell) % width, int(cell) // width


def xy_to_cell(xy, width: int) -> int:
    return int(xy[1]) * width + int(xy[0])


def facing_from_seed(seed: int) -> int:
    return int(np.random.default_rng(seed).integers(4))


def build_level(actions: Sequence[DesignAction], seed: int = 0, width: int = DEFAULT_WIDTH,
                height: int = DEFAULT_HEIGHT, max_blocks: int = DEFAULT_MAX_BLOCKS) -> MazeLevel:
    """Turn a design-action sequence into a level.

    The first two actions must place the start and the goal. Colliding block
    placements are no-ops, and blocks past ``max_blocks`` successful
    placements are ignored. The start facing direction is drawn from ``seed``.
    """
    actions = [DesignAction(DesignKind(a.kind), int(a.cell)) for a in actions]
    n_cells = width * height
    for a in actions:
        if not 0 <= a.cell < n_cells:
            raise InvalidDesignError(f"cell index {a.cell} outside [0, {n_cells})")
    if len(actions) < 2 or actions[0].kind is not DesignKind.PLACE_START \
            or actions[1].kind is not DesignKind.PLACE_GOAL:
        raise InvalidDesignError("a design must begin with place_start then place_goal")
    if any(a.kind is not DesignKind.PLACE_BLOCK for a in actions[2:]):
        raise InvalidDesignError("only place_block may follow the start and goal")
    start = cell_to_xy(actions[0].cell, width)
    goal = cell_to_xy(actions[1].cell, width)
    if start == goal:
        raise InvalidDesignError("goal placed on the start cell")
    walls: set[tuple[int, int]] = set()
    for a in actions[2:]:
        if len(walls) >= max_blocks:
            break
        xy = cell_to_xy(a.cell, width)
        if xy == start or xy == goal or xy in walls:
            continue
        walls.add(xy)
    return MazeLevel(width, height, start, goal, frozenset(walls),
                     start_dir=facing_from_seed(seed), max_blocks=max_blocks)


# ---------------------------------------------------------------------------
# level families and LevelParams encoding

_FAMILY_RE = re.compile(r"^maze-(\d+)x(\d+)-b(\d+)$")


@dataclass(frozen=True)
class MazeFamily:
    width: int = DEFAULT_WIDTH
    height: int = DEFAULT_HEIGHT
    max_blocks: int = DEFAULT_MAX_BLOCKS

    @property
    def family_id(self) -> str:
        return f"maze-{self.width}x{self.height}-b{self.max_blocks}"

    @property
    def num_cells(self) -> int:
        return self.width * self.height

    @property
    def max_design_steps(self) -> int:
        return 2 + self.max_blocks

    def validate(self, params: LevelParams):
        if params.family_id != self.family_id:
            raise ConfigurationError(f"level family {params.family_id!r} != {self.family_id!r}")
        if not 2 <= len(params.encoding) <= self.max_design_steps:
            raise InvalidDesignError(
                f"encoding length {len(params.encoding)} outside [2, {self.max_design_steps}]")
        if any(not 0 <= v < self.num_cells for v in params.encoding):
            raise InvalidDesignError("encoding holds a cell index outside the grid")

    def encode(self, cells: Sequence[int], seed: int) -> LevelParams:
        params = LevelParams(self.family_id, tuple(cells), seed)
        self.validate(params)
        return params

    def decode(self, params: LevelParams) -> MazeLevel:
        self.validate(params)
        enc = params.encoding
        actions = [DesignAction(DesignKind.PLACE_START, enc[0]),
                   DesignAction(DesignKind.PLACE_GOAL, enc[1])]
        actions += [DesignAction(DesignKind.PLACE_BLOCK, c) for c in enc[2:]]
        return build_level(actions, params.seed, self.width, self.height, self.max_blocks)

    def random_level(self, rng: np.random.Generator) -> LevelParams:
        """Uniform construction: start, goal != start, ``U{0..max_blocks}`` block drops."""
        start = int(rng.integers(self.num_cells))
        goal = int(rng.integers(self.num_cells - 1))
        goal += goal >= start
        n_blocks = int(rng.integers(self.max_blocks + 1))
        blocks = rng.integers(self.num_cells, size=n_blocks).tolist()
        seed = int(rng.integers(0, 2**63))
        return self.encode([start, goal, *blocks], seed)


def parse_family_id(family_id: str) -> MazeFamily | None:
    m = _FAMILY_RE.match(family_id)
    if m is None:
        return None
    w, h, b = (int(g) for g in m.groups())
    if w * h < 2:
        return None
    return MazeFamily(w, h, b)


def get_family(family_id: str) -> MazeFamily:
    family = parse_family_id(family_id)
    if family is None:
        raise ConfigurationError(f"unknown family_id {family_id!r}")
    return family


def as_maze_level(level) -> MazeLevel:
    if isinstance(level, MazeLevel):
        return level
    if isinstance(level, LevelParams):
        return get_family(level.family_id).decode(level)
    raise PreconditionError(f"cannot interpret {type(level).__name__} as a maze level")


# ---------------------------------------------------------------------------
# solvability

def is_solvable(level: MazeLevel) -> bool:
    """Breadth-first search for a 4-connected wall-free path from start to goal."""
    seen = {level.start}
    queue = deque([level.start])
    while queue:
        x, y = queue.popleft()
        if (x, y) == level.goal:
            return True
        for dx, dy in DIRECTIONS:
            nxt = (x + dx, y + dy)
            if nxt not in seen and level.inside(nxt) and nxt not in level.walls:
                seen.add(nxt)
                queue.append(nxt)
    return False


# ---------------------------------------------------------------------------
# observations and dynamics

def observation_dim(view_size: int = DEFAULT_VIEW) -> int:
    return NUM_CHANNELS * view_size * view_size + 4


def observation_table(level: MazeLevel, view_size: int = DEFAULT_VIEW) -> np.ndarray:
    """Every observation the level can emit, indexed ``[y, x, direction]``.

    The view is a ``view_size x view_size`` window with the agent at the
    bottom-centre looking up; row 0 is the farthest row and column 0 the
    agent's leftmost. Each window cell is one-hot over
    (empty, wall, goal, out-of-bounds), followed by a one-hot facing.
    """
    k = view_size
    if k < 1 or k % 2 == 0:
        raise ConfigurationError("view_size must be a positive odd integer")
    half = k // 2
    padded = np.full((level.height + 2 * k, level.width + 2 * k), OUT_OF_BOUNDS, dtype=np.int8)
    padded[k:-k, k:-k] = level.codes()

    ys, xs = np.mgrid[0:level.height, 0:level.width]
    forward = np.arange(k)[::-1]                  # window row r looks forward k-1-r cells
    lateral = np.arange(-half, half + 1)          # window column c looks c-half cells right
    table = np.zeros((level.height, level.width, 4, observation_dim(k)), dtype=np.float64)
    for d, (fx, fy) in enumerate(DIRECTIONS):
        rx, ry = DIRECTIONS[(d + 1) % 4]
        wx = xs[:, :, None, None] + forward[None, None, :, None] * fx + lateral[None, None, None, :] * rx
        wy = ys[:, :, None, None] + forward[None, None, :, None] * fy + lateral[None, None, None, :] * ry
        codes = padded[wy + k, wx + k].reshape(level.height, level.width, k * k)
        onehot = np.eye(NUM_CHANNELS)[codes].reshape(level.height, level.width, -1)
        table[:, :, d, :NUM_CHANNELS * k * k] = onehot
        table[:, :, d, NUM_CHANNELS * k * k + d] = 1.0
    table.flags.writeable = False
    return table


def goal_reward(t: int, horizon: int) -> float:
    return 1.0 - 0.9 * (t / horizon)


class MazeEnv:
    """Student-side dynamics: forward / turn left / turn right.

    Reward is 0 per step and ``1 - 0.9 * t / horizon`` on reaching the goal,
    where ``t`` counts steps taken including the final one. After ``horizon``
    steps the episode is truncated without a terminal flag.
    """

    num_actions = NUM_STUDENT_ACTIONS

    def __init__(self, horizon: int = DEFAULT_HORIZON, view_size: int = DEFAULT_VIEW):
        if horizon < 1:
            raise ConfigurationError("horizon must be positive")
        self.horizon = int(horizon)
        self.view_size = int(view_size)
        self.obs_dim = observation_dim(self.view_size)
        self.level: MazeLevel | None = None
        self._table = None
        self.pos = (0, 0)
        self.dir = 0
        self.t = 0
        self.terminal = False
        self.truncated = False

    @property
    def done(self) -> bool:
        return self.terminal or self.truncated

    def reset(self, level=None) -> np.ndarray:
        if level is not None:
            level = as_maze_level(level)
            if level is not self.level:
                self.level = level
                self._table = observation_table(level, self.view_size)
        if self.level is None:
            raise UsageError("reset() needs a level the first time")
        self.pos = self.level.start
        self.dir = self.level.start_dir
        self.t = 0
        self.terminal = self.truncated = False
        return self.observation()

    def observation(self) -> np.ndarray:
        x, y = self.pos
        return self._table[y, x, self.dir]

    def step(self, action: int) -> tuple[np.ndarray, float, bool]:
        if self.level is None:
            raise UsageError("step() before reset()")
        if self.done:
            raise UsageError("step() after the episode ended; call reset()")
        self.t += 1
        if action == FORWARD:
            dx, dy = DIRECTIONS[self.dir]
            nxt = (self.pos[0] + dx, self.pos[1] + dy)
            if self.level.inside(nxt) and nxt not in self.level.walls:
                self.pos = nxt
        elif action == TURN_LEFT:
            self.dir = (self.dir - 1) % 4
        elif action == TURN_RIGHT:
            self.dir = (self.dir + 1) % 4
        else:
            raise ConfigurationError(f"unknown student action {action}")
        reward = 0.0
        if self.pos == self.level.goal:
            reward = goal_reward(self.t, self.horizon)
            self.terminal = True
        elif self.t >= self.horizon:
            self.truncated = True
        return self.observation(), reward, self.terminal


# ---------------------------------------------------------------------------
# ASCII format

_CHARS = {"#", ".", "A", "G"}


def render_ascii(level: MazeLevel) -> str:
    rows = []
    for y in range(level.height):
        row = []
        for x in range(level.width):
            if (x, y) == level.start:
                row.append("A")
            elif (x, y) == level.goal:
                row.append("G")
            elif (x, y) in level.walls:
                row.append("#")
            else:
                row.append(".")
        rows.append("".join(row))
    return "\n".join(rows) + "\n"


def parse_ascii(text: str, start_dir: int = 0) -> MazeLevel:
    lines = [ln.rstrip("\r") for ln in text.strip("\n").split("\n")]
    if not lines or not lines[0]:
        raise ParseError("empty maze text")
    width = len(lines[0])
    if any(len(ln) != width for ln in lines):
        raise ParseError("maze rows have different lengths")
    start = goal = None
    walls = set()
    for y, ln in enumerate(lines):
        for x, ch in enumerate(ln):
            if ch not in _CHARS:
                raise ParseError(f"unknown character {ch!r} at row {y}, column {x}")
            if ch == "#":
                walls.add((x, y))
            elif ch == "A":
                if start is not None:
                    raise ParseError("more than one 'A'")
                start = (x, y)
            elif ch == "G":
                if goal is not None:
                    raise ParseError("more than one 'G'")
                goal = (x, y)
    if start is None:
        raise ParseError("missing start 'A'")
    if goal is None:
        raise ParseError("missing goal 'G'")
    return MazeLevel(width, len(lines), start, goal, frozenset(walls), start_dir, max_blocks=None)


def load_maze(path) -> MazeLevel:
    return parse_ascii(Path(path).read_text())


def save_maze(level: MazeLevel, path):
    Path(path).write_text(render_ascii(level))


def iter_maze_files(directory) -> Iterable[Path]:
    return sorted(Path(directory).glob("*.maze"))
