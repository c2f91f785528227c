"""Grid geometry, agent bookkeeping and the world value type."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class CapacityError(ValueError):
    """Raised when agents cannot be placed on the free cells of a grid."""


class Position(NamedTuple):
    row: int
    col: int


class Action(enum.IntEnum):
    STAY = 0
    UP = 1
    DOWN = 2
    LEFT = 3
    RIGHT = 4


N_ACTIONS = 5

# (drow, dcol) indexed by Action value
ACTION_DELTAS = np.array([(0, 0), (-1, 0), (1, 0), (0, -1), (0, 1)], dtype=np.int64)

OPPOSITE = {
    Action.STAY: Action.STAY,
    Action.UP: Action.DOWN,
    Action.DOWN: Action.UP,
    Action.LEFT: Action.RIGHT,
    Action.RIGHT: Action.LEFT,
}


class Role(enum.IntEnum):
    PURSUER = 0
    EVADER = 1


@dataclass(frozen=True)
class AgentRecord:
    id: int
    role: Role
    position: Position
    alive: bool
    captured: bool


@dataclass
class WorldState:
    """Array-backed world snapshot.

    Agent ids are row indices into the per-agent arrays; pursuers always come
    first. A captured evader keeps ``alive`` set while its body stays on the
    grid (frozen) and loses it when capture removes it.
    """

    width: int
    height: int
    obstacles: np.ndarray  # (height, width) bool
    positions: np.ndarray  # (n, 2) int64, row/col
    roles: np.ndarray  # (n,) int8
    alive: np.ndarray  # (n,) bool
    captured: np.ndarray  # (n,) bool
    step_index: int = 0

    @property
    def n_agents(self) -> int:
        return int(self.positions.shape[0])

    @property
    def active(self) -> np.ndarray:
        """Agents that still act: alive and not captured."""
        return self.alive & ~self.captured

    @property
    def frozen(self) -> np.ndarray:
        """Captured evaders whose bodies remain on the grid."""
        return self.alive & self.captured

    @property
    def agents(self) -> list[AgentRecord]:
        return [
            AgentRecord(
                id=i,
                role=Role(int(self.roles[i])),
                position=Position(int(self.positions[i, 0]), int(self.positions[i, 1])),
                alive=bool(self.alive[i]),
                captured=bool(self.captured[i]),
            )
            for i in range(self.n_agents)
        ]

    def obstacle_set(self) -> set[Position]:
        return {Position(int(r), int(c)) for r, c in zip(*np.nonzero(self.obstacles))}

    def in_bounds(self, p: Sequence[int]) -> bool:
        return 0 <= p[0] < self.height and 0 <= p[1] < self.width

    def active_ids(self, role: Role | None = None) -> np.ndarray:
        mask = self.active
        if role is not None:
            mask = mask & (self.roles == int(role))
        return np.flatnonzero(mask)

    def copy(self) -> "WorldState":
        return WorldState(
            width=self.width,
            height=self.height,
            obstacles=self.obstacles.copy(),
            positions=self.positions.copy(),
            roles=self.roles.copy(),
            alive=self.alive.copy(),
            captured=self.captured.copy(),
            step_index=self.step_index,
        )

    def same_state(self, other: "WorldState") -> bool:
        return (
            self.width == other.width
            and self.height == other.height
            and self.step_index == other.step_index
            and np.array_equal(self.obstacles, other.obstacles)
            and np.array_equal(self.positions, other.positions)
            and np.array_equal(self.roles, other.roles)
            and np.array_equal(self.alive, other.alive)
            and np.array_equal(self.captured, other.captured)
        )


def obstacle_grid(width: int, height: int, obstacles: Iterable[Sequence[int]] = ()) -> np.ndarray:
    grid = np.zeros((height, width), dtype=bool)
    for r, c in obstacles:
        if not (0 <= r < height and 0 <= c < width):
            raise ValueError(f"obstacle {(r, c)} outside {height}x{width} grid")
        grid[r, c] = True
    return grid


def new_world(
    width: int,
    height: int,
    obstacles: Iterable[Sequence[int]],
    pursuer_count: int,
    evader_count: int,
    seed: int | np.random.Generator | None,
) -> WorldState:
    """Place pursuers then evaders on distinct free cells drawn from ``seed``."""
    if width < 1 or height < 1:
        raise ValueError("grid dimensions must be positive")
    if pursuer_count < 0 or evader_count < 0:
        raise ValueError("agent counts must be non-negative")
    grid = obstacle_grid(width, height, obstacles)
    free = np.flatnonzero(~grid.ravel())
    n = pursuer_count + evader_count
    if n > free.size:
        raise CapacityError(f"{n} agents do not fit on {free.size} free cells")
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    cells = rng.permutation(free)[:n]
    positions = np.stack([cells // width, cells % width], axis=1).astype(np.int64)
    roles = np.array([Role.PURSUER] * pursuer_count + [Role.EVADER] * evader_count, dtype=np.int8)
    return WorldState(
        width=width,
        height=height,
        obstacles=grid,
        positions=positions.reshape(n, 2),
        roles=roles,
        alive=np.ones(n, dtype=bool),
        captured=np.zeros(n, dtype=bool),
    )


def intended_position(p: Sequence[int], a: Action | int) -> Position:
    dr, dc = ACTION_DELTAS[int(a)]
    return Position(int(p[0] + dr), int(p[1] + dc))


def von_neumann_neighbors(p: Sequence[int], world: WorldState) -> list[Position]:
    out = []
    for a in (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT):
        q = intended_position(p, a)
        if world.in_bounds(q):
            out.append(q)
    return out
