"""Conflict classification and simultaneous-move resolution."""
from __future__ import annotations

import enum
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

import numpy as np

from . import kernels
from .world import ACTION_DELTAS, Position, WorldState


class ArityError(ValueError):
    """Joint action does not match the set of acting agents."""


class CollisionType(enum.Enum):
    AGENT_OBSTACLE = "agent_obstacle"
    AGENT_AGENT = "agent_agent"
    PURSUER_EVADER = "pursuer_evader"


class Outcome(enum.IntEnum):
    D = kernels.OUT_D  # reach and disappear
    R = kernels.OUT_R  # reach and alive
    B = kernels.OUT_B  # bounce back and alive


KIND_NAMES = {
    kernels.KIND_VERTEX: "vertex",
    kernels.KIND_SWAP: "swap",
    kernels.KIND_OBSTACLE: "obstacle",
    kernels.KIND_BOUNDARY: "boundary",
}


@dataclass(frozen=True)
class OutcomeMatrix:
    agent_obstacle: Outcome
    agent_agent: Outcome
    pursuer_vs_evader: Outcome
    evader_vs_pursuer: Outcome

    @classmethod
    def parse(cls, ao: str, aa: str, pursuer: str, evader: str) -> "OutcomeMatrix":
        return cls(Outcome[ao], Outcome[aa], Outcome[pursuer], Outcome[evader])

    def pair_table(self) -> np.ndarray:
        """``table[a, b]`` is the outcome for a role-``a`` agent hitting a role-``b`` agent."""
        return np.array(
            [
                [self.agent_agent, self.pursuer_vs_evader],
                [self.evader_vs_pursuer, self.agent_agent],
            ],
            dtype=np.int64,
        )

    def as_dict(self) -> dict:
        return {
            "agent_obstacle": self.agent_obstacle.name,
            "agent_agent": self.agent_agent.name,
            "pursuer_vs_evader": self.pursuer_vs_evader.name,
            "evader_vs_pursuer": self.evader_vs_pursuer.name,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, str]) -> "OutcomeMatrix":
        return cls(
            Outcome[d["agent_obstacle"]],
            Outcome[d["agent_agent"]],
            Outcome[d["pursuer_vs_evader"]],
            Outcome[d["evader_vs_pursuer"]],
        )


@dataclass(frozen=True)
class CollisionEvent:
    type: CollisionType
    participants: tuple[int, ...]
    contested_cell: Position
    kind: str
    applied: tuple[Outcome, ...]

    def as_dict(self) -> dict:
        return {
            "type": self.type.value,
            "participants": list(self.participants),
            "cell": list(self.contested_cell),
            "kind": self.kind,
            "applied": [o.name for o in self.applied],
        }


def _event_type(kind: int, a: int, b: int, roles: np.ndarray) -> CollisionType:
    if kind in (kernels.KIND_OBSTACLE, kernels.KIND_BOUNDARY):
        return CollisionType.AGENT_OBSTACLE
    if roles[a] == roles[b]:
        return CollisionType.AGENT_AGENT
    return CollisionType.PURSUER_EVADER


class CollisionReport:
    """Events of one tick, backed by the kernel's integer event table.

    ``raw`` rows are ``(kind, a, b, row, col, out_a, out_b)`` with ``b = -1``
    for single-participant events.
    """

    def __init__(self, raw: np.ndarray, roles: np.ndarray,
                 moved: np.ndarray | None = None, removed: np.ndarray | None = None):
        self.raw = raw
        self.roles = roles
        n = roles.shape[0]
        self.moved_mask = moved if moved is not None else np.zeros(n, bool)
        self.removed_mask = removed if removed is not None else np.zeros(n, bool)

    @classmethod
    def empty(cls, roles: np.ndarray) -> "CollisionReport":
        return cls(np.empty((0, kernels.EVENT_COLUMNS), np.int64), roles)

    def __len__(self) -> int:
        return int(self.raw.shape[0])

    @cached_property
    def type_codes(self) -> np.ndarray:
        """0 = agent-obstacle, 1 = agent-agent, 2 = pursuer-evader per row."""
        if len(self) == 0:
            return np.empty(0, np.int64)
        roles = self.roles.tolist()
        return np.array([
            0 if b < 0 else 1 if roles[a] == roles[b] else 2
            for a, b in self.raw[:, 1:3].tolist()
        ], dtype=np.int64)

    @cached_property
    def counts_by_type(self) -> dict[CollisionType, int]:
        counts = np.bincount(self.type_codes, minlength=3)
        return {
            CollisionType.AGENT_OBSTACLE: int(counts[0]),
            CollisionType.AGENT_AGENT: int(counts[1]),
            CollisionType.PURSUER_EVADER: int(counts[2]),
        }

    @cached_property
    def events(self) -> tuple[CollisionEvent, ...]:
        out = []
        for kind, a, b, r, c, oa, ob in self.raw.tolist():
            if b < 0:
                parts, applied = (a,), (Outcome(oa),)
            else:
                parts, applied = (a, b), (Outcome(oa), Outcome(ob))
            out.append(CollisionEvent(
                type=_event_type(kind, a, b, self.roles),
                participants=parts,
                contested_cell=Position(r, c),
                kind=KIND_NAMES[kind],
                applied=applied,
            ))
        return tuple(out)

    @property
    def moved(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.moved_mask).tolist())

    @property
    def removed(self) -> frozenset[int]:
        return frozenset(np.flatnonzero(self.removed_mask).tolist())

    def counts_dict(self) -> dict[str, int]:
        return {t.value: v for t, v in self.counts_by_type.items()}


def joint_to_actions(world: WorldState, joint, actors: np.ndarray | None = None) -> np.ndarray:
    """Expand a joint action into one action per agent (STAY for non-actors).

    ``joint`` is either a mapping ``id -> action`` or a sequence aligned with
    ``actors`` (default: every active agent, ascending id).
    """
    if actors is None:
        actors = world.active_ids()
    actions = np.zeros(world.n_agents, dtype=np.int64)
    if isinstance(joint, Mapping):
        keys = sorted(int(k) for k in joint)
        if keys != actors.tolist():
            raise ArityError(f"joint action covers agents {keys}, expected {actors.tolist()}")
        actions[list(map(int, joint))] = list(map(int, joint.values()))
    else:
        seq = np.asarray(joint, dtype=np.int64).reshape(-1)
        if seq.shape[0] != actors.shape[0]:
            raise ArityError(f"joint action has {seq.shape[0]} entries, expected {actors.shape[0]}")
        actions[actors] = seq
    if actions.min() < 0 or actions.max() > 4:
        raise ValueError("actions must lie in 0..4")
    return actions


def cell_block_grid(world: WorldState) -> np.ndarray:
    grid = np.full((world.height, world.width), -1, dtype=np.int64)
    grid[world.obstacles] = -2
    frozen = np.flatnonzero(world.frozen)
    if frozen.size:
        grid[world.positions[frozen, 0], world.positions[frozen, 1]] = frozen
    return grid


def resolve(
    world: WorldState,
    joint,
    matrix: OutcomeMatrix,
    block_opponent_cells: bool = False,
    actors: np.ndarray | None = None,
) -> tuple[WorldState, CollisionReport]:
    """Resolve a joint action into the next world and the tick's collision report.

    ``block_opponent_cells`` makes any entry into a cell still held by an
    opposing agent bounce, whatever the matrix says; surrounding-capture
    tasks turn it on. Only ``actors`` move; other active agents stay put
    and still take part in conflicts.
    """
    actions = joint_to_actions(world, joint, actors)
    part = world.active
    targets = world.positions + ACTION_DELTAS[actions]
    vacate, dying, raw = kernels.resolve_core(
        world.positions,
        targets,
        world.roles.astype(np.int64),
        part,
        cell_block_grid(world),
        int(matrix.agent_obstacle),
        matrix.pair_table(),
        bool(block_opponent_cells),
    )
    if raw.shape[0] > 1:
        raw = raw[np.lexsort((raw[:, 2], raw[:, 1], raw[:, 0], raw[:, 4], raw[:, 3]))]
    after = world.copy()
    after.positions[vacate] = targets[vacate]
    after.alive[dying] = False
    return after, CollisionReport(raw, world.roles, moved=vacate, removed=dying)


def classify(
    world: WorldState,
    joint,
    matrix: OutcomeMatrix,
    block_opponent_cells: bool = False,
    actors: np.ndarray | None = None,
) -> CollisionReport:
    """Pre-resolution view: conflicts visible from intentions alone.

    Reports boundary/obstacle hits, same-cell contests, swaps, and entries
    into cells whose occupant does not try to leave. No bounce propagation.
    """
    actions = joint_to_actions(world, joint, actors)
    roles = world.roles
    pair = matrix.pair_table()
    blocks = cell_block_grid(world)
    pos = [tuple(p) for p in world.positions.tolist()]
    ids = world.active_ids().tolist()
    tgt = {i: (pos[i][0] + int(ACTION_DELTAS[actions[i], 0]), pos[i][1] + int(ACTION_DELTAS[actions[i], 1]))
           for i in ids}
    rows = []
    live = []
    for i in ids:
        t = tgt[i]
        if t == pos[i]:
            continue
        if not world.in_bounds(t):
            rows.append((kernels.KIND_BOUNDARY, i, -1, *t, _ao(matrix), -1))
        elif blocks[t] == -2:
            rows.append((kernels.KIND_OBSTACLE, i, -1, *t, _ao(matrix), -1))
        elif blocks[t] >= 0:
            rows.append((kernels.KIND_VERTEX, i, int(blocks[t]), *t, kernels.OUT_B, kernels.OUT_B))
        else:
            live.append(i)
    live_set = set(live)
    by_target: dict[tuple, list[int]] = {}
    for i in live:
        by_target.setdefault(tgt[i], []).append(i)
    for cell, group in by_target.items():
        for x in range(len(group)):
            for y in range(x + 1, len(group)):
                i, j = group[x], group[y]
                rows.append((kernels.KIND_VERTEX, i, j, *cell, pair[roles[i], roles[j]], pair[roles[j], roles[i]]))
    for i in live:
        for k in live:
            if k > i and tgt[i] == pos[k] and tgt[k] == pos[i]:
                rows.append((kernels.KIND_SWAP, i, k, *tgt[i], pair[roles[i], roles[k]], pair[roles[k], roles[i]]))
    for i in live:
        for k in ids:
            if k == i or pos[k] != tgt[i] or k in live_set:
                continue
            oi = pair[roles[i], roles[k]]
            if block_opponent_cells and roles[i] != roles[k]:
                oi = kernels.OUT_B
            rows.append((kernels.KIND_VERTEX, i, k, *tgt[i], oi, pair[roles[k], roles[i]]))
    raw = np.array(rows, dtype=np.int64).reshape(-1, kernels.EVENT_COLUMNS)
    if raw.shape[0] > 1:
        raw = raw[np.lexsort((raw[:, 2], raw[:, 1], raw[:, 0], raw[:, 4], raw[:, 3]))]
    return CollisionReport(raw, roles)


def _ao(matrix: OutcomeMatrix) -> int:
    return kernels.OUT_D if matrix.agent_obstacle == Outcome.D else kernels.OUT_B

