"""The nine pursuit-evasion variants, capture detection and termination."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from .collision import CollisionReport, Outcome, OutcomeMatrix
from . import kernels
from .world import Role, WorldState

TASK_NAMES = ("-D", "-R", "-B", "-O", "-S", "-SB", "-SD", "-SDB", "-TO")
DEFAULT_MAX_STEPS = 500


class UnknownTaskError(KeyError):
    def __str__(self):
        return f"unknown task {self.args[0]!r}; valid names: {', '.join(TASK_NAMES)}"


class CaptureMode(enum.Enum):
    OCCUPATION = "occupation"
    SURROUNDING = "surrounding"
    SURROUNDING_DISAPPEAR = "surrounding_disappear"

    @property
    def surrounding(self) -> bool:
        return self is not CaptureMode.OCCUPATION


class GameStatus(enum.Enum):
    RUNNING = "running"
    ALL_CAPTURED = "all_captured"
    TRUNCATED = "truncated"
    PURSUERS_EXTINCT = "pursuers_extinct"


@dataclass(frozen=True)
class TaskSpec:
    name: str
    two_swarm_turn_taking: bool
    agent_agent_turn_taking: bool
    matrix: OutcomeMatrix
    capture_mode: CaptureMode
    max_steps: int = DEFAULT_MAX_STEPS
    capture_removes_evader: bool = True
    # bounce any entry into a cell held by an opponent (surrounding tasks)
    block_opponent_cells: bool = field(default=None)

    def __post_init__(self):
        if self.block_opponent_cells is None:
            object.__setattr__(self, "block_opponent_cells", self.capture_mode.surrounding)

    @property
    def simultaneous(self) -> bool:
        return not (self.two_swarm_turn_taking or self.agent_agent_turn_taking)

    def with_max_steps(self, max_steps: int) -> "TaskSpec":
        return replace(self, max_steps=max_steps)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "two_swarm_turn_taking": self.two_swarm_turn_taking,
            "agent_agent_turn_taking": self.agent_agent_turn_taking,
            "matrix": self.matrix.as_dict(),
            "capture_mode": self.capture_mode.value,
            "max_steps": self.max_steps,
            "capture_removes_evader": self.capture_removes_evader,
            "block_opponent_cells": self.block_opponent_cells,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaskSpec":
        return cls(
            name=d["name"],
            two_swarm_turn_taking=bool(d["two_swarm_turn_taking"]),
            agent_agent_turn_taking=bool(d["agent_agent_turn_taking"]),
            matrix=OutcomeMatrix.from_dict(d["matrix"]),
            capture_mode=CaptureMode(d["capture_mode"]),
            max_steps=int(d["max_steps"]),
            capture_removes_evader=bool(d["capture_removes_evader"]),
            block_opponent_cells=bool(d["block_opponent_cells"]),
        )


def _row(name, turns, ao, aa, pursuer, evader, mode):
    return TaskSpec(
        name=name,
        two_swarm_turn_taking=turns,
        agent_agent_turn_taking=turns,
        matrix=OutcomeMatrix.parse(ao, aa, pursuer, evader),
        capture_mode=mode,
        capture_removes_evader=mode is not CaptureMode.SURROUNDING,
    )


_OCC, _SUR, _SURD = CaptureMode.OCCUPATION, CaptureMode.SURROUNDING, CaptureMode.SURROUNDING_DISAPPEAR
# name, turn-taking, A-O, A-A, P-E pursuer side, P-E evader side, capture
_REGISTRY = {
    spec.name: spec
    for spec in (
        _row("-D", False, "D", "D", "D", "D", _OCC),
        _row("-R", False, "B", "R", "R", "R", _OCC),
        _row("-B", False, "B", "B", "R", "R", _OCC),
        _row("-O", False, "B", "R", "R", "D", _OCC),
        _row("-S", False, "B", "R", "R", "B", _SUR),
        _row("-SB", False, "B", "B", "R", "B", _SUR),
        _row("-SD", False, "B", "R", "R", "B", _SURD),
        _row("-SDB", False, "B", "B", "R", "B", _SURD),
        _row("-TO", True, "B", "R", "R", "D", _OCC),
    )
}


def normalize_task_name(name: str) -> str:
    """Accept ``-O``, ``O`` or ``Pursuit-Evasion-O``."""
    s = name.strip()
    if s.lower().startswith("pursuit-evasion"):
        s = s[len("pursuit-evasion"):]
    if not s.startswith("-"):
        s = "-" + s
    s = "-" + s[1:].upper()
    if s not in _REGISTRY:
        raise UnknownTaskError(name)
    return s


def task_spec(name: str) -> TaskSpec:
    return _REGISTRY[normalize_task_name(name)]


@dataclass(frozen=True)
class Capture:
    evader: int
    capturers: tuple[int, ...]
    # True when the capture is the same event as a P-E collision (occupation)
    by_contact: bool

    def as_dict(self) -> dict:
        return {"evader": self.evader, "capturers": list(self.capturers), "by_contact": self.by_contact}


_PURSUER = int(Role.PURSUER)


def check_captures(
    world: WorldState, spec: TaskSpec, report: CollisionReport | None = None
) -> list[Capture]:
    """Evaders newly captured in ``world`` (the post-move state).

    Occupation captures come from two sources: P-E events in ``report`` that
    removed the evader (D on its side), and evaders sharing a cell with a
    pursuer after the move.
    """
    active = (world.alive & ~world.captured).tolist()
    is_p = (world.roles == _PURSUER).tolist()
    cells = list(map(tuple, world.positions.tolist()))
    held: dict[tuple, list[int]] = {}
    evaders = []
    for i, on in enumerate(active):
        if on:
            if is_p[i]:
                held.setdefault(cells[i], []).append(i)
            else:
                evaders.append(i)

    if spec.capture_mode is CaptureMode.OCCUPATION:
        captures: dict[int, set[int]] = {}
        if report is not None and len(report):
            pe = report.type_codes == 2
            for kind, a, b, _, _, oa, ob in report.raw[pe].tolist():
                p, e, oe = (a, b, ob) if is_p[a] else (b, a, oa)
                if oe == kernels.OUT_D and not world.captured[e]:
                    captures.setdefault(e, set()).add(p)
        for e in evaders:
            hit = held.get(cells[e])
            if hit:
                captures.setdefault(e, set()).update(hit)
        return [Capture(e, tuple(sorted(ps)), True) for e, ps in sorted(captures.items())]

    # out-of-grid and obstacle cells count as walls; every other neighbour
    # must hold a pursuer, and at least one pursuer is required
    h, w = world.height, world.width
    obstacles = world.obstacles
    out = []
    for e in evaders:
        r, c = cells[e]
        ps = []
        for nb in ((r - 1, c), (r + 1, c), (r, c - 1), (r, c + 1)):
            there = held.get(nb)
            if there:
                ps.extend(there)
            elif 0 <= nb[0] < h and 0 <= nb[1] < w and not obstacles[nb]:
                break
        else:
            if ps:
                out.append(Capture(e, tuple(sorted(ps)), False))
    return out


def apply_captures(world: WorldState, captures: list[Capture], spec: TaskSpec) -> WorldState:
    if not captures:
        return world
    ids = np.array([c.evader for c in captures], dtype=np.int64)
    world.captured[ids] = True
    if spec.capture_removes_evader:
        world.alive[ids] = False
    return world


def is_terminal(world: WorldState, spec: TaskSpec) -> GameStatus:
    active = world.alive & ~world.captured
    is_p = world.roles == _PURSUER
    if not (active & ~is_p).any():
        return GameStatus.ALL_CAPTURED
    if not (active & is_p).any():
        return GameStatus.PURSUERS_EXTINCT
    if world.step_index >= spec.max_steps:
        return GameStatus.TRUNCATED
    return GameStatus.RUNNING


__all__ = [
    "TASK_NAMES", "CaptureMode", "GameStatus", "TaskSpec", "Capture", "Outcome",
    "UnknownTaskError", "task_spec", "normalize_task_name", "check_captures",
    "apply_captures", "is_terminal",
]
