"""reset/step surface over the three interaction models."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Mapping

import numpy as np

from . import kernels
from .collision import CollisionReport, resolve
from .tasks import (
    Capture,
    GameStatus,
    TaskSpec,
    apply_captures,
    check_captures,
    is_terminal,
    task_spec,
)
from .world import Action, Role, WorldState, new_world


class EnvError(RuntimeError):
    pass


class OutOfTurnError(EnvError):
    pass


class EpisodeFinishedError(EnvError):
    pass


class DeadAgentError(EnvError):
    pass


@dataclass(frozen=True)
class RewardTable:
    capture: float = 10.0
    neighbor: float = 0.1
    collide: float = -12.0
    step_cost: float = -0.05
    being_captured: float = -10.0
    being_neighbored: float = -0.1
    evader_collide: float = -12.0
    evader_step_cost: float = -0.05

    def as_dict(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True)
class EnvConfig:
    task: TaskSpec = field(default_factory=lambda: task_spec("-O"))
    width: int = 40
    height: int = 40
    obstacles: tuple[tuple[int, int], ...] = ()
    pursuers: int = 8
    evaders: int = 30
    fov: int = 5
    rewards: RewardTable = field(default_factory=RewardTable)
    seed: int = 0
    max_steps: int | None = None

    def __post_init__(self):
        if isinstance(self.task, str):
            object.__setattr__(self, "task", task_spec(self.task))
        object.__setattr__(self, "obstacles", tuple(tuple(int(v) for v in o) for o in self.obstacles))
        if self.max_steps is not None and self.max_steps != self.task.max_steps:
            object.__setattr__(self, "task", self.task.with_max_steps(int(self.max_steps)))
        object.__setattr__(self, "max_steps", self.task.max_steps)
        self.validate()

    def validate(self) -> None:
        if self.width < 1 or self.height < 1:
            raise ValueError("grid dimensions must be positive")
        if self.pursuers < 1:
            raise ValueError("at least one pursuer is required")
        if self.evaders < 1:
            raise ValueError("at least one evader is required")
        if self.fov < 0:
            raise ValueError("fov radius must be >= 0")
        if self.max_steps < 0:
            raise ValueError("max_steps must be >= 0")
        free = self.width * self.height - len(set(self.obstacles))
        if self.pursuers + self.evaders > free:
            raise ValueError(
                f"{self.pursuers + self.evaders} agents do not fit on {free} free cells"
            )

    @property
    def obs_size(self) -> int:
        return 3 * (2 * self.fov + 1) ** 2 + 2

    def with_(self, **changes) -> "EnvConfig":
        if "task" in changes and "max_steps" not in changes:
            changes["max_steps"] = None
        return replace(self, **changes)

    def as_dict(self) -> dict:
        return {
            "task": self.task.as_dict(),
            "width": self.width,
            "height": self.height,
            "obstacles": [list(o) for o in self.obstacles],
            "pursuers": self.pursuers,
            "evaders": self.evaders,
            "fov": self.fov,
            "rewards": self.rewards.as_dict(),
            "seed": self.seed,
            "max_steps": self.max_steps,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "EnvConfig":
        task = d.get("task", "-O")
        task = TaskSpec.from_dict(task) if isinstance(task, Mapping) else task_spec(task)
        return cls(
            task=task,
            width=int(d.get("width", 40)),
            height=int(d.get("height", 40)),
            obstacles=tuple(tuple(o) for o in d.get("obstacles", ())),
            pursuers=int(d.get("pursuers", 8)),
            evaders=int(d.get("evaders", 30)),
            fov=int(d.get("fov", 5)),
            rewards=RewardTable(**d.get("rewards", {})),
            seed=int(d.get("seed", 0)),
            max_steps=d.get("max_steps"),
        )


@dataclass
class StepOutcome:
    obs_ids: np.ndarray
    obs_matrix: np.ndarray
    rewards: dict[int, float]
    terminated: bool
    truncated: bool
    info: dict
    actors: tuple[int, ...] = ()

    @property
    def observations(self) -> dict[int, np.ndarray]:
        return dict(zip(self.obs_ids.tolist(), self.obs_matrix))

    @property
    def report(self) -> CollisionReport:
        return self.info["collision_report"]

    @property
    def captures(self) -> list[Capture]:
        return self.info["captures"]


_P = int(Role.PURSUER)


def _occupancy(world: WorldState):
    return kernels.occupancy_grids(world.obstacles, world.positions, world.roles, world.alive, world.captured)


def observe_many(world: WorldState, ids: np.ndarray, r: int) -> np.ndarray:
    ids = np.asarray(ids, dtype=np.int64)
    if ids.size and not world.active[ids].all():
        raise DeadAgentError("cannot observe an inactive agent")
    blockers, pcount, ecount = _occupancy(world)
    return kernels.observe_windows(
        blockers, pcount, ecount, world.positions[ids], world.roles[ids].astype(np.int64), r
    )


def observe(world: WorldState, agent_id: int, r: int = 5) -> np.ndarray:
    """Flattened egocentric view: blockers, teammates, opponents, then own (row, col) in [0, 1]."""
    if not world.active[agent_id]:
        raise DeadAgentError(f"agent {agent_id} is not active")
    return observe_many(world, np.array([agent_id]), r)[0]


def _adjacent_opponent(world: WorldState) -> np.ndarray:
    """Per agent: an active opponent sits on a von Neumann neighbour cell."""
    active = (world.alive & ~world.captured).tolist()
    roles = world.roles.tolist()
    cells = list(map(tuple, world.positions.tolist()))
    held = ({c for c, on, k in zip(cells, active, roles) if on and k == 0},
            {c for c, on, k in zip(cells, active, roles) if on and k == 1})
    out = np.zeros(len(cells), dtype=bool)
    for i, ((r, c), on, k) in enumerate(zip(cells, active, roles)):
        if on:
            them = held[1 - k]
            out[i] = (r - 1, c) in them or (r + 1, c) in them or (r, c - 1) in them or (r, c + 1) in them
    return out


def compute_rewards(
    report: CollisionReport,
    captures: list[Capture],
    world_before: WorldState,
    world_after: WorldState,
    table: RewardTable,
    actors=None,
) -> dict[int, float]:
    """Per-agent reward of one tick as a sum of reward-table entries.

    Step cost, neighbour terms and collision penalties go to the agents that
    acted (everyone in simultaneous play). Capture credit and the
    being-captured penalty go to all involved agents. A pursuer-evader
    contact that is itself an occupation capture is paid as a capture only.
    """
    recipients = world_before.active_ids().tolist()
    acting = set(recipients if actors is None else (int(a) for a in actors))
    pursuer = (world_before.roles == _P).tolist()
    terms: dict[int, list[float]] = {i: [] for i in recipients}

    for i in recipients:
        if i in acting:
            terms[i].append(table.step_cost if pursuer[i] else table.evader_step_cost)

    exempt = set()
    for cap in captures:
        if cap.evader in terms:
            terms[cap.evader].append(table.being_captured)
        for p in cap.capturers:
            if p in terms:
                terms[p].append(table.capture)
            if cap.by_contact:
                exempt.add((p, cap.evader))

    if len(report):
        for (kind, a, b, *_), code in zip(report.raw.tolist(), report.type_codes.tolist()):
            if code == 2 and exempt:
                if ((a, b) if pursuer[a] else (b, a)) in exempt:
                    continue
            for x in (a, b):
                if x >= 0 and x in acting and x in terms:
                    terms[x].append(table.collide if pursuer[x] else table.evader_collide)

    adjacent = _adjacent_opponent(world_after).tolist()
    for i in recipients:
        if i in acting and adjacent[i]:
            terms[i].append(table.neighbor if pursuer[i] else table.being_neighbored)

    return {i: math.fsum(t) for i, t in terms.items() if t or i in acting}


class PursuitEvasionEnv:
    """One episode state machine.

    Simultaneous tasks step through :meth:`step_simultaneous`. Turn-taking
    tasks use :meth:`step_two_swarm` (pursuers move first) or, when both
    turn flags are set, :meth:`step_agent_by_agent` (active agents in id
    order, pursuers before evaders). ``world.step_index`` counts complete
    rounds in the turn-taking models.
    """

    def __init__(self, config: EnvConfig):
        self.config = config
        self.spec = config.task
        self.world: WorldState | None = None
        self.status = GameStatus.RUNNING
        self._mode: str | None = None
        self.next_swarm = Role.PURSUER
        self._next_agent: int | None = None

    # -- lifecycle ---------------------------------------------------------
    def reset(self, seed: int | None = None):
        seed = self.config.seed if seed is None else seed
        c = self.config
        return self.reset_to(new_world(c.width, c.height, c.obstacles, c.pursuers, c.evaders, seed))

    def reset_to(self, world: WorldState):
        """Start an episode from an explicit world (hand-built scenarios)."""
        self.world = world.copy()
        self.status = is_terminal(self.world, self.spec)
        self._mode = None
        self.next_swarm = Role.PURSUER
        self._next_agent = None
        ids = self.world.active_ids()
        info = self._info(CollisionReport.empty(self.world.roles), [])
        return dict(zip(ids.tolist(), self.observe_ids(ids))), info

    @property
    def done(self) -> bool:
        return self.status is not GameStatus.RUNNING

    @property
    def next_agent(self) -> int | None:
        if self.world is None or self.done:
            return None
        if self._next_agent is None:
            self._next_agent = self._cycle_after(-1)
        return self._next_agent

    def _cycle_after(self, i: int) -> int | None:
        ids = self.world.active_ids()
        later = ids[ids > i]
        return int(later[0]) if later.size else None

    def observe(self, agent_id: int) -> np.ndarray:
        return observe(self.world, agent_id, self.config.fov)

    def observe_ids(self, ids) -> np.ndarray:
        return observe_many(self.world, np.asarray(ids, dtype=np.int64), self.config.fov)

    # -- stepping ----------------------------------------------------------
    def step(self, joint) -> StepOutcome:
        return self.step_simultaneous(joint)

    def step_simultaneous(self, joint) -> StepOutcome:
        self._check_running("simultaneous")
        if not self.spec.simultaneous:
            raise EnvError(f"task {self.spec.name} is turn-taking; use step_two_swarm/step_agent_by_agent")
        actors = self.world.active_ids()
        return self._advance(joint, actors, round_end=True, acting_all=True)

    def step_two_swarm(self, swarm: Role | int, joint) -> StepOutcome:
        self._check_running("two_swarm")
        if not self.spec.two_swarm_turn_taking:
            raise EnvError(f"task {self.spec.name} does not use two-swarm turn-taking")
        swarm = Role(int(swarm))
        if swarm != self.next_swarm:
            raise OutOfTurnError(f"it is the {self.next_swarm.name.lower()} swarm's turn")
        actors = self.world.active_ids(swarm)
        out = self._advance(joint, actors, round_end=swarm == Role.EVADER, acting_all=False)
        self.next_swarm = Role.EVADER if swarm == Role.PURSUER else Role.PURSUER
        return out

    def step_agent_by_agent(self, agent_id: int, action: Action | int) -> StepOutcome:
        self._check_running("agent_by_agent")
        if not (self.spec.two_swarm_turn_taking and self.spec.agent_agent_turn_taking):
            raise EnvError(f"task {self.spec.name} does not use agent-by-agent turn-taking")
        expected = self.next_agent
        if agent_id != expected:
            raise OutOfTurnError(f"agent {expected} moves next, not {agent_id}")
        actors = np.array([agent_id], dtype=np.int64)
        out = self._advance({agent_id: int(action)}, actors, round_end=False, acting_all=False)
        following = self._cycle_after(agent_id)
        self._next_agent = following
        # an ended episode still closes the round if the evaders had their turn,
        # matching the two-swarm model where the evader half-step ends a round
        if following is None and (not self.done or self.world.roles[agent_id] == Role.EVADER):
            self._finish_round()
            self._sync_terminal(out)
        return out

    # -- internals ---------------------------------------------------------
    def _check_running(self, mode: str) -> None:
        if self.world is None:
            raise EnvError("call reset() first")
        if self.done:
            raise EpisodeFinishedError(f"episode already ended ({self.status.value})")
        if self._mode is None:
            self._mode = mode
        elif self._mode != mode:
            raise EnvError(f"episode is being stepped in {self._mode} mode")

    def _finish_round(self) -> None:
        self.world.step_index += 1
        self.status = is_terminal(self.world, self.spec)

    def _sync_terminal(self, out: StepOutcome) -> None:
        out.terminated = self.status in (GameStatus.ALL_CAPTURED, GameStatus.PURSUERS_EXTINCT)
        out.truncated = self.status is GameStatus.TRUNCATED
        out.info["game_status"] = self.status.value
        out.info["step"] = self.world.step_index

    def _advance(self, joint, actors: np.ndarray, round_end: bool, acting_all: bool) -> StepOutcome:
        before = self.world
        after, report = resolve(before, joint, self.spec.matrix, self.spec.block_opponent_cells, actors)
        captures = check_captures(after, self.spec, report)
        apply_captures(after, captures, self.spec)
        rewards = compute_rewards(
            report, captures, before, after, self.config.rewards,
            actors=None if acting_all else actors,
        )
        self.world = after
        if round_end:
            self._finish_round()
        else:
            self.status = is_terminal(after, self.spec)
            if self.status is GameStatus.TRUNCATED:
                self.status = GameStatus.RUNNING
        ids = after.active_ids()
        obs = self.observe_ids(ids)
        out = StepOutcome(
            obs_ids=ids,
            obs_matrix=obs,
            rewards=rewards,
            terminated=False,
            truncated=False,
            info=self._info(report, captures),
            actors=tuple(actors.tolist()),
        )
        self._sync_terminal(out)
        return out

    def _info(self, report: CollisionReport, captures: list[Capture]) -> dict:
        w = self.world
        return {
            "game_status": self.status.value,
            "step": w.step_index,
            "collisions": report.counts_dict(),
            "collision_report": report,
            "captures": captures,
            "alive": dict(enumerate(w.alive.tolist())),
            "captured": dict(enumerate(w.captured.tolist())),
        }
