"""Episode runner shared by experience collection, evaluation and tracing."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from .env import EnvConfig, PursuitEvasionEnv, StepOutcome
from .policies import Policy
from .world import Role


def derive_seed(*parts) -> int:
    """Stable 63-bit seed from any tuple of ints/strings (never ``hash()``)."""
    digest = hashlib.blake2b(repr(tuple(parts)).encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little") >> 1


def interaction_model(config: EnvConfig) -> str:
    spec = config.task
    if spec.two_swarm_turn_taking and spec.agent_agent_turn_taking:
        return "agent_by_agent"
    if spec.two_swarm_turn_taking:
        return "two_swarm"
    return "simultaneous"


@dataclass
class Transitions:
    """Flat per-team transition log; ``agent`` lets returns be split per trajectory."""

    obs: list = field(default_factory=list)
    actions: list = field(default_factory=list)
    rewards: list = field(default_factory=list)
    agent: list = field(default_factory=list)
    last: dict = field(default_factory=dict)

    def add(self, agent_ids, obs, actions):
        base = len(self.actions)
        self.obs.append(obs)
        self.actions.extend(actions.tolist())
        self.rewards.extend([0.0] * len(agent_ids))
        self.agent.extend(agent_ids)
        for k, i in enumerate(agent_ids):
            self.last[i] = base + k

    def credit(self, agent_id, reward):
        idx = self.last.get(agent_id)
        if idx is not None:
            self.rewards[idx] += reward


@dataclass
class EpisodeResult:
    seed: int
    initial_evaders: int
    captured: int
    steps: int
    status: str
    collisions: dict
    team_return: dict
    ticks: list | None = None
    transitions: dict | None = None
    initial_world: object = None
    final_world: object = None

    @property
    def capture_rate(self) -> float:
        return self.captured / self.initial_evaders if self.initial_evaders else 0.0


def _tick_record(out: StepOutcome, actions: dict, world) -> dict:
    return {
        "step": world.step_index,
        "actors": [int(a) for a in out.actors],
        "actions": {str(k): int(v) for k, v in actions.items()},
        "rewards": {str(k): v for k, v in out.rewards.items()},
        "agents": [
            [int(r), int(c), bool(a), bool(cp)]
            for (r, c), a, cp in zip(world.positions.tolist(), world.alive.tolist(), world.captured.tolist())
        ],
        "collisions": out.report.raw.tolist(),
        "captures": [c.as_dict() for c in out.captures],
        "status": out.info["game_status"],
    }


def run_episode(
    config: EnvConfig,
    pursuer_policy: Policy,
    evader_policy: Policy,
    seed: int,
    record_transitions: bool = False,
    record_ticks: bool = False,
) -> EpisodeResult:
    env = PursuitEvasionEnv(config)
    env.reset(seed)
    rng = np.random.default_rng([seed, 0x5EED])
    policies = {Role.PURSUER: pursuer_policy, Role.EVADER: evader_policy}
    logs = {Role.PURSUER: Transitions(), Role.EVADER: Transitions()} if record_transitions else None
    ticks = [] if record_ticks else None
    roles = env.world.roles
    initial = env.world.copy()
    collisions = {"agent_obstacle": 0, "agent_agent": 0, "pursuer_evader": 0}
    returns = np.zeros(env.world.n_agents)
    mode = interaction_model(config)

    cur = {"ids": env.world.active_ids()}
    cur["obs"] = env.observe_ids(cur["ids"])

    def act(ids, role):
        ids = np.asarray(ids, dtype=np.int64)
        if ids.size == 0:
            return ids, np.empty(0, np.int64)
        obs = cur["obs"][np.searchsorted(cur["ids"], ids)]
        a = np.asarray(policies[role].act_batch(obs, rng), dtype=np.int64)
        if logs is not None:
            logs[role].add(ids.tolist(), obs, a)
        return ids, a

    def absorb(out: StepOutcome, actions: dict):
        cur["ids"], cur["obs"] = out.obs_ids, out.obs_matrix
        for k, v in out.info["collisions"].items():
            collisions[k] += v
        for i, r in out.rewards.items():
            returns[i] += r
            if logs is not None:
                logs[Role(int(roles[i]))].credit(i, r)
        if ticks is not None:
            ticks.append(_tick_record(out, actions, env.world))

    while not env.done:
        if mode == "simultaneous":
            actions = {}
            for role in (Role.PURSUER, Role.EVADER):
                ids, a = act(env.world.active_ids(role), role)
                actions.update(zip(ids.tolist(), a.tolist()))
            out = env.step_simultaneous(actions)
            absorb(out, actions)
        elif mode == "two_swarm":
            role = env.next_swarm
            ids, a = act(env.world.active_ids(role), role)
            actions = dict(zip(ids.tolist(), a.tolist()))
            out = env.step_two_swarm(role, actions)
            absorb(out, actions)
        else:
            i = env.next_agent
            role = Role(int(roles[i]))
            _, a = act([i], role)
            out = env.step_agent_by_agent(i, int(a[0]))
            absorb(out, {i: int(a[0])})

    world = env.world
    team_return = {}
    for role in (Role.PURSUER, Role.EVADER):
        mask = roles == role
        team_return[role.name.lower()] = float(returns[mask].mean()) if mask.any() else 0.0
    n_e = int(np.sum(roles == Role.EVADER))
    return EpisodeResult(
        seed=seed,
        initial_evaders=n_e,
        captured=int(np.sum(world.captured & (roles == Role.EVADER))),
        steps=world.step_index,
        status=env.status.value,
        collisions=collisions,
        team_return=team_return,
        ticks=ticks,
        transitions=logs,
        initial_world=initial,
        final_world=world,
    )
