"""Adversarial co-evolution over a generation-indexed checkpoint store.

Three schemes are supported:

``spec_spec``
    pursuers of generation k train against evader generation k-1; evaders
    then train against the fresh pursuer generation k.
``gen_spec``
    pursuer epoch ``kp`` (1-based) faces evader generation ``kp mod k``;
    evaders as in ``spec_spec``.
``gen_gen``
    pursuers as in ``gen_spec``; evader epoch ``ke`` faces pursuer
    generation ``ke mod (k + 1)``.

Every epoch's rollouts are seeded from ``(seed, generation, epoch, role)``,
so a run interrupted after any complete generation resumes to the same store.
"""
from __future__ import annotations

import csv
import io
import json
import os
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable

import numpy as np

from .env import EnvConfig
from .learning import (
    LearnerConfig,
    Mlp,
    MlpPolicy,
    OptimizerState,
    actor_critic_update,
    collect_experiences,
    init_actor_critic,
    load_checkpoint,
    save_checkpoint,
)
from .policies import Policy, RandomPolicy
from .rollout import derive_seed
from .world import Role

SCHEMES = ("spec_spec", "gen_spec", "gen_gen")
STATS_COLUMNS = (
    "generation", "epoch", "role", "opponent_index", "mean_reward", "capture_rate",
    "collisions_ao", "collisions_aa", "collisions_pe",
)
ROLE_NAMES = {Role.PURSUER: "pursuer", Role.EVADER: "evader"}


def opponent_index_gen2(k: int, kp: int) -> int:
    if k < 1:
        raise ValueError("generation index must be >= 1")
    return kp % k


def opponent_index_gen3_evader(k: int, ke: int) -> int:
    if k < 1:
        raise ValueError("generation index must be >= 1")
    return ke % (k + 1)


def pursuer_opponent(scheme: str, k: int, kp: int) -> int:
    return k - 1 if scheme == "spec_spec" else opponent_index_gen2(k, kp)


def evader_opponent(scheme: str, k: int, ke: int) -> int:
    return opponent_index_gen3_evader(k, ke) if scheme == "gen_gen" else k


@dataclass(frozen=True)
class CoevolutionConfig:
    env: EnvConfig
    learner: LearnerConfig = field(default_factory=LearnerConfig)
    generations: int = 30
    pursuer_epochs: int = 400
    evader_epochs: int = 400
    scheme: str = "spec_spec"
    seed: int = 0
    # per-role override of ``learner``; None means use ``learner``
    evader_learner: LearnerConfig | None = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        for name in ("generations", "pursuer_epochs", "evader_epochs"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1")
        self.env.validate()

    def learner_for(self, role: Role) -> LearnerConfig:
        if role == Role.EVADER and self.evader_learner is not None:
            return self.evader_learner
        return self.learner

    def with_(self, **kw) -> "CoevolutionConfig":
        return replace(self, **kw)

    def as_dict(self) -> dict:
        return {
            "env": self.env.as_dict(),
            "learner": self.learner.as_dict(),
            "evader_learner": None if self.evader_learner is None else self.evader_learner.as_dict(),
            "generations": self.generations,
            "pursuer_epochs": self.pursuer_epochs,
            "evader_epochs": self.evader_epochs,
            "scheme": self.scheme,
            "seed": self.seed,
        }


class MissingCheckpointError(FileNotFoundError):
    pass


class CheckpointStore:
    """``root/gen_XXX/{pursuer.ckpt, evader.ckpt, stats.csv}``.

    A generation counts as complete once its ``stats.csv`` exists; it is
    written last.
    """

    def __init__(self, root):
        self.root = Path(root)
        self._cache: dict[tuple[int, str], tuple[Mlp, Mlp]] = {}

    def gen_dir(self, k: int) -> Path:
        return self.root / f"gen_{k:03d}"

    def path(self, k: int, role) -> Path:
        return self.gen_dir(k) / f"{_role_name(role)}.ckpt"

    def has(self, k: int, role) -> bool:
        return self.path(k, role).is_file()

    def save(self, k: int, role, actor: Mlp, critic: Mlp) -> None:
        save_checkpoint(self.path(k, role), actor, critic)
        self._cache.pop((k, _role_name(role)), None)

    def load(self, k: int, role) -> tuple[Mlp, Mlp]:
        key = (k, _role_name(role))
        if key not in self._cache:
            p = self.path(k, role)
            if not p.is_file():
                raise MissingCheckpointError(f"no {key[1]} checkpoint for generation {k} in {self.root}")
            self._cache[key] = load_checkpoint(p)
        return self._cache[key]

    def policy(self, k: int, role) -> MlpPolicy:
        actor, critic = self.load(k, role)
        return MlpPolicy(actor, critic)

    def is_complete(self, k: int) -> bool:
        if k == 0:
            return self.has(0, "pursuer") and self.has(0, "evader")
        return self.has(k, "pursuer") and self.has(k, "evader") and (self.gen_dir(k) / "stats.csv").is_file()

    @property
    def generations(self) -> int:
        """Highest generation index N such that 0..N are all complete (-1 if empty)."""
        k = -1
        while self.is_complete(k + 1):
            k += 1
        return k

    def write_stats(self, k: int, rows: list[dict]) -> None:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=STATS_COLUMNS, lineterminator="\n")
        w.writeheader()
        w.writerows(rows)
        path = self.gen_dir(k) / "stats.csv"
        path.parent.mkdir(parents=True, exist_ok=True)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(buf.getvalue())
        os.replace(tmp, path)

    def read_stats(self, k: int | None = None) -> list[dict]:
        ks = range(1, self.generations + 1) if k is None else [k]
        rows = []
        for g in ks:
            with open(self.gen_dir(g) / "stats.csv", newline="") as f:
                for row in csv.DictReader(f):
                    rows.append(_parse_stats_row(row))
        return rows


def _role_name(role) -> str:
    if isinstance(role, str):
        if role not in ("pursuer", "evader"):
            raise ValueError(f"role must be 'pursuer' or 'evader', got {role!r}")
        return role
    return ROLE_NAMES[Role(role)]


def _parse_stats_row(row: dict) -> dict:
    out = dict(row)
    for key in ("generation", "epoch", "collisions_ao", "collisions_aa", "collisions_pe"):
        out[key] = int(row[key])
    for key in ("mean_reward", "capture_rate"):
        out[key] = float(row[key])
    opp = row["opponent_index"]
    out["opponent_index"] = int(opp) if opp.lstrip("-").isdigit() else opp
    return out


def initial_parameters(config: CoevolutionConfig, role) -> tuple[Mlp, Mlp]:
    rng = np.random.default_rng(derive_seed(config.seed, "init", _role_name(role)))
    return init_actor_critic(config.env.obs_size, rng)


EpochCallback = Callable[[dict, object], None]


def train_single_side(
    env_config: EnvConfig,
    learner: LearnerConfig,
    role,
    opponent: Policy | Callable[[int], Policy],
    epochs: int,
    seed: int,
    init: tuple[Mlp, Mlp],
    generation: int = 0,
    opponent_label: Callable[[int], object] | object = "fixed",
    on_epoch: EpochCallback | None = None,
    record_ticks: bool = False,
):
    """Train one side for ``epochs`` epochs; returns (actor, critic, stats rows).

    ``opponent`` is either a fixed policy or a function of the 1-based epoch
    index. The opponent's parameters are never touched.
    """
    name = _role_name(role)
    train_role = Role.PURSUER if name == "pursuer" else Role.EVADER
    actor, critic = init
    state = OptimizerState()
    rows = []
    for epoch in range(1, epochs + 1):
        opp = opponent(epoch) if callable(opponent) and not isinstance(opponent, Policy) else opponent
        label = opponent_label(epoch) if callable(opponent_label) else opponent_label
        me = MlpPolicy(actor, critic)
        pp, ep = (me, opp) if train_role == Role.PURSUER else (opp, me)
        batch_p, batch_e, stats = collect_experiences(
            env_config, pp, ep, learner.episodes_per_epoch,
            derive_seed(seed, generation, epoch, name), learner.gamma, record_ticks=record_ticks,
        )
        batch = batch_p if train_role == Role.PURSUER else batch_e
        actor, critic, diag = actor_critic_update(actor, critic, batch, learner, state)
        row = {
            "generation": generation,
            "epoch": epoch,
            "role": name,
            "opponent_index": label,
            "mean_reward": stats.mean_reward[name],
            "capture_rate": stats.capture_rate,
            "collisions_ao": stats.collisions["agent_obstacle"],
            "collisions_aa": stats.collisions["agent_agent"],
            "collisions_pe": stats.collisions["pursuer_evader"],
        }
        rows.append(row)
        if on_epoch is not None:
            on_epoch(row, stats)
    return actor, critic, rows


def run_coevolution(
    config: CoevolutionConfig,
    root,
    resume: bool = True,
    on_epoch: EpochCallback | None = None,
) -> CheckpointStore:
    store = CheckpointStore(root)
    store.root.mkdir(parents=True, exist_ok=True)
    meta = store.root / "config.json"
    meta_text = json.dumps(config.as_dict(), sort_keys=True, indent=2) + "\n"
    if resume and meta.is_file() and meta.read_text() != meta_text:
        raise ValueError(f"{root} holds a run with a different configuration")
    meta.write_text(meta_text)

    done = store.generations if resume else -1
    if done < 0:
        for role in ("pursuer", "evader"):
            store.save(0, role, *initial_parameters(config, role))
        done = 0
    scheme = config.scheme
    for k in range(done + 1, config.generations + 1):
        p_actor, p_critic, p_rows = train_single_side(
            config.env, config.learner_for(Role.PURSUER), "pursuer",
            lambda kp: store.policy(pursuer_opponent(scheme, k, kp), "evader"),
            config.pursuer_epochs, config.seed, store.load(k - 1, "pursuer"), generation=k,
            opponent_label=lambda kp: pursuer_opponent(scheme, k, kp), on_epoch=on_epoch,
        )
        store.save(k, "pursuer", p_actor, p_critic)
        e_actor, e_critic, e_rows = train_single_side(
            config.env, config.learner_for(Role.EVADER), "evader",
            lambda ke: store.policy(evader_opponent(scheme, k, ke), "pursuer"),
            config.evader_epochs, config.seed, store.load(k - 1, "evader"), generation=k,
            opponent_label=lambda ke: evader_opponent(scheme, k, ke), on_epoch=on_epoch,
        )
        store.save(k, "evader", e_actor, e_critic)
        store.write_stats(k, p_rows + e_rows)
    return store


def train_baselines(config: CoevolutionConfig, root=None) -> dict[str, tuple[Mlp, Mlp]]:
    """Three reference agents, each trained for one generation's epoch budget.

    baseline1: pursuer vs random evaders. baseline2: evader vs random
    pursuers. baseline3: evader vs baseline1 (a hand-made curriculum).
    All start from the generation-0 parameters of ``config``.
    """
    rand = RandomPolicy()
    p0 = initial_parameters(config, "pursuer")
    e0 = initial_parameters(config, "evader")
    b1a, b1c, r1 = train_single_side(
        config.env, config.learner_for(Role.PURSUER), "pursuer", rand, config.pursuer_epochs,
        derive_seed(config.seed, "baseline1"), p0, opponent_label="random")
    b2a, b2c, r2 = train_single_side(
        config.env, config.learner_for(Role.EVADER), "evader", rand, config.evader_epochs,
        derive_seed(config.seed, "baseline2"), e0, opponent_label="random")
    b3a, b3c, r3 = train_single_side(
        config.env, config.learner_for(Role.EVADER), "evader", MlpPolicy(b1a, b1c), config.evader_epochs,
        derive_seed(config.seed, "baseline3"), e0, opponent_label="baseline1")
    out = {"baseline1": (b1a, b1c), "baseline2": (b2a, b2c), "baseline3": (b3a, b3c)}
    if root is not None:
        root = Path(root)
        for name, (a, c) in out.items():
            save_checkpoint(root / f"{name}.ckpt", a, c)
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=("baseline",) + STATS_COLUMNS, lineterminator="\n")
        w.writeheader()
        for name, rows in (("baseline1", r1), ("baseline2", r2), ("baseline3", r3)):
            for row in rows:
                w.writerow({"baseline": name, **row})
        (root / "stats.csv").write_text(buf.getvalue())
    return out
