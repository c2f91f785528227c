"""Capture-rate evaluation, cross-generation tournaments and generalization scores."""
from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .coevolution import CheckpointStore, MissingCheckpointError, _role_name
from .env import EnvConfig
from .learning import EpisodeStats, Mlp, MlpPolicy, load_checkpoint, summarize
from .policies import Policy
from .rollout import derive_seed, run_episode

CAPTURE_METRICS = ("per_evader", "per_episode")


def evaluate(
    pursuer_policy: Policy,
    evader_policy: Policy,
    env_config: EnvConfig,
    episodes: int,
    seed: int,
    capture_metric: str = "per_evader",
) -> EpisodeStats:
    """Aggregate stats over ``episodes`` seeded episodes.

    ``per_evader`` capture rate is captured / initial evaders averaged over
    episodes; ``per_episode`` is the fraction of episodes ending with every
    evader captured.
    """
    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    if capture_metric not in CAPTURE_METRICS:
        raise ValueError(f"capture_metric must be one of {CAPTURE_METRICS}")
    env_config.validate()
    results = [
        run_episode(env_config, pursuer_policy, evader_policy, derive_seed(seed, "eval", i))
        for i in range(episodes)
    ]
    stats = summarize(results)
    if capture_metric == "per_episode":
        stats.capture_rate = float(np.mean([r.captured == r.initial_evaders for r in results]))
    return stats


def cell_seed(seed: int, pursuer_gen: int, evader_gen: int) -> int:
    return derive_seed(seed, "cell", pursuer_gen, evader_gen)


@dataclass
class TournamentMatrix:
    """``rates[i, j]``: pursuer generation i vs evader generation j."""

    rates: np.ndarray
    episodes_per_cell: int
    seed: int

    @property
    def size(self) -> int:
        return self.rates.shape[0]

    def pursuer_scores(self) -> np.ndarray:
        return self.rates.mean(axis=1)

    def evader_scores(self) -> np.ndarray:
        return 1.0 - self.rates.mean(axis=0)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["pursuer_generation"] + [f"E{j}" for j in range(self.size)])
        for i, row in enumerate(self.rates.tolist()):
            w.writerow([f"P{i}"] + [repr(v) for v in row])
        return buf.getvalue()


def _cell(root, i: int, j: int, env_config: EnvConfig, episodes: int, seed: int) -> float:
    store = CheckpointStore(root)
    stats = evaluate(store.policy(i, "pursuer"), store.policy(j, "evader"), env_config, episodes, cell_seed(seed, i, j))
    return stats.capture_rate


def tournament(
    store: CheckpointStore, env_config: EnvConfig, episodes_per_cell: int, seed: int, workers: int = 1,
) -> TournamentMatrix:
    """Every pursuer generation against every evader generation.

    Each cell has its own seed, so ``workers > 1`` (process pool) yields the
    same matrix as a serial run.
    """
    n = store.generations
    if n < 0:
        raise MissingCheckpointError(f"no complete generations in {store.root}")
    cells = [(i, j) for i in range(n + 1) for j in range(n + 1)]
    rates = np.zeros((n + 1, n + 1))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(_cell, store.root, i, j, env_config, episodes_per_cell, seed): (i, j)
                       for i, j in cells}
            for fut, (i, j) in futures.items():
                rates[i, j] = fut.result()
    else:
        for i, j in cells:
            rates[i, j] = evaluate(store.policy(i, "pursuer"), store.policy(j, "evader"), env_config,
                                   episodes_per_cell, cell_seed(seed, i, j)).capture_rate
    return TournamentMatrix(rates, episodes_per_cell, seed)


def _as_policy(agent) -> Policy:
    if isinstance(agent, Policy):
        return agent
    if isinstance(agent, Mlp):
        return MlpPolicy(agent)
    if isinstance(agent, tuple):
        return MlpPolicy(*agent)
    return MlpPolicy(*load_checkpoint(agent))


def generalization_score(
    agent,
    role,
    opposing_store: CheckpointStore,
    env_config: EnvConfig,
    episodes: int,
    seed: int,
    agent_generation: int | None = None,
) -> float:
    """Mean performance of one agent against every opposing generation.

    Pursuers score their capture rate, evaders ``1 - capture rate``. By
    default every opponent is played on the same episode seeds (common
    random numbers). Passing ``agent_generation`` instead reuses the
    tournament's per-cell seeds, so the score matches the agent's row
    (pursuer) or column (evader) mean exactly.
    """
    name = _role_name(role)
    n = opposing_store.generations
    if n < 0:
        raise MissingCheckpointError(f"opposing store {opposing_store.root} is empty")
    policy = _as_policy(agent)
    other = "evader" if name == "pursuer" else "pursuer"
    scores = []
    for j in range(n + 1):
        opp = opposing_store.policy(j, other)
        if agent_generation is None:
            s = derive_seed(seed, "generalization", name)
        elif name == "pursuer":
            s = cell_seed(seed, agent_generation, j)
        else:
            s = cell_seed(seed, j, agent_generation)
        pp, ep = (policy, opp) if name == "pursuer" else (opp, policy)
        rate = evaluate(pp, ep, env_config, episodes, s).capture_rate
        scores.append(rate if name == "pursuer" else 1.0 - rate)
    return float(np.mean(scores))
