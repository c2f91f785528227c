"""Scripted policies and the interface every policy implements.

A policy maps a batch of observations (one row per agent) plus a numpy
``Generator`` to one action per row. Greedy baselines decode the same
egocentric window the learned policies see.
"""
from __future__ import annotations

import math

import numpy as np

from .world import ACTION_DELTAS, N_ACTIONS, Action

# fixed tie-break order for the greedy baselines
TIE_ORDER = (Action.UP, Action.DOWN, Action.LEFT, Action.RIGHT, Action.STAY)


def window_radius(obs_size: int) -> int:
    k = math.isqrt((obs_size - 2) // 3)
    if 3 * k * k + 2 != obs_size or k % 2 == 0:
        raise ValueError(f"observation length {obs_size} is not 3*(2r+1)^2 + 2")
    return (k - 1) // 2


class Policy:
    name = "policy"

    def act_batch(self, obs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    def act(self, obs: np.ndarray, rng: np.random.Generator) -> Action:
        return Action(int(self.act_batch(np.asarray(obs)[None, :], rng)[0]))


class RandomPolicy(Policy):
    name = "random"

    def act_batch(self, obs, rng):
        return rng.integers(0, N_ACTIONS, size=len(obs))


class StayPolicy(Policy):
    name = "stay"

    def act_batch(self, obs, rng):
        return np.zeros(len(obs), dtype=np.int64)


def random_policy(obs, rng) -> Action:
    return RandomPolicy().act(obs, rng)


class _Greedy(Policy):
    """Score every action by distance to the nearest visible opponent.

    Distance is Manhattan with squared Euclidean as a secondary key, so a
    straight retreat beats a sidestep of equal Manhattan length. A move into
    a blocked window cell is scored just behind staying put, so it is never
    picked over Stay.
    """

    maximize = False

    def act_batch(self, obs, rng=None):
        obs = np.asarray(obs)
        n = obs.shape[0]
        r = window_radius(obs.shape[1])
        k = 2 * r + 1
        kk = k * k
        blk = obs[:, :kk].reshape(n, k, k) > 0
        opp = obs[:, 2 * kk: 3 * kk].reshape(n, k, k) > 0
        rows, cols = np.mgrid[-r: r + 1, -r: r + 1]
        scale = 4 * (r + 1) ** 2 + 1  # exceeds any squared distance in reach
        far = np.iinfo(np.int64).max // 4

        def nearest(dr, dc):
            d = (np.abs(rows - dr) + np.abs(cols - dc)) * scale + (rows - dr) ** 2 + (cols - dc) ** 2
            return np.where(opp, d, far).min(axis=(1, 2))

        stay = nearest(0, 0)
        bumped = 2 * stay + (-1 if self.maximize else 1)
        scores = np.empty((n, len(TIE_ORDER)), dtype=np.int64)
        for col, a in enumerate(TIE_ORDER):
            dr, dc = ACTION_DELTAS[a]
            best = 2 * nearest(dr, dc)
            if a != Action.STAY:
                best = np.where(blk[:, r + dr, r + dc], bumped, best)
            scores[:, col] = best
        pick = scores.argmax(axis=1) if self.maximize else scores.argmin(axis=1)
        order = np.array([int(a) for a in TIE_ORDER])
        out = order[pick]
        out[~opp.any(axis=(1, 2))] = int(Action.STAY)
        return out


class GreedyPursuer(_Greedy):
    name = "greedy_pursuer"
    maximize = False


class GreedyEvader(_Greedy):
    name = "greedy_evader"
    maximize = True


def greedy_pursuer(obs, agent_id=None) -> Action:
    return GreedyPursuer().act(obs, None)


def greedy_evader(obs, agent_id=None) -> Action:
    return GreedyEvader().act(obs, None)


SCRIPTED = {
    "random": RandomPolicy,
    "stay": StayPolicy,
    "greedy_pursuer": GreedyPursuer,
    "greedy_evader": GreedyEvader,
}


def make_policy(name: str) -> Policy:
    try:
        return SCRIPTED[name]()
    except KeyError:
        raise ValueError(f"unknown policy {name!r}; choose from {sorted(SCRIPTED)}") from None
