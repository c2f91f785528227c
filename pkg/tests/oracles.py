"""Slow, obviously-correct reference implementations used only by tests."""
from __future__ import annotations

from fractions import Fraction
from itertools import combinations

import numpy as np

from gridpursuit.collision import Outcome
from gridpursuit.world import ACTION_DELTAS, Role, WorldState

B, R, D = Outcome.B, Outcome.R, Outcome.D


def _pair(matrix, role_a, role_b):
    if role_a == role_b:
        return matrix.agent_agent
    if role_a == Role.PURSUER:
        return matrix.pursuer_vs_evader
    return matrix.evader_vs_pursuer


def subset_oracle(world: WorldState, actions, matrix, block_opponent_cells=False):
    """Moved and removed sets by exhaustive enumeration of vacating subsets.

    A subset S of the eligible movers is consistent when every member's
    target holds no agent outside S that it may not share a cell with.
    The answer is the largest consistent S, which must contain every other
    consistent subset.
    """
    n = world.n_agents
    roles = [int(x) for x in world.roles]
    part = [i for i in range(n) if world.alive[i] and not world.captured[i]]
    frozen_cells = {tuple(world.positions[i]) for i in range(n) if world.alive[i] and world.captured[i]}
    pos = {i: tuple(int(v) for v in world.positions[i]) for i in range(n)}
    tgt = {i: (pos[i][0] + int(ACTION_DELTAS[actions[i]][0]), pos[i][1] + int(ACTION_DELTAS[actions[i]][1]))
           for i in part}

    def eff(i, k):
        if block_opponent_cells and roles[i] != roles[k]:
            return B
        return _pair(matrix, roles[i], roles[k])

    blocked, dying, live = set(), set(), []
    for i in part:
        t = tgt[i]
        if t == pos[i]:
            continue
        off = not (0 <= t[0] < world.height and 0 <= t[1] < world.width)
        if off or world.obstacles[t]:
            (dying if matrix.agent_obstacle == D else blocked).add(i)
        elif t in frozen_cells:
            blocked.add(i)
        else:
            live.append(i)

    def apply(i, o):
        if o == B:
            blocked.add(i)
        elif o == D:
            dying.add(i)

    for i, j in combinations(live, 2):
        contest = tgt[i] == tgt[j]
        swap = tgt[i] == pos[j] and tgt[j] == pos[i]
        if contest or swap:
            apply(i, _pair(matrix, roles[i], roles[j]))
            apply(j, _pair(matrix, roles[j], roles[i]))

    eligible = [i for i in live if i not in blocked and i not in dying]

    def consistent(s):
        return all(
            eff(i, k) == R
            for i in s for k in part
            if k not in s and k != i and pos[k] == tgt[i]
        )

    good = [frozenset(c) for size in range(len(eligible) + 1)
            for c in combinations(eligible, size) if consistent(frozenset(c))]
    best = max(good, key=len)
    assert all(g <= best for g in good), "consistent subsets are not union-closed"

    def occupants(i):
        return [k for k in part if k != i and k not in best and pos[k] == tgt[i]]

    for i in eligible:
        if i in best:
            continue
        outs = {eff(i, k) for k in occupants(i)}
        assert outs - {R}, "an agent was left out without justification"
        apply(i, B if B in outs else D)

    for i in live:
        if i in blocked:
            continue
        for k in occupants(i):
            swap_partner = k in live and tgt[k] == pos[i]
            if not swap_partner and _pair(matrix, roles[k], roles[i]) == D:
                dying.add(k)
    return set(best), dying


def observe_oracle(world: WorldState, agent: int, r: int) -> np.ndarray:
    """Cell-by-cell observation window."""
    k = 2 * r + 1
    blk = np.zeros((k, k))
    mates = np.zeros((k, k))
    opps = np.zeros((k, k))
    r0, c0 = (int(v) for v in world.positions[agent])
    me = int(world.roles[agent])
    for a in range(k):
        for b in range(k):
            rr, cc = r0 + a - r, c0 + b - r
            if not (0 <= rr < world.height and 0 <= cc < world.width):
                blk[a, b] = 1
                continue
            if world.obstacles[rr, cc]:
                blk[a, b] = 1
            for j in range(world.n_agents):
                if tuple(world.positions[j]) != (rr, cc) or not world.alive[j]:
                    continue
                if world.captured[j]:
                    blk[a, b] = 1
                elif j != agent and int(world.roles[j]) == me:
                    mates[a, b] = 1
                elif int(world.roles[j]) != me:
                    opps[a, b] = 1
    tail = [r0 / (world.height - 1) if world.height > 1 else 0.0,
            c0 / (world.width - 1) if world.width > 1 else 0.0]
    return np.concatenate([blk.ravel(), mates.ravel(), opps.ravel(), tail]).astype(np.float32)


def exact_sum(*terms) -> Fraction:
    """Exact decimal sum of reward-table entries."""
    return sum((Fraction(str(t)) for t in terms), Fraction(0))


def finite_difference(loss_fn, params: list[np.ndarray], eps=1e-6):
    """Central differences of ``loss_fn()`` w.r.t. every entry of ``params``."""
    grads = []
    for p in params:
        g = np.zeros_like(p)
        it = np.nditer(p, flags=["multi_index"])
        for _ in it:
            idx = it.multi_index
            old = p[idx]
            p[idx] = old + eps
            up = loss_fn()
            p[idx] = old - eps
            down = loss_fn()
            p[idx] = old
            g[idx] = (up - down) / (2 * eps)
        grads.append(g)
    return grads


def capture_rate_oracle(results) -> float:
    return float(np.mean([r.captured / r.initial_evaders for r in results]))


def random_instance(rng: np.random.Generator, spec, max_side=5, max_agents=5, overlap=None):
    """Small random world plus one action per agent.

    Start positions may overlap when the variant allows co-occupancy (or
    when ``overlap`` forces it). Surrounding variants that keep captured
    bodies get some frozen evaders on cells of their own.
    """
    h, w = (int(v) for v in rng.integers(1, max_side + 1, 2))
    cells = h * w
    n = int(rng.integers(1, min(max_agents, cells) + 1))
    pairs = (spec.matrix.agent_agent, spec.matrix.pursuer_vs_evader, spec.matrix.evader_vs_pursuer)
    if overlap is None:
        overlap = R in pairs and not spec.block_opponent_cells and rng.random() < 0.5
    if overlap:
        flat = rng.integers(0, cells, n)
    else:
        flat = rng.permutation(cells)[:n]
    n_p = int(rng.integers(0, n + 1))
    roles = np.array([Role.PURSUER] * n_p + [Role.EVADER] * (n - n_p), dtype=np.int8)
    alive = rng.random(n) > 0.1
    captured = np.zeros(n, bool)
    if spec.capture_mode.surrounding and not spec.capture_removes_evader:
        for i in range(n_p, n):
            if rng.random() < 0.3 and list(flat).count(flat[i]) == 1:
                captured[i] = True
                alive[i] = True
    free = [c for c in range(cells) if c not in set(flat.tolist())]
    obstacles = np.zeros((h, w), bool)
    if free:
        k = int(rng.integers(0, len(free) + 1)) // 2
        for c in rng.permutation(free)[:k]:
            obstacles[c // w, c % w] = True
    world = WorldState(
        width=w, height=h, obstacles=obstacles,
        positions=np.stack([flat // w, flat % w], axis=1).astype(np.int64),
        roles=roles, alive=alive, captured=captured,
    )
    actions = rng.integers(0, 5, n)
    return world, actions
