"""Compare the numba and pure-numpy/Python routes of the hot kernels.

Run: python3 benchmarks/bench_kernels.py [--repeats 200] [--steps 300]

Three measurements:
  resolve   collision fixed point, compiled vs its Python source
  observe   observation windows, compiled loops vs the sliding-window numpy path
  env step  whole simultaneous step, in two subprocesses with and without
            GRIDPURSUIT_NO_JIT=1
Outputs of the two routes are checked for equality before timing.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np

from gridpursuit import kernels
from gridpursuit.collision import cell_block_grid
from gridpursuit.env import EnvConfig, _occupancy
from gridpursuit.tasks import task_spec
from gridpursuit.world import ACTION_DELTAS, new_world


def both_routes(func):
    compiled = getattr(func, "compiled", func)
    return compiled, func.py_func


def resolve_inputs(rng, size=40, pursuers=8, evaders=30, task="-O"):
    spec = task_spec(task)
    world = new_world(size, size, (), pursuers, evaders, int(rng.integers(1 << 31)))
    actions = rng.integers(0, 5, world.n_agents)
    return (
        world.positions, world.positions + ACTION_DELTAS[actions], world.roles.astype(np.int64),
        world.active, cell_block_grid(world), int(spec.matrix.agent_obstacle),
        spec.matrix.pair_table(), bool(spec.block_opponent_cells),
    )


def timeit(fn, cases, repeats):
    best = float("inf")
    for _ in range(3):
        t0 = time.perf_counter()
        for _ in range(repeats):
            for args in cases:
                fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best / (repeats * len(cases)) * 1e6


def bench_resolve(repeats):
    rng = np.random.default_rng(0)
    cases = [resolve_inputs(rng, task=t) for t in ("-O", "-B", "-S", "-D") for _ in range(5)]
    fast, slow = both_routes(kernels.resolve_core)
    for args in cases:
        a, b = fast(*args), slow(*args)
        assert all(np.array_equal(x, y) for x, y in zip(a, b)), "routes disagree"
    return timeit(fast, cases, repeats), timeit(slow, cases, max(1, repeats // 10))


def bench_observe(repeats, r=5):
    world = new_world(40, 40, (), 8, 30, 1)
    blockers, pcount, ecount = _occupancy(world)
    args = (blockers, pcount, ecount, world.positions, world.roles.astype(np.int64), r)
    fast = getattr(kernels.observe_loops, "compiled", kernels.observe_loops)
    a, b = fast(*args), kernels.observe_numpy(*args)
    assert np.array_equal(a, b), "routes disagree"
    return timeit(fast, [args], repeats), timeit(kernels.observe_numpy, [args], repeats)


_STEP_SCRIPT = """
import time, numpy as np
from gridpursuit.env import EnvConfig, PursuitEvasionEnv
env = PursuitEvasionEnv(EnvConfig(task="-O", width=40, height=40, pursuers=8, evaders=30, max_steps=10**6))
env.reset(0)
rng = np.random.default_rng(0)
def go(n):
    for _ in range(n):
        ids = env.world.active_ids()
        env.step_simultaneous(dict(zip(ids.tolist(), rng.integers(0, 5, ids.size).tolist())))
go(5)
t0 = time.perf_counter(); go({steps}); print((time.perf_counter() - t0) / {steps} * 1e6)
"""


def bench_env_step(steps):
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, GRIDPURSUIT_NO_JIT=flag)
        res = subprocess.run([sys.executable, "-c", _STEP_SCRIPT.format(steps=steps)],
                             env=env, capture_output=True, text=True, check=True)
        out[label] = float(res.stdout.strip().splitlines()[-1])
    return out["numba"], out["numpy"]


def main():
    p = argparse.ArgumentParser()
    p.add_argument("--repeats", type=int, default=200)
    p.add_argument("--steps", type=int, default=300)
    args = p.parse_args()
    EnvConfig()  # fail early on a broken install
    rows = [
        ("resolve (40x40, 38 agents)", *bench_resolve(args.repeats)),
        ("observe (38 windows, r=5)", *bench_observe(args.repeats)),
        ("env step (40x40, 8v30)", *bench_env_step(args.steps)),
    ]
    print(f"{'kernel':<30}{'numba us':>12}{'fallback us':>14}{'speedup':>10}")
    for name, fast, slow in rows:
        print(f"{name:<30}{fast:>12.1f}{slow:>14.1f}{slow / fast:>9.1f}x")


if __name__ == "__main__":
    main()
