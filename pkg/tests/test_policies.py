import numpy as np
import pytest

from gridpursuit.env import PursuitEvasionEnv, EnvConfig, observe
from gridpursuit.policies import (
    GreedyEvader, GreedyPursuer, RandomPolicy, make_policy, greedy_evader,
    greedy_pursuer, random_policy, window_radius,
)
from gridpursuit.world import Action

from scenario import make_world

C = (6, 6)


def view(pursuers=(), evaders=(), me=0, r=3, obstacles=()):
    w = make_world(13, 13, pursuers=pursuers, evaders=evaders, obstacles=obstacles)
    return observe(w, me, r)


def test_uniform_frequencies():
    rng = np.random.default_rng(12345)
    draws = RandomPolicy().act_batch(np.zeros((10**6, 29), np.float32), rng)
    freq = np.bincount(draws, minlength=5) / draws.size
    assert freq.shape == (5,)
    assert np.all((freq >= 0.198) & (freq <= 0.202))


def test_random_is_deterministic_and_legal():
    obs = np.zeros(29, np.float32)
    a = [random_policy(obs, np.random.default_rng(5)) for _ in range(3)]
    assert a[0] == a[1] == a[2]
    rng = np.random.default_rng(0)
    assert {random_policy(obs, rng) for _ in range(200)} <= set(Action)


def test_window_radius():
    assert window_radius(365) == 5 and window_radius(5) == 0
    with pytest.raises(ValueError):
        window_radius(100)


def test_greedy_pursuer_examples():
    assert greedy_pursuer(view(pursuers=[C], evaders=[(6, 9)])) == Action.RIGHT
    assert greedy_pursuer(view(pursuers=[C], evaders=[(4, 6), (6, 4)])) == Action.UP
    assert greedy_pursuer(view(pursuers=[C], evaders=[(0, 0)], r=2)) == Action.STAY


def test_greedy_evader_examples():
    assert greedy_evader(view(pursuers=[(6, 5)], evaders=[C], me=1)) == Action.RIGHT
    assert greedy_evader(view(pursuers=[(6, 4), (6, 8)], evaders=[C], me=2)) == Action.UP
    assert greedy_evader(view(pursuers=[(0, 0)], evaders=[C], me=1, r=2)) == Action.STAY


def test_greedy_never_walks_into_a_wall():
    # closing move is walled off: sidesteps are worse, so the pursuer waits
    assert greedy_pursuer(view(pursuers=[C], evaders=[(6, 8)], obstacles=[(6, 7)])) == Action.STAY
    # cornered evader: the one open cell is a retreat
    cornered = view(pursuers=[(6, 7)], evaders=[C], obstacles=[(5, 6), (7, 6)], me=1)
    assert greedy_evader(cornered) == Action.LEFT
    boxed = view(pursuers=[(6, 7)], evaders=[C], obstacles=[(5, 6), (7, 6), (6, 5)], me=1)
    assert greedy_evader(boxed) == Action.STAY


def test_greedy_pursuer_closes_in_on_an_open_line():
    w = make_world(1, 12, pursuers=[(0, 0)], evaders=[(0, 11)])
    env = PursuitEvasionEnv(EnvConfig(task="-O", width=12, height=1, pursuers=1, evaders=1, fov=11))
    env.reset_to(w)
    dist = 11
    while not env.done:
        a = greedy_pursuer(env.observe(0))
        env.step_simultaneous({0: a, 1: Action.STAY})
        new = int(abs(env.world.positions[1, 1] - env.world.positions[0, 1]))
        assert new < dist or env.done
        dist = new


def test_batch_matches_single_calls():
    rng = np.random.default_rng(2)
    from gridpursuit.world import new_world
    from gridpursuit.env import observe_many
    w = new_world(15, 15, (), 6, 10, 3)
    obs = observe_many(w, w.active_ids(), 4)
    for cls in (GreedyPursuer, GreedyEvader):
        batch = cls().act_batch(obs, rng)
        assert batch.tolist() == [int(cls().act(o, rng)) for o in obs]


def test_make_policy():
    assert make_policy("greedy_evader").name == "greedy_evader"
    with pytest.raises(ValueError):
        make_policy("smart")
