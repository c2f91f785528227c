import hashlib

import numpy as np
import pytest

from gridpursuit.coevolution import (
    STATS_COLUMNS, CheckpointStore, CoevolutionConfig, MissingCheckpointError,
    evader_opponent, initial_parameters, opponent_index_gen2, opponent_index_gen3_evader,
    pursuer_opponent, run_coevolution, train_baselines, train_single_side,
)
from gridpursuit.env import EnvConfig
from gridpursuit.learning import LearnerConfig, MlpPolicy, checkpoint_bytes, policy_forward
from gridpursuit.policies import RandomPolicy
from gridpursuit.rollout import derive_seed

TINY_ENV = EnvConfig(task="-O", width=5, height=5, pursuers=1, evaders=2, fov=1, max_steps=6)
TINY_LEARNER = LearnerConfig(episodes_per_epoch=2)


def tiny(**kw):
    base = dict(env=TINY_ENV, learner=TINY_LEARNER, generations=2, pursuer_epochs=3, evader_epochs=3, seed=5)
    base.update(kw)
    return CoevolutionConfig(**base)


def digest(store, k, role):
    return hashlib.sha256(store.path(k, role).read_bytes()).hexdigest()


def test_gen2_examples():
    assert opponent_index_gen2(3, 5) == 2
    assert [opponent_index_gen2(1, kp) for kp in range(1, 9)] == [0] * 8
    assert opponent_index_gen2(4, 400) == 0


def test_gen3_examples():
    assert opponent_index_gen3_evader(2, 5) == 2
    assert opponent_index_gen3_evader(1, 4) == 0
    assert opponent_index_gen3_evader(3, 7) == 3


def test_schedules_reject_generation_zero():
    with pytest.raises(ValueError):
        opponent_index_gen2(0, 1)
    with pytest.raises(ValueError):
        opponent_index_gen3_evader(0, 1)


def test_scheme_dispatch():
    assert [pursuer_opponent("spec_spec", 3, kp) for kp in (1, 2, 3)] == [2, 2, 2]
    assert [pursuer_opponent("gen_spec", 2, kp) for kp in (1, 2, 3, 4)] == [1, 0, 1, 0]
    assert [evader_opponent("gen_spec", 2, ke) for ke in (1, 2, 3)] == [2, 2, 2]
    assert [evader_opponent("gen_gen", 2, ke) for ke in (1, 2, 3, 4)] == [1, 2, 0, 1]


@pytest.mark.parametrize("field", ["generations", "pursuer_epochs", "evader_epochs"])
def test_zero_budgets_rejected(field):
    with pytest.raises(ValueError):
        tiny(**{field: 0})


def test_unknown_scheme_rejected():
    with pytest.raises(ValueError):
        tiny(scheme="league")


def test_spec_spec_single_generation(tmp_path):
    store = run_coevolution(tiny(generations=1), tmp_path)
    rows = store.read_stats()
    assert {r["opponent_index"] for r in rows if r["role"] == "pursuer"} == {0}
    assert {r["opponent_index"] for r in rows if r["role"] == "evader"} == {1}
    assert [r["epoch"] for r in rows] == [1, 2, 3, 1, 2, 3]


def test_gen_spec_alternates_in_generation_two(tmp_path):
    store = run_coevolution(tiny(scheme="gen_spec", pursuer_epochs=4), tmp_path)
    rows = [r for r in store.read_stats(2) if r["role"] == "pursuer"]
    assert [r["opponent_index"] for r in rows] == [1, 0, 1, 0]


def test_store_integrity_and_reload(tmp_path):
    cfg = tiny()
    store = run_coevolution(cfg, tmp_path)
    assert store.generations == 2
    ckpts = sorted(p.relative_to(tmp_path).as_posix() for p in tmp_path.rglob("*.ckpt"))
    assert ckpts == [f"gen_{k:03d}/{r}.ckpt" for k in range(3) for r in ("evader", "pursuer")]
    with open(store.gen_dir(1) / "stats.csv") as f:
        assert f.readline().strip().split(",") == list(STATS_COLUMNS)
    obs = np.random.default_rng(0).random((4, TINY_ENV.obs_size))
    for k in range(3):
        actor, critic = store.load(k, "pursuer")
        fresh = CheckpointStore(tmp_path).load(k, "pursuer")
        assert np.array_equal(policy_forward(actor, obs), policy_forward(fresh[0], obs))
    a0, c0 = initial_parameters(cfg, "pursuer")
    assert checkpoint_bytes(a0, c0) == store.path(0, "pursuer").read_bytes()


def test_missing_checkpoint(tmp_path):
    store = CheckpointStore(tmp_path)
    assert store.generations == -1
    with pytest.raises(MissingCheckpointError):
        store.load(0, "pursuer")


def test_resume_matches_uninterrupted_run(tmp_path):
    full = run_coevolution(tiny(generations=3), tmp_path / "full")
    part = run_coevolution(tiny(generations=1), tmp_path / "part")
    # an interrupted run: generation 1 complete, generation 2 half written
    (part.root / "config.json").unlink()
    part.gen_dir(2).mkdir()
    (part.gen_dir(2) / "pursuer.ckpt").write_bytes(b"partial")
    resumed = run_coevolution(tiny(generations=3), tmp_path / "part")
    for k in range(4):
        for role in ("pursuer", "evader"):
            assert digest(full, k, role) == digest(resumed, k, role)
        if k:
            assert (full.gen_dir(k) / "stats.csv").read_bytes() == (resumed.gen_dir(k) / "stats.csv").read_bytes()


def test_resume_refuses_a_different_config(tmp_path):
    run_coevolution(tiny(generations=1), tmp_path)
    with pytest.raises(ValueError):
        run_coevolution(tiny(generations=1, seed=6), tmp_path)


def test_opponent_is_frozen_during_training():
    cfg = tiny()
    opp = MlpPolicy(*initial_parameters(cfg, "evader"))
    before = checkpoint_bytes(opp.actor, opp.critic)
    seen = []
    actor, critic, rows = train_single_side(
        TINY_ENV, TINY_LEARNER, "pursuer", opp, 3, 1, initial_parameters(cfg, "pursuer"),
        on_epoch=lambda row, stats: seen.append(checkpoint_bytes(opp.actor, opp.critic)),
    )
    assert all(s == before for s in seen)
    assert not actor.equal(initial_parameters(cfg, "pursuer")[0])


def test_alternation_within_a_generation(tmp_path):
    # evader checkpoint of k-1 is untouched while pursuers of k train, and vice versa
    hashes = {}

    def snap(row, stats):
        store = CheckpointStore(tmp_path)
        k = row["generation"]
        frozen = ("evader", k - 1) if row["role"] == "pursuer" else ("pursuer", k)
        hashes.setdefault(frozen, set()).add(digest(store, frozen[1], frozen[0]))

    run_coevolution(tiny(), tmp_path, on_epoch=snap)
    assert all(len(v) == 1 for v in hashes.values())


def test_zero_epochs_returns_initial_parameters():
    init = initial_parameters(tiny(), "pursuer")
    actor, critic, rows = train_single_side(TINY_ENV, TINY_LEARNER, "pursuer", RandomPolicy(), 0, 1, init)
    assert actor.equal(init[0]) and critic.equal(init[1]) and rows == []


def test_baselines(tmp_path):
    cfg = tiny(pursuer_epochs=2, evader_epochs=2)
    out = train_baselines(cfg, tmp_path)
    assert sorted(out) == ["baseline1", "baseline2", "baseline3"]
    text = (tmp_path / "stats.csv").read_text().splitlines()
    b3 = [line for line in text[1:] if line.startswith("baseline3")]
    assert len(b3) == 2 and all(",baseline1," in line for line in b3)
    assert sum(line.startswith("baseline1") for line in text) == 2
    # baseline3 faced exactly baseline1's final parameters
    replay = train_single_side(cfg.env, cfg.learner, "evader", MlpPolicy(*out["baseline1"]), 2,
                               derive_seed(cfg.seed, "baseline3"),
                               initial_parameters(cfg, "evader"))
    assert replay[0].equal(out["baseline3"][0])


def test_run_is_deterministic(tmp_path):
    a = run_coevolution(tiny(scheme="gen_gen"), tmp_path / "a")
    b = run_coevolution(tiny(scheme="gen_gen"), tmp_path / "b")
    for k in range(3):
        for role in ("pursuer", "evader"):
            assert digest(a, k, role) == digest(b, k, role)
