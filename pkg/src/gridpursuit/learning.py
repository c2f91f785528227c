"""Numpy MLP actor-critic with team-level parameter sharing.

Each team trains one policy network and one value network; every agent
runs the shared policy on its own observation. Parameters are float32 for
rollouts and training; the math is dtype-agnostic so gradient checks can
run in float64.
"""
from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .env import EnvConfig
from .policies import Policy
from .rollout import EpisodeResult, Transitions, derive_seed, run_episode
from .world import N_ACTIONS, Role

HIDDEN = (400, 300)
CHECKPOINT_MAGIC = b"GPCK"
CHECKPOINT_VERSION = 1


@dataclass
class Mlp:
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    def copy(self) -> "Mlp":
        return Mlp([w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def astype(self, dtype) -> "Mlp":
        return Mlp([w.astype(dtype) for w in self.weights], [b.astype(dtype) for b in self.biases])

    def params(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def equal(self, other: "Mlp") -> bool:
        return len(self.weights) == len(other.weights) and all(
            np.array_equal(a, b) for a, b in zip(self.params(), other.params())
        )


def init_mlp(sizes, rng: np.random.Generator, out_scale: float = 1.0, dtype=np.float32) -> Mlp:
    weights, biases = [], []
    for i, (fan_in, fan_out) in enumerate(zip(sizes[:-1], sizes[1:])):
        limit = np.sqrt(6.0 / fan_in)  # He-uniform for ReLU layers
        if i == len(sizes) - 2:
            limit *= out_scale
        weights.append(rng.uniform(-limit, limit, size=(fan_in, fan_out)).astype(dtype))
        biases.append(np.zeros(fan_out, dtype=dtype))
    return Mlp(weights, biases)


def init_actor_critic(obs_size: int, rng: np.random.Generator, dtype=np.float32) -> tuple[Mlp, Mlp]:
    actor = init_mlp((obs_size, *HIDDEN, N_ACTIONS), rng, out_scale=0.01, dtype=dtype)
    critic = init_mlp((obs_size, *HIDDEN, 1), rng, out_scale=1.0, dtype=dtype)
    return actor, critic


def mlp_forward(net: Mlp, x: np.ndarray):
    """Returns the output and the per-layer inputs needed for backprop."""
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w + b
        if i < last:
            h = np.maximum(h, 0)
        acts.append(h)
    return h, acts


def mlp_backward(net: Mlp, acts, grad_out: np.ndarray) -> Mlp:
    n_layers = len(net.weights)
    gw = [None] * n_layers
    gb = [None] * n_layers
    g = grad_out
    for i in range(n_layers - 1, -1, -1):
        gw[i] = acts[i].T @ g
        gb[i] = g.sum(axis=0)
        if i > 0:
            g = (g @ net.weights[i].T) * (acts[i] > 0)
    return Mlp(gw, gb)


def _log_softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=-1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=-1, keepdims=True))


def policy_forward(actor: Mlp, obs: np.ndarray) -> np.ndarray:
    """Action probabilities; a 1-D observation gives a 1-D distribution."""
    obs = np.asarray(obs)
    single = obs.ndim == 1
    x = obs[None, :] if single else obs
    if x.shape[1] != actor.weights[0].shape[0]:
        raise ValueError(f"observation width {x.shape[1]} != network input {actor.weights[0].shape[0]}")
    logits, _ = mlp_forward(actor, x.astype(actor.weights[0].dtype, copy=False))
    probs = np.exp(_log_softmax(logits))
    return probs[0] if single else probs


def value_forward(critic: Mlp, obs: np.ndarray):
    obs = np.asarray(obs)
    single = obs.ndim == 1
    x = obs[None, :] if single else obs
    if x.shape[1] != critic.weights[0].shape[0]:
        raise ValueError(f"observation width {x.shape[1]} != network input {critic.weights[0].shape[0]}")
    out, _ = mlp_forward(critic, x.astype(critic.weights[0].dtype, copy=False))
    return out[0, 0] if single else out[:, 0]


def policy_loss_and_grad(actor: Mlp, obs, actions, advantages, entropy_coef: float = 0.0):
    """Loss ``-mean(A * log pi(a|s)) - c * mean(H(pi(.|s)))`` and its gradient."""
    logits, acts = mlp_forward(actor, obs)
    logp = _log_softmax(logits)
    n = obs.shape[0]
    rows = np.arange(n)
    adv = advantages.astype(logits.dtype, copy=False)
    loss = -float(np.mean(adv * logp[rows, actions]))
    probs = np.exp(logp)
    g = probs.copy()
    g[rows, actions] -= 1.0
    g *= (adv / n)[:, None]
    if entropy_coef:
        ent = -(probs * logp).sum(axis=1)
        loss -= entropy_coef * float(ent.mean())
        g += (entropy_coef / n) * probs * (logp + ent[:, None])
    return loss, mlp_backward(actor, acts, g)


def value_loss_and_grad(critic: Mlp, obs, returns):
    """Loss ``0.5 * mean((V(s) - G)^2)`` and its gradient."""
    out, acts = mlp_forward(critic, obs)
    err = out[:, 0] - returns.astype(out.dtype, copy=False)
    loss = 0.5 * float(np.mean(err * err))
    g = (err / obs.shape[0])[:, None]
    return loss, mlp_backward(critic, acts, g)


def _norm(net: Mlp) -> float:
    return float(np.sqrt(sum(float(np.sum(np.square(p, dtype=np.float64))) for p in net.params())))


def _sgd(net: Mlp, grad: Mlp, lr: float) -> Mlp:
    return Mlp(
        [w - lr * g for w, g in zip(net.weights, grad.weights)],
        [b - lr * g for b, g in zip(net.biases, grad.biases)],
    )


class Adam:
    """Adam moments for one network; ``step`` returns updated parameters."""

    def __init__(self, beta1=0.9, beta2=0.999, eps=1e-8):
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.m = None
        self.v = None

    def step(self, net: Mlp, grad: Mlp, lr: float) -> Mlp:
        g = grad.params()
        if self.m is None:
            self.m = [np.zeros_like(p) for p in g]
            self.v = [np.zeros_like(p) for p in g]
        self.t += 1
        c1 = 1 - self.beta1 ** self.t
        c2 = 1 - self.beta2 ** self.t
        out = []
        for p, gi, m, v in zip(net.params(), g, self.m, self.v):
            m *= self.beta1
            m += (1 - self.beta1) * gi
            v *= self.beta2
            v += (1 - self.beta2) * gi * gi
            step = (lr / c1) * m / (np.sqrt(v / c2) + self.eps)
            out.append(p - step.astype(p.dtype, copy=False))
        n = len(net.weights)
        return Mlp(out[:n], out[n:])


@dataclass
class OptimizerState:
    actor: Adam = field(default_factory=Adam)
    critic: Adam = field(default_factory=Adam)


@dataclass(frozen=True)
class LearnerConfig:
    policy_lr: float = 3e-4
    value_lr: float = 1e-3
    actor_updates_per_epoch: int = 5
    critic_updates_per_epoch: int = 1
    gamma: float = 0.99
    episodes_per_epoch: int = 10
    optimizer: str = "sgd"
    normalize_advantages: bool = False
    entropy_coef: float = 0.0

    def __post_init__(self):
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"optimizer must be 'sgd' or 'adam', got {self.optimizer!r}")
        if self.policy_lr <= 0 or self.value_lr <= 0:
            raise ValueError("learning rates must be positive")
        if self.actor_updates_per_epoch < 0 or self.critic_updates_per_epoch < 0:
            raise ValueError("update counts must be >= 0")
        if not 0.0 <= self.gamma <= 1.0:
            raise ValueError("gamma must lie in [0, 1]")
        if self.episodes_per_epoch < 1:
            raise ValueError("episodes_per_epoch must be >= 1")

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class ExperienceBatch:
    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    returns: np.ndarray
    done: np.ndarray
    agent: np.ndarray
    episode: np.ndarray

    def __len__(self) -> int:
        return int(self.actions.shape[0])

    @classmethod
    def empty(cls, obs_size: int) -> "ExperienceBatch":
        return cls(
            obs=np.empty((0, obs_size), np.float32),
            actions=np.empty(0, np.int64),
            rewards=np.empty(0),
            returns=np.empty(0),
            done=np.empty(0, bool),
            agent=np.empty(0, np.int64),
            episode=np.empty(0, np.int64),
        )


def discounted_returns(rewards: np.ndarray, agent: np.ndarray, gamma: float):
    """Per-trajectory Monte-Carlo returns; transitions of one agent are time ordered."""
    returns = np.zeros(len(rewards))
    done = np.zeros(len(rewards), bool)
    nxt: dict[int, float] = {}
    for t in range(len(rewards) - 1, -1, -1):
        a = int(agent[t])
        if a not in nxt:
            done[t] = True
        g = rewards[t] + gamma * nxt.get(a, 0.0)
        returns[t] = g
        nxt[a] = g
    return returns, done


def _to_batch(logs: list[Transitions], obs_size: int, gamma: float) -> ExperienceBatch:
    parts = []
    for ep, tr in enumerate(logs):
        if not tr.actions:
            continue
        rewards = np.asarray(tr.rewards)
        agent = np.asarray(tr.agent, dtype=np.int64)
        returns, done = discounted_returns(rewards, agent, gamma)
        parts.append(ExperienceBatch(
            obs=np.concatenate(tr.obs).astype(np.float32, copy=False),
            actions=np.asarray(tr.actions, dtype=np.int64),
            rewards=rewards,
            returns=returns,
            done=done,
            agent=agent,
            episode=np.full(len(agent), ep, np.int64),
        ))
    if not parts:
        return ExperienceBatch.empty(obs_size)
    return ExperienceBatch(*(np.concatenate([getattr(p, f) for p in parts]) for f in ExperienceBatch.__dataclass_fields__))


@dataclass
class EpisodeStats:
    episodes: int
    capture_rate: float
    steps_used: float
    collisions: dict
    mean_reward: dict
    results: list = field(default_factory=list, repr=False)


def summarize(results: list[EpisodeResult]) -> EpisodeStats:
    n = len(results)
    coll = {"agent_obstacle": 0, "agent_agent": 0, "pursuer_evader": 0}
    for r in results:
        for k, v in r.collisions.items():
            coll[k] += v
    if n == 0:
        return EpisodeStats(0, 0.0, 0.0, coll, {"pursuer": 0.0, "evader": 0.0}, [])
    return EpisodeStats(
        episodes=n,
        capture_rate=float(np.mean([r.capture_rate for r in results])),
        steps_used=float(np.mean([r.steps for r in results])),
        collisions=coll,
        mean_reward={k: float(np.mean([r.team_return[k] for r in results])) for k in ("pursuer", "evader")},
        results=results,
    )


def collect_experiences(
    env_config: EnvConfig,
    pursuer_policy: Policy,
    evader_policy: Policy,
    episodes: int,
    seed: int,
    gamma: float = 0.99,
    record_ticks: bool = False,
):
    """Roll out ``episodes`` seeded episodes; returns (pursuer batch, evader batch, stats)."""
    results = []
    logs_p, logs_e = [], []
    for ep in range(episodes):
        res = run_episode(
            env_config, pursuer_policy, evader_policy, derive_seed(seed, "episode", ep),
            record_transitions=True, record_ticks=record_ticks,
        )
        logs_p.append(res.transitions[Role.PURSUER])
        logs_e.append(res.transitions[Role.EVADER])
        res.transitions = None
        results.append(res)
    d = env_config.obs_size
    return _to_batch(logs_p, d, gamma), _to_batch(logs_e, d, gamma), summarize(results)


def actor_critic_update(
    actor: Mlp, critic: Mlp, batch: ExperienceBatch, config: LearnerConfig,
    state: OptimizerState | None = None,
):
    """Advantage actor-critic step on one batch of Monte-Carlo returns.

    Advantages are fixed from the critic before any update; the policy then
    takes ``actor_updates_per_epoch`` full-batch gradient steps and the
    critic ``critic_updates_per_epoch`` steps. Returns new parameter objects.
    With the Adam optimizer, ``state`` carries the moments across calls and
    is updated in place.
    """
    if len(batch) == 0:
        raise ValueError("cannot update on an empty batch")
    obs = batch.obs.astype(actor.weights[0].dtype, copy=False)
    values = value_forward(critic, obs)
    advantages = batch.returns - values.astype(np.float64)
    diag = {"samples": len(batch), "mean_return": float(batch.returns.mean()),
            "mean_advantage": float(advantages.mean())}
    if config.normalize_advantages and len(batch) > 1:
        advantages = (advantages - advantages.mean()) / (advantages.std() + 1e-8)
    if config.optimizer == "adam":
        if state is None:
            state = OptimizerState()
        step_actor, step_critic = state.actor.step, state.critic.step
    else:
        step_actor = step_critic = _sgd
    policy_losses, policy_norms = [], []
    for _ in range(config.actor_updates_per_epoch):
        loss, grad = policy_loss_and_grad(actor, obs, batch.actions, advantages, config.entropy_coef)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite policy loss {loss}: {diag}")
        policy_losses.append(loss)
        policy_norms.append(_norm(grad))
        actor = step_actor(actor, grad, config.policy_lr)
    value_losses, value_norms = [], []
    for _ in range(config.critic_updates_per_epoch):
        loss, grad = value_loss_and_grad(critic, obs, batch.returns)
        if not np.isfinite(loss):
            raise FloatingPointError(f"non-finite value loss {loss}: {diag}")
        value_losses.append(loss)
        value_norms.append(_norm(grad))
        critic = step_critic(critic, grad, config.value_lr)
    diag.update(policy_loss=policy_losses, policy_grad_norm=policy_norms,
                value_loss=value_losses, value_grad_norm=value_norms)
    return actor, critic, diag


class MlpPolicy(Policy):
    name = "mlp"

    def __init__(self, actor: Mlp, critic: Mlp | None = None):
        self.actor = actor
        self.critic = critic

    def act_batch(self, obs, rng):
        probs = policy_forward(self.actor, obs)
        cdf = np.cumsum(probs, axis=1)
        u = rng.random(len(obs))[:, None] * cdf[:, -1:]
        return np.minimum((u >= cdf).sum(axis=1), N_ACTIONS - 1)


# -- checkpoints -------------------------------------------------------------
# Layout (all little-endian): b"GPCK", u32 version, then for the policy net
# and then the value net: u32 layer count followed by (u32 rows, u32 cols)
# per layer. Payload: per layer, f32 weights row-major then f32 biases;
# policy net layers first, value net layers after.

def _net_header(net: Mlp) -> bytes:
    out = struct.pack("<I", len(net.weights))
    for w in net.weights:
        out += struct.pack("<II", *w.shape)
    return out


def checkpoint_bytes(actor: Mlp, critic: Mlp) -> bytes:
    chunks = [CHECKPOINT_MAGIC, struct.pack("<I", CHECKPOINT_VERSION), _net_header(actor), _net_header(critic)]
    for net in (actor, critic):
        for w, b in zip(net.weights, net.biases):
            chunks.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
            chunks.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    return b"".join(chunks)


def save_checkpoint(path, actor: Mlp, critic: Mlp) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(checkpoint_bytes(actor, critic))
    tmp.replace(path)


class CheckpointError(ValueError):
    pass


def load_checkpoint(path) -> tuple[Mlp, Mlp]:
    data = Path(path).read_bytes()
    if data[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    (version,) = struct.unpack_from("<I", data, 4)
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported version {version}")
    try:
        return _parse_checkpoint(data, path)
    except (struct.error, ValueError) as exc:
        if isinstance(exc, CheckpointError):
            raise
        raise CheckpointError(f"{path}: truncated or corrupt ({exc})") from None


def _parse_checkpoint(data: bytes, path) -> tuple[Mlp, Mlp]:
    off = 8
    shapes = []
    for _ in range(2):
        (n_layers,) = struct.unpack_from("<I", data, off)
        off += 4
        layer_shapes = []
        for _ in range(n_layers):
            layer_shapes.append(struct.unpack_from("<II", data, off))
            off += 8
        shapes.append(layer_shapes)
    nets = []
    for layer_shapes in shapes:
        ws, bs = [], []
        for rows, cols in layer_shapes:
            n = rows * cols
            ws.append(np.frombuffer(data, "<f4", n, off).reshape(rows, cols).astype(np.float32))
            off += 4 * n
            bs.append(np.frombuffer(data, "<f4", cols, off).astype(np.float32))
            off += 4 * cols
        nets.append(Mlp(ws, bs))
    if off != len(data):
        raise CheckpointError(f"{path}: {len(data) - off} trailing bytes")
    return nets[0], nets[1]
