"""Softmax-linear actor-critic students, GAE, regret estimators and snapshots.

A policy is a pair of linear maps over observation features: the actor
produces action logits ``W @ x`` and the critic a scalar value ``c @ x``.
The same representation drives the maze student and the level generator
(which additionally masks invalid actions).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.signal import lfilter

from .core import (
    ConfigurationError,
    NumericalError,
    ParseError,
    PreconditionError,
    Trajectory,
    discounted_return,
)

POLICY_FORMAT_VERSION = 1


@dataclass
class PolicyParams:
    actor_weights: np.ndarray
    critic_weights: np.ndarray
    version: int = 0

    def __post_init__(self):
        self.actor_weights = np.asarray(self.actor_weights, dtype=np.float64)
        self.critic_weights = np.asarray(self.critic_weights, dtype=np.float64).reshape(-1)
        if self.actor_weights.ndim != 2 or self.actor_weights.shape[1] != self.critic_weights.shape[0]:
            raise ConfigurationError(
                f"actor {self.actor_weights.shape} and critic {self.critic_weights.shape} disagree on d")
        if not (np.all(np.isfinite(self.actor_weights)) and np.all(np.isfinite(self.critic_weights))):
            raise NumericalError("policy weights must be finite")

    @classmethod
    def zeros(cls, num_actions: int, obs_dim: int) -> "PolicyParams":
        return cls(np.zeros((num_actions, obs_dim)), np.zeros(obs_dim), 0)

    @property
    def num_actions(self) -> int:
        return self.actor_weights.shape[0]

    @property
    def obs_dim(self) -> int:
        return self.actor_weights.shape[1]

    def copy(self) -> "PolicyParams":
        return PolicyParams(self.actor_weights.copy(), self.critic_weights.copy(), self.version)


@dataclass
class AgentPair:
    """Alice is trained; Bob is a frozen snapshot of an earlier Alice."""

    alice: PolicyParams
    bob: PolicyParams

    @classmethod
    def fresh(cls, num_actions: int, obs_dim: int) -> "AgentPair":
        alice = PolicyParams.zeros(num_actions, obs_dim)
        return cls(alice, alice.copy())


def sync_bob(pair: AgentPair) -> AgentPair:
    return AgentPair(pair.alice, pair.alice.copy())


@dataclass(frozen=True)
class GaeConfig:
    gamma: float = 0.995
    lam: float = 0.95

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ConfigurationError(f"gamma must lie in (0, 1], got {self.gamma}")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1], got {self.lam}")


@dataclass(frozen=True)
class TrainConfig:
    gae: GaeConfig = field(default_factory=GaeConfig)
    actor_lr: float = 0.5
    critic_lr: float = 0.01
    entropy_coef: float = 0.01
    # None -> plain advantage actor-critic; a float enables the clipped-ratio surrogate
    clip_ratio: float | None = None
    epochs: int = 1
    normalize_advantages: bool = False


# ---------------------------------------------------------------------------
# policy evaluation

def _check_dims(weights: np.ndarray, obs: np.ndarray):
    if obs.shape[-1] != weights.shape[1]:
        raise ConfigurationError(
            f"observation has {obs.shape[-1]} features, policy expects {weights.shape[1]}")


def masked_softmax(logits: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    z = np.array(logits, dtype=np.float64)
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def action_probs(weights: np.ndarray, obs: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    obs = np.asarray(obs, dtype=np.float64)
    _check_dims(weights, obs)
    return masked_softmax(obs @ weights.T, mask)


def log_prob(weights: np.ndarray, obs: np.ndarray, action: int, mask: np.ndarray | None = None) -> float:
    z = np.asarray(obs, dtype=np.float64) @ weights.T
    if mask is not None:
        z = np.where(mask, z, -np.inf)
    m = z.max()
    return float(z[action] - m - np.log(np.exp(z - m).sum()))


def grad_log_prob(weights: np.ndarray, obs: np.ndarray, action: int,
                  mask: np.ndarray | None = None) -> np.ndarray:
    """Gradient of ``log pi(action | obs)`` with respect to the actor weights."""
    obs = np.asarray(obs, dtype=np.float64)
    p = action_probs(weights, obs, mask)
    p[action] -= 1.0
    return -np.outer(p, obs)


def sample_categorical(p: np.ndarray, rng: np.random.Generator) -> int:
    u = rng.random()
    a = int(np.searchsorted(np.cumsum(p), u, side="right"))
    return min(a, len(p) - 1)


def act(params: PolicyParams, obs: np.ndarray, rng: np.random.Generator,
        mask: np.ndarray | None = None) -> tuple[int, float]:
    p = action_probs(params.actor_weights, obs, mask)
    a = sample_categorical(p, rng)
    return a, float(np.log(p[a]))


def greedy_action(params: PolicyParams, obs: np.ndarray, rng: np.random.Generator | None = None) -> int:
    """Argmax action; exact ties are broken uniformly with ``rng`` (lowest index without one)."""
    z = params.actor_weights @ np.asarray(obs, dtype=np.float64)
    best = np.flatnonzero(z == z.max())
    if len(best) == 1 or rng is None:
        return int(best[0])
    return int(best[rng.integers(len(best))])


def rollout(env, params: PolicyParams, rng: np.random.Generator, level=None,
            greedy: bool = False) -> Trajectory:
    """Play one episode. ``level`` resets the env onto a new level when given."""
    W, c = params.actor_weights, params.critic_weights
    obs = env.reset(level)
    _check_dims(W, obs)
    obs_rows, actions, rewards, values, logps = [], [], [], [], []
    while True:
        z = W @ obs
        if greedy:
            best = np.flatnonzero(z == z.max())
            a = int(best[0]) if len(best) == 1 else int(best[rng.integers(len(best))])
            lp = 0.0
        else:
            e = np.exp(z - z.max())
            p = e / e.sum()
            a = sample_categorical(p, rng)
            lp = float(np.log(p[a]))
        obs_rows.append(obs)
        values.append(float(c @ obs))
        actions.append(a)
        logps.append(lp)
        obs, r, terminal = env.step(a)
        rewards.append(r)
        if terminal or env.done:
            break
    bootstrap = 0.0 if terminal else float(c @ obs)
    return Trajectory(np.array(obs_rows), actions, rewards, values, terminal, bootstrap, logps)


# ---------------------------------------------------------------------------
# advantage estimation and level scores

def td_errors(traj: Trajectory, gamma: float) -> np.ndarray:
    next_values = np.append(traj.values[1:], 0.0 if traj.terminal else traj.bootstrap_value)
    return traj.rewards + gamma * next_values - traj.values


def gae_advantages(traj: Trajectory, cfg: GaeConfig) -> np.ndarray:
    """Signed lambda-advantages ``A_t = sum_k (gamma*lam)^(k-t) delta_k``."""
    if len(traj) == 0:
        raise PreconditionError("GAE of an empty trajectory")
    delta = td_errors(traj, cfg.gamma)
    return lfilter([1.0], [1.0, -cfg.gamma * cfg.lam], delta[::-1])[::-1]


def gae_score(traj: Trajectory, cfg: GaeConfig) -> float:
    """Positive value loss: mean over steps of the positively clipped advantage."""
    return float(np.maximum(gae_advantages(traj, cfg), 0.0).mean())


def mean_abs_gae(traj: Trajectory, cfg: GaeConfig) -> float:
    return float(np.abs(gae_advantages(traj, cfg)).mean())


def _mean(xs: Sequence[float], what: str) -> float:
    xs = np.asarray(list(xs), dtype=np.float64)
    if xs.size == 0:
        raise PreconditionError(f"{what} must be non-empty")
    return float(xs.mean())


def self_play_regret(alice_returns: Sequence[float], bob_returns: Sequence[float]) -> float:
    """Mean Alice return minus mean Bob return on the same level (signed)."""
    return _mean(alice_returns, "alice_returns") - _mean(bob_returns, "bob_returns")


def paired_regret(protagonist_returns: Sequence[float], antagonist_returns: Sequence[float]) -> float:
    """Mean antagonist return minus mean protagonist return (signed)."""
    return _mean(antagonist_returns, "antagonist_returns") - _mean(protagonist_returns, "protagonist_returns")


def gae_magnitude_regret(alice_trajs: Sequence[Trajectory], bob_trajs: Sequence[Trajectory],
                         cfg: GaeConfig) -> float:
    """Alternative self-play regret: difference of mean |GAE| scores."""
    return (_mean([mean_abs_gae(t, cfg) for t in alice_trajs], "alice_trajs")
            - _mean([mean_abs_gae(t, cfg) for t in bob_trajs], "bob_trajs"))


def episode_returns(trajs: Sequence[Trajectory], gamma: float) -> list[float]:
    return [discounted_return(t, gamma) for t in trajs]


# ---------------------------------------------------------------------------
# training

def train_step(params: PolicyParams, trajs: Sequence[Trajectory], cfg: TrainConfig) -> PolicyParams:
    """One actor-critic update on a batch of episodes; returns new params.

    The actor follows ``sum_t A_t grad log pi(a_t|o_t)`` with signed GAE
    advantages plus an entropy bonus; the critic takes a gradient step
    toward the lambda-return ``A_t + V(o_t)``. Both are averaged over the
    steps of the batch.
    """
    if not trajs:
        raise PreconditionError("train_step needs a non-empty batch")
    X = np.concatenate([t.obs for t in trajs])
    _check_dims(params.actor_weights, X)
    actions = np.concatenate([t.actions for t in trajs])
    adv = np.concatenate([gae_advantages(t, cfg.gae) for t in trajs])
    targets = adv + np.concatenate([t.values for t in trajs])
    if cfg.normalize_advantages and len(adv) > 1:
        adv = (adv - adv.mean()) / (adv.std() + 1e-8)
    n = len(adv)
    rows = np.arange(n)

    W = params.actor_weights.copy()
    c = params.critic_weights.copy()
    old_logp = None
    if cfg.clip_ratio is not None:
        old_logp = np.log(masked_softmax(X @ W.T)[rows, actions])

    for _ in range(max(1, cfg.epochs)):
        P = masked_softmax(X @ W.T)
        weight = adv
        if old_logp is not None:
            ratio = np.exp(np.log(P[rows, actions]) - old_logp)
            clipped = ((adv > 0) & (ratio > 1 + cfg.clip_ratio)) | ((adv < 0) & (ratio < 1 - cfg.clip_ratio))
            weight = np.where(clipped, 0.0, adv * ratio)
        dlogits = -P * weight[:, None]
        dlogits[rows, actions] += weight
        grad_W = dlogits.T @ X / n
        if cfg.entropy_coef:
            logP = np.log(np.clip(P, 1e-300, None))
            H = -(P * logP).sum(axis=1, keepdims=True)
            grad_W += cfg.entropy_coef * ((-P * (logP + H)).T @ X) / n
        grad_c = (targets - X @ c) @ X / n
        if not (np.all(np.isfinite(grad_W)) and np.all(np.isfinite(grad_c))):
            raise NumericalError("non-finite gradient in train_step", {
                "version": params.version,
                "max_abs_advantage": float(np.max(np.abs(adv))) if n else 0.0,   # nan if any advantage is nan
                "actor_norm": float(np.linalg.norm(W)),
                "critic_norm": float(np.linalg.norm(c)),
            })
        W += cfg.actor_lr * grad_W
        c += cfg.critic_lr * grad_c
        if not (np.all(np.isfinite(W)) and np.all(np.isfinite(c))):
            raise NumericalError("train_step produced non-finite weights", {
                "version": params.version,
                "max_abs_advantage": float(np.max(np.abs(adv))),
                "actor_lr": cfg.actor_lr,
                "critic_lr": cfg.critic_lr,
            })
    return PolicyParams(W, c, params.version + 1)


# ---------------------------------------------------------------------------
# snapshots

def policy_to_dict(params: PolicyParams, family_id: str) -> dict:
    return {
        "format_version": POLICY_FORMAT_VERSION,
        "family_id": family_id,
        "d": params.obs_dim,
        "num_actions": params.num_actions,
        "version": params.version,
        "actor_weights": params.actor_weights.ravel().tolist(),
        "critic_weights": params.critic_weights.tolist(),
    }


def policy_from_dict(doc: dict) -> tuple[PolicyParams, str]:
    try:
        if doc["format_version"] != POLICY_FORMAT_VERSION:
            raise ParseError(f"unsupported policy format_version {doc['format_version']}")
        d, k = int(doc["d"]), int(doc["num_actions"])
        actor = np.array(doc["actor_weights"], dtype=np.float64)
        critic = np.array(doc["critic_weights"], dtype=np.float64)
        if actor.size != d * k or critic.size != d:
            raise ParseError("policy arrays do not match the declared d and num_actions")
        return PolicyParams(actor.reshape(k, d), critic, int(doc["version"])), str(doc["family_id"])
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ParseError):
            raise
        raise ParseError(f"corrupt policy snapshot: {exc}") from exc


def save_policy(params: PolicyParams, path, family_id: str):
    Path(path).write_text(json.dumps(policy_to_dict(params, family_id), indent=1) + "\n")


def load_policy(path) -> tuple[PolicyParams, str]:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"policy snapshot is not valid JSON: {exc}") from exc
    return policy_from_dict(doc)


__all__ = [
    "AgentPair", "GaeConfig", "PolicyParams", "TrainConfig", "act", "action_probs",
    "episode_returns", "gae_advantages", "gae_magnitude_regret", "gae_score", "grad_log_prob",
    "greedy_action", "load_policy", "log_prob", "masked_softmax", "mean_abs_gae", "paired_regret",
    "rollout", "save_policy", "self_play_regret", "sync_bob", "td_errors", "train_step",
]
