"""Cosine-kernel representative states and state-aware level diversity.

Each level is summarised by a small set of observation vectors chosen
greedily to maximise the facility-location score

    F_rep(S) = sum_{o in O} max_{s in S} k(o, s)

over a random subsample ``O`` of the observations collected on it. Levels
are then compared through their representatives: a level's diversity score
sums, over its own representatives, the best cosine match found among the
pooled representatives of the other levels. Low scores mean distinct levels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Hashable, Sequence

import numpy as np

from .core import ConfigurationError, PreconditionError


@dataclass(frozen=True)
class DiversityConfig:
    n: int = 8
    m_prime: int = 64
    zero_norm_epsilon: float = 1e-9

    def __post_init__(self):
        if self.n < 1:
            raise ConfigurationError("representative capacity n must be >= 1")
        if not self.n < self.m_prime:
            raise ConfigurationError(f"need n < m_prime, got n={self.n}, m_prime={self.m_prime}")
        if self.zero_norm_epsilon <= 0:
            raise ConfigurationError("zero_norm_epsilon must be positive")


@dataclass
class RepresentativeSet:
    level_ref: Hashable
    vectors: np.ndarray
    n: int = 8

    def __post_init__(self):
        self.vectors = np.atleast_2d(np.asarray(self.vectors, dtype=np.float64))
        if len(self.vectors) > self.n:
            raise PreconditionError(f"{len(self.vectors)} representatives exceed capacity {self.n}")
        if not np.all(np.isfinite(self.vectors)):
            raise PreconditionError("representative vectors must be finite")

    def __len__(self) -> int:
        return len(self.vectors)

    @property
    def dim(self) -> int:
        return self.vectors.shape[1]


def _as_matrix(vectors) -> np.ndarray:
    if isinstance(vectors, RepresentativeSet):
        return vectors.vectors
    m = np.asarray(vectors, dtype=np.float64)
    if m.ndim == 1:
        m = m[None, :]
    return m


def kernel_matrix(a, b, eps: float = 1e-9) -> np.ndarray:
    """Pairwise cosine similarities between the rows of ``a`` and ``b``.

    Two near-zero vectors count as identical (1) and a near-zero vector
    against a non-zero one as unrelated (0). Values are clipped to [-1, 1].
    """
    a, b = _as_matrix(a), _as_matrix(b)
    if a.shape[1] != b.shape[1]:
        raise ConfigurationError(f"dimension mismatch: {a.shape[1]} vs {b.shape[1]}")
    na, nb = np.linalg.norm(a, axis=1), np.linalg.norm(b, axis=1)
    za, zb = na < eps, nb < eps
    ua = a / np.where(za, 1.0, na)[:, None]
    ub = b / np.where(zb, 1.0, nb)[:, None]
    k = np.clip(ua @ ub.T, -1.0, 1.0)
    if za.any() or zb.any():
        k[za, :] = 0.0
        k[:, zb] = 0.0
        k[np.ix_(za, zb)] = 1.0
    return k


def cosine_kernel(o1, o2, eps: float = 1e-9) -> float:
    o1, o2 = np.asarray(o1, dtype=np.float64), np.asarray(o2, dtype=np.float64)
    if o1.shape != o2.shape:
        raise ConfigurationError(f"dimension mismatch: {o1.shape} vs {o2.shape}")
    return float(kernel_matrix(o1, o2, eps)[0, 0])


def rep_score(S, O, eps: float = 1e-9) -> float:
    S, O = _as_matrix(S), _as_matrix(O)
    if S.shape[0] == 0:
        raise PreconditionError("representative score of an empty set is undefined")
    if O.shape[0] == 0:
        raise PreconditionError("observation set O must be non-empty")
    return float(kernel_matrix(O, S, eps).max(axis=1).sum())


def marginal_gain(o, S, O, eps: float = 1e-9) -> float:
    """``F_rep(S + o) - F_rep(S)``; for empty ``S`` this is ``F_rep({o})``."""
    o = np.asarray(o, dtype=np.float64).reshape(1, -1)
    S = np.asarray(S, dtype=np.float64).reshape(-1, o.shape[1]) if np.size(S) else np.empty((0, o.shape[1]))
    if S.shape[0] == 0:
        return rep_score(o, O, eps)
    return rep_score(np.vstack([S, o]), O, eps) - rep_score(S, O, eps)


def greedy_indices(pool: np.ndarray, n: int, eps: float = 1e-9) -> list[int]:
    """Greedy facility-location selection of ``min(n, len(pool))`` rows.

    The pool itself is the ground set ``O``. The argmax gain is taken at each
    step with ties going to the lowest row index; selection always fills to
    ``n`` even when the remaining gains are zero.
    """
    pool = _as_matrix(pool)
    m = len(pool)
    if m == 0:
        raise PreconditionError("cannot select representatives from an empty pool")
    if n >= m:
        return list(range(m))
    K = kernel_matrix(pool, pool, eps)          # K[i, j] = k(o_i, candidate_j)
    chosen: list[int] = []
    available = np.ones(m, dtype=bool)
    best = None
    for _ in range(n):
        if best is None:
            gains = K.sum(axis=0)
        else:
            gains = np.maximum(K - best[:, None], 0.0).sum(axis=0)
        gains = np.where(available, gains, -np.inf)
        j = int(np.argmax(gains))
        chosen.append(j)
        available[j] = False
        best = K[:, j].copy() if best is None else np.maximum(best, K[:, j])
    return chosen


def select_representatives(O, cfg: DiversityConfig, rng: np.random.Generator,
                           level_ref: Hashable = None) -> RepresentativeSet:
    """Subsample ``min(m_prime, |O|)`` observations uniformly, then pick ``n`` greedily."""
    O = _as_matrix(O)
    if O.shape[0] == 0:
        raise PreconditionError("need at least one observation")
    if len(O) > cfg.m_prime:
        idx = np.sort(rng.choice(len(O), size=cfg.m_prime, replace=False))
        O = O[idx]
    chosen = greedy_indices(O, cfg.n, cfg.zero_norm_epsilon)
    return RepresentativeSet(level_ref, O[chosen].copy(), cfg.n)


def level_div_score(target, others: Sequence, eps: float = 1e-9) -> float:
    """Sum over ``target``'s vectors of the best match among the union of ``others``."""
    others = list(others)
    if not others:
        raise PreconditionError("diversity needs at least one other level")
    T = _as_matrix(target)
    pool = np.vstack([_as_matrix(o) for o in others])
    return float(kernel_matrix(T, pool, eps).max(axis=1).sum())


def div_scores(sets: Sequence, eps: float = 1e-9) -> np.ndarray:
    """Every set's diversity score against the union of all the others.

    Equivalent to calling :func:`level_div_score` once per set, but uses one
    pooled Gram matrix. A lone set scores 0 (it has nothing to be similar to).
    """
    mats = [_as_matrix(s) for s in sets]
    if len(mats) == 0:
        return np.zeros(0)
    if len(mats) == 1:
        return np.zeros(1)
    owner = np.concatenate([np.full(len(m), i) for i, m in enumerate(mats)])
    pool = np.vstack(mats)
    K = kernel_matrix(pool, pool, eps)
    K[owner[:, None] == owner[None, :]] = -np.inf
    best = K.max(axis=1)
    return np.bincount(owner, weights=best, minlength=len(mats))


def buffer_div_score(sets: Sequence, eps: float = 1e-9) -> float:
    if len(sets) < 2:
        raise PreconditionError("buffer diversity needs at least two levels")
    return float(div_scores(sets, eps).sum())
