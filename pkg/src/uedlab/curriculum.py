"""Capacity-limited level buffer with diversity-driven replacement.

Entries carry a learning-potential score (positive value loss of the last
visit) and a cached diversity score. Replay probabilities mix two rank
prioritisations: learning potential ranked high-to-low and diversity
ranked low-to-high (most distinct first).
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Hashable, NamedTuple

import numpy as np

from .core import ConfigurationError, LevelParams, ParseError, PreconditionError
from .diversity import DiversityConfig, RepresentativeSet, div_scores, greedy_indices
from .learner import sample_categorical

BUFFER_FORMAT_VERSION = 1

# slack on "strictly lower diversity score"; keeps exact duplicates from
# displacing each other through last-ulp cosine noise
REPLACE_TOL = 1e-9


@dataclass(frozen=True)
class ReplayConfig:
    K: int = 32
    p: float = 0.5
    rho: float = 0.5
    beta: float = 0.3
    # "diversity": evict the most redundant level; "gae": evict the lowest learning potential
    replacement: str = "diversity"

    def __post_init__(self):
        if self.K < 1:
            raise ConfigurationError("buffer capacity K must be >= 1")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigurationError("p must lie in [0, 1]")
        if not 0.0 <= self.rho <= 1.0:
            raise ConfigurationError("rho must lie in [0, 1]")
        if not self.beta > 0.0:
            raise ConfigurationError("beta must be positive")
        if self.replacement not in ("diversity", "gae"):
            raise ConfigurationError(f"unknown replacement rule {self.replacement!r}")


@dataclass
class BufferEntry:
    level_id: Hashable
    level: LevelParams
    reps: RepresentativeSet
    gae_score: float
    div_score: float = 0.0
    visits: int = 0
    last_iteration: int = 0
    inserted_at: int = 0

    def __post_init__(self):
        if not self.gae_score >= 0.0:
            raise PreconditionError(f"gae_score must be >= 0, got {self.gae_score}")


class InsertOutcome(NamedTuple):
    kind: str                      # inserted_empty_slot | replaced | rejected
    evicted: Hashable = None
    candidate_score: float | None = None
    incumbent_scores: tuple = ()   # pooled scores used for the decision, buffer order


def rank_priority(scores, beta: float, descending: bool = True) -> np.ndarray:
    """``(1/rank)^(1/beta)`` normalised; ties keep their input order."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise PreconditionError("cannot prioritise an empty buffer")
    if not beta > 0.0:
        raise PreconditionError("beta must be positive")
    order = np.argsort(-scores if descending else scores, kind="stable")
    ranks = np.empty(len(scores))
    ranks[order] = np.arange(1, len(scores) + 1)
    logw = -np.log(ranks) / beta
    w = np.exp(logw - logw.max())
    return w / w.sum()


def choose_eviction(incumbent_scores, candidate_score: float, last_iterations) -> int | None:
    """Index of the incumbent to replace, or None to reject the candidate.

    The candidate wins when its score is lower than the highest incumbent
    score; that incumbent is evicted, ties going to the oldest
    ``last_iteration`` (then the earliest position).
    """
    s = np.asarray(incumbent_scores, dtype=np.float64)
    top = s.max()
    if not candidate_score < top - REPLACE_TOL:
        return None
    tied = np.flatnonzero(s >= top - 1e-12)
    last = np.asarray(last_iterations)[tied]
    return int(tied[np.argmin(last)])


class LevelBuffer:
    def __init__(self, cfg: ReplayConfig | None = None, div_cfg: DiversityConfig | None = None):
        self.cfg = cfg or ReplayConfig()
        self.div_cfg = div_cfg or DiversityConfig()
        self.entries: list[BufferEntry] = []
        self.clock = 0
        self._next_insert = 0

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def level_ids(self) -> list:
        return [e.level_id for e in self.entries]

    def index_of(self, level_id) -> int:
        for i, e in enumerate(self.entries):
            if e.level_id == level_id:
                return i
        raise KeyError(f"level {level_id!r} is not in the buffer")

    def get(self, level_id) -> BufferEntry:
        return self.entries[self.index_of(level_id)]

    def _tick(self) -> int:
        self.clock += 1
        return self.clock

    # -- diversity cache -------------------------------------------------

    def recompute_div_scores(self) -> np.ndarray:
        return div_scores([e.reps for e in self.entries], self.div_cfg.zero_norm_epsilon)

    def refresh_div_scores(self):
        for e, s in zip(self.entries, self.recompute_div_scores()):
            e.div_score = float(s)

    def cache_error(self) -> float:
        if not self.entries:
            return 0.0
        cached = np.array([e.div_score for e in self.entries])
        return float(np.max(np.abs(cached - self.recompute_div_scores())))

    def diversity(self) -> float:
        """Summed diversity score of the whole buffer (0 below two entries)."""
        return float(self.recompute_div_scores().sum()) if len(self) >= 2 else 0.0

    # -- mutation --------------------------------------------------------

    def try_insert(self, candidate: BufferEntry) -> InsertOutcome:
        if len(candidate.reps) == 0:
            raise PreconditionError("candidate has no representatives")
        candidate.last_iteration = self._tick()
        candidate.inserted_at = self._next_insert
        if len(self.entries) < self.cfg.K:
            self._append(candidate)
            return InsertOutcome("inserted_empty_slot")

        last = [e.last_iteration for e in self.entries]
        if self.cfg.replacement == "gae":
            gaes = np.array([e.gae_score for e in self.entries])
            # lowest learning potential goes; reuse the max-rule on negated scores
            idx = choose_eviction(-gaes, -candidate.gae_score, last)
            cand_score, pooled = candidate.gae_score, tuple(gaes.tolist())
        else:
            scores = div_scores([e.reps for e in self.entries] + [candidate.reps],
                                self.div_cfg.zero_norm_epsilon)
            cand_score, pooled = float(scores[-1]), tuple(scores[:-1].tolist())
            idx = choose_eviction(scores[:-1], cand_score, last)
        if idx is None:
            return InsertOutcome("rejected", None, cand_score, pooled)
        evicted = self.entries.pop(idx).level_id
        self._append(candidate)
        return InsertOutcome("replaced", evicted, cand_score, pooled)

    def _append(self, entry: BufferEntry):
        self._next_insert += 1
        self.entries.append(entry)
        self.refresh_div_scores()

    def update_entry(self, level_id, new_observations, new_gae: float, rng: np.random.Generator):
        """Re-select representatives over old reps plus a fresh subsample; set the new score."""
        entry = self.get(level_id)
        if not new_gae >= 0.0:
            raise PreconditionError(f"gae score must be >= 0, got {new_gae}")
        fresh = np.atleast_2d(np.asarray(new_observations, dtype=np.float64))
        if len(fresh) > self.div_cfg.m_prime:
            fresh = fresh[np.sort(rng.choice(len(fresh), size=self.div_cfg.m_prime, replace=False))]
        pool = np.vstack([entry.reps.vectors, fresh]) if len(fresh) else entry.reps.vectors
        chosen = greedy_indices(pool, self.div_cfg.n, self.div_cfg.zero_norm_epsilon)
        entry.reps = RepresentativeSet(entry.level_id, pool[chosen].copy(), self.div_cfg.n)
        entry.gae_score = float(new_gae)
        self.refresh_div_scores()

    # -- sampling --------------------------------------------------------

    def gae_priority(self, beta: float | None = None) -> np.ndarray:
        beta = self.cfg.beta if beta is None else beta
        return rank_priority([e.gae_score for e in self.entries], beta, descending=True)

    def div_priority(self, beta: float | None = None) -> np.ndarray:
        beta = self.cfg.beta if beta is None else beta
        return rank_priority([e.div_score for e in self.entries], beta, descending=False)

    def replay_distribution(self, rho: float | None = None, beta: float | None = None) -> np.ndarray:
        rho = self.cfg.rho if rho is None else rho
        return (1.0 - rho) * self.gae_priority(beta) + rho * self.div_priority(beta)

    def sample_level(self, rng: np.random.Generator):
        if not self.entries:
            raise PreconditionError("cannot sample from an empty buffer")
        idx = sample_categorical(self.replay_distribution(), rng)
        entry = self.entries[idx]
        entry.visits += 1
        entry.last_iteration = self._tick()
        return entry.level_id

    # -- persistence -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format_version": BUFFER_FORMAT_VERSION,
            "config": asdict(self.cfg),
            "diversity": asdict(self.div_cfg),
            "clock": self.clock,
            "next_insert": self._next_insert,
            "entries": [
                {
                    "level_id": e.level_id,
                    "family_id": e.level.family_id,
                    "encoding": list(e.level.encoding),
                    "seed": e.level.seed,
                    "reps": e.reps.vectors.tolist(),
                    "gae_score": e.gae_score,
                    "div_score": e.div_score,
                    "visits": e.visits,
                    "last_iteration": e.last_iteration,
                    "inserted_at": e.inserted_at,
                }
                for e in self.entries
            ],
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "LevelBuffer":
        """Rebuild a buffer verbatim; cached scores are kept, not recomputed."""
        try:
            if doc["format_version"] != BUFFER_FORMAT_VERSION:
                raise ParseError(f"unsupported buffer format_version {doc['format_version']}")
            buf = cls(ReplayConfig(**doc["config"]), DiversityConfig(**doc["diversity"]))
            buf.clock = int(doc["clock"])
            buf._next_insert = int(doc["next_insert"])
            for raw in doc["entries"]:
                level = LevelParams(raw["family_id"], tuple(raw["encoding"]), raw["seed"])
                reps = RepresentativeSet(raw["level_id"], np.array(raw["reps"], dtype=np.float64),
                                         buf.div_cfg.n)
                buf.entries.append(BufferEntry(
                    raw["level_id"], level, reps, float(raw["gae_score"]), float(raw["div_score"]),
                    int(raw["visits"]), int(raw["last_iteration"]), int(raw["inserted_at"])))
        except ParseError:
            raise
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"corrupt buffer snapshot: {exc}") from exc
        return buf

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "LevelBuffer":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ParseError(f"buffer snapshot is not valid JSON: {exc}") from exc
        return cls.from_dict(doc)


# functional aliases matching the operation names used across the package

def try_insert(buffer: LevelBuffer, candidate: BufferEntry) -> InsertOutcome:
    return buffer.try_insert(candidate)


def gae_priority(buffer: LevelBuffer, beta: float) -> np.ndarray:
    return buffer.gae_priority(beta)


def div_priority(buffer: LevelBuffer, beta: float) -> np.ndarray:
    return buffer.div_priority(beta)


def replay_distribution(buffer: LevelBuffer, cfg: ReplayConfig) -> np.ndarray:
    return buffer.replay_distribution(cfg.rho, cfg.beta)


def sample_level(buffer: LevelBuffer, rng: np.random.Generator):
    return buffer.sample_level(rng)


def update_entry(buffer: LevelBuffer, level_id, new_observations, new_gae: float,
                 rng: np.random.Generator):
    buffer.update_entry(level_id, new_observations, new_gae, rng)
