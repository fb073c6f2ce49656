"""Level parameters, trajectories and returns shared by every strategy.

A *level* is one fully specified environment instance: a family tag, the
design actions that built it and a construction seed. Environments are
created from levels through :func:`make_env`, which dispatches on the
family tag.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple, Protocol, Sequence

import numpy as np


class UedError(Exception):
    """Base class for all errors raised by this package."""


class PreconditionError(UedError, ValueError):
    """An operation was called with inputs outside its domain."""


class ConfigurationError(UedError, ValueError):
    """Mismatched dimensions, unknown families, invalid settings."""


class UsageError(UedError, RuntimeError):
    """An object was driven in the wrong order (e.g. step after terminal)."""


class NumericalError(UedError, ArithmeticError):
    """A non-finite value appeared; ``payload`` carries diagnostics."""

    def __init__(self, message: str, payload: dict | None = None):
        super().__init__(message)
        self.payload = dict(payload or {})


class InvalidDesignError(UedError, ValueError):
    """A design-action sequence cannot be turned into a level."""


class ParseError(UedError, ValueError):
    """Malformed text input (maze files, snapshots, metrics)."""


UINT64_MAX = 2**64 - 1


@dataclass(frozen=True)
class LevelParams:
    family_id: str
    encoding: tuple[int, ...]
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "encoding", tuple(int(v) for v in self.encoding))
        if not 0 <= int(self.seed) <= UINT64_MAX:
            raise PreconditionError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        object.__setattr__(self, "seed", int(self.seed))


class TrajectoryStep(NamedTuple):
    obs: np.ndarray
    action: int
    reward: float
    value_estimate: float
    terminal: bool


@dataclass
class Trajectory:
    """One episode stored column-wise.

    ``obs`` has shape ``(T, d)``; ``actions``, ``rewards``, ``values`` and
    ``log_probs`` have shape ``(T,)``. ``terminal`` marks whether the final
    step ended the episode (as opposed to a horizon truncation), and
    ``bootstrap_value`` is the critic value of the post-final observation
    (0 when terminal).
    """

    obs: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    values: np.ndarray
    terminal: bool = False
    bootstrap_value: float = 0.0
    log_probs: np.ndarray | None = None
    level_id: int | None = field(default=None, compare=False)

    def __post_init__(self):
        self.obs = np.atleast_2d(np.asarray(self.obs, dtype=np.float64))
        self.actions = np.asarray(self.actions, dtype=np.int64).reshape(-1)
        self.rewards = np.asarray(self.rewards, dtype=np.float64).reshape(-1)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1)
        if self.log_probs is not None:
            self.log_probs = np.asarray(self.log_probs, dtype=np.float64).reshape(-1)
        n = len(self.rewards)
        if not (len(self.actions) == len(self.values) == n and self.obs.shape[0] == n):
            raise PreconditionError("trajectory columns have inconsistent lengths")
        if not np.all(np.isfinite(self.rewards)):
            raise NumericalError("non-finite reward in trajectory")
        if self.terminal:
            self.bootstrap_value = 0.0

    def __len__(self) -> int:
        return len(self.rewards)

    @property
    def steps(self) -> list[TrajectoryStep]:
        last = len(self) - 1
        return [
            TrajectoryStep(self.obs[t], int(self.actions[t]), float(self.rewards[t]),
                           float(self.values[t]), bool(self.terminal and t == last))
            for t in range(len(self))
        ]

    @classmethod
    def from_steps(cls, steps: Sequence[TrajectoryStep], bootstrap_value: float = 0.0) -> "Trajectory":
        if not steps:
            raise PreconditionError("a trajectory needs at least one step")
        if any(s.terminal for s in steps[:-1]):
            raise PreconditionError("only the final step may be terminal")
        return cls(
            obs=np.stack([np.asarray(s.obs, dtype=np.float64) for s in steps]),
            actions=[s.action for s in steps],
            rewards=[s.reward for s in steps],
            values=[s.value_estimate for s in steps],
            terminal=bool(steps[-1].terminal),
            bootstrap_value=bootstrap_value,
        )


def discounted_return(traj: Trajectory, gamma: float) -> float:
    """Sum of ``gamma**t * r_t`` over the episode, without a bootstrap term."""
    if len(traj) == 0:
        raise PreconditionError("discounted_return of an empty trajectory")
    if not 0.0 < gamma <= 1.0:
        raise PreconditionError(f"gamma must lie in (0, 1], got {gamma}")
    discounts = gamma ** np.arange(len(traj), dtype=np.float64)
    return float(np.dot(discounts, traj.rewards))


class Env(Protocol):
    obs_dim: int
    num_actions: int

    def reset(self, level=None) -> np.ndarray: ...

    def step(self, action: int) -> tuple[np.ndarray, float, bool]: ...


def make_env(family_id: str, **env_kwargs) -> Env:
    """Construct an (un-reset) environment for a level family."""
    from . import maze

    if maze.parse_family_id(family_id) is None:
        raise ConfigurationError(f"unknown family_id {family_id!r}")
    return maze.MazeEnv(**env_kwargs)
