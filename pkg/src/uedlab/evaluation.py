"""Zero-shot evaluation of a student policy on held-out mazes."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import ConfigurationError, PreconditionError
from .learner import PolicyParams, rollout
from .maze import DEFAULT_HORIZON, MazeEnv, MazeLevel, is_solvable, iter_maze_files, load_maze, observation_dim

log = logging.getLogger(__name__)


def default_suite_path() -> Path:
    return Path(str(resources.files("uedlab") / "data" / "suite"))


def load_suite(directory=None) -> list[tuple[str, MazeLevel]]:
    """Load ``*.maze`` files sorted by name; unsolvable levels are dropped with a warning."""
    directory = default_suite_path() if directory is None else Path(directory)
    levels = []
    for path in iter_maze_files(directory):
        level = load_maze(path)
        if not is_solvable(level):
            log.warning("skipping unsolvable evaluation level %s", path.name)
            continue
        levels.append((path.stem, level))
    if not levels:
        raise PreconditionError(f"no solvable .maze files in {directory}")
    return levels


@dataclass
class LevelResult:
    name: str
    episode: int
    solved: bool
    ret: float
    steps: int


@dataclass
class EvalResult:
    per_level: list[LevelResult]

    @property
    def solved_rate(self) -> float:
        return float(np.mean([r.solved for r in self.per_level])) if self.per_level else 0.0

    @property
    def mean_return(self) -> float:
        return float(np.mean([r.ret for r in self.per_level])) if self.per_level else 0.0

    @property
    def return_stderr(self) -> float:
        n = len(self.per_level)
        if n < 2:
            return 0.0
        return float(np.std([r.ret for r in self.per_level], ddof=1) / math.sqrt(n))

    def summary(self) -> str:
        return (f"episodes={len(self.per_level)} solved_rate={self.solved_rate:.4f} "
                f"mean_return={self.mean_return:.4f} +- {self.return_stderr:.4f}")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["level", "episode", "solved", "return", "steps"])
            for r in self.per_level:
                w.writerow([r.name, r.episode, int(r.solved), repr(r.ret), r.steps])


def evaluate(params: PolicyParams, levels: Sequence[tuple[str, MazeLevel]], episodes: int = 1,
             seed: int = 0, horizon: int = DEFAULT_HORIZON, view_size: int | None = None,
             greedy: bool = True) -> EvalResult:
    """Roll the policy out ``episodes`` times per level.

    Greedy mode takes the argmax action, breaking exact ties with a generator
    seeded from ``seed``; identical inputs give identical results.
    """
    if view_size is None:
        view_size = int(round(math.sqrt((params.obs_dim - 4) / 4)))
    if observation_dim(view_size) != params.obs_dim:
        raise ConfigurationError(
            f"policy expects {params.obs_dim} features; view size {view_size} gives {observation_dim(view_size)}")
    rng = np.random.default_rng(seed)
    env = MazeEnv(horizon, view_size)
    results = []
    for name, level in levels:
        for ep in range(episodes):
            traj = rollout(env, params, rng, level=level, greedy=greedy)
            results.append(LevelResult(name, ep, bool(traj.terminal), float(traj.rewards.sum()), len(traj)))
    return EvalResult(results)
