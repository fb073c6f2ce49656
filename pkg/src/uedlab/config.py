"""Experiment configuration: one JSON document, every key explicit.

Unknown keys and out-of-range values raise :class:`ConfigFieldError`, which
names the offending dotted field so the CLI can report it.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .core import ConfigurationError
from .curriculum import ReplayConfig
from .diversity import DiversityConfig
from .learner import GaeConfig, TrainConfig
from .maze import MazeFamily

STRATEGY_KINDS = ("divsp", "dr", "plr", "minimax", "paired")


class ConfigFieldError(ConfigurationError):
    def __init__(self, field_name: str, message: str):
        super().__init__(f"{field_name}: {message}")
        self.field = field_name


@dataclass(frozen=True)
class EnvSettings:
    width: int = 13
    height: int = 13
    max_blocks: int = 25
    horizon: int = 100
    view_size: int = 5


@dataclass(frozen=True)
class LearnerSettings:
    gamma: float = 0.995
    lam: float = 0.95
    actor_lr: float = 0.5
    critic_lr: float = 0.01
    entropy_coef: float = 0.01
    clip_ratio: float | None = None
    epochs: int = 1
    normalize_advantages: bool = False


@dataclass(frozen=True)
class CurriculumSettings:
    K: int = 32
    p: float = 0.5
    rho: float = 0.5
    beta: float = 0.3
    n: int = 8
    m_prime: int = 64
    zero_norm_epsilon: float = 1e-9
    episodes_per_eval: int = 2


@dataclass(frozen=True)
class StrategySettings:
    kind: str = "divsp"
    generator_learning_rate: float = 0.05
    generator_baseline_decay: float = 0.99
    # "returns": mean-return difference; "gae": difference of mean |GAE|
    regret_estimator: str = "returns"


@dataclass(frozen=True)
class ExperimentConfig:
    env: EnvSettings = field(default_factory=EnvSettings)
    learner: LearnerSettings = field(default_factory=LearnerSettings)
    curriculum: CurriculumSettings = field(default_factory=CurriculumSettings)
    strategy: StrategySettings = field(default_factory=StrategySettings)
    total_env_steps: int = 300_000
    seed: int = 0
    eval_interval: int = 0
    eval_episodes: int = 1
    eval_suite_path: str | None = None
    output_dir: str = "runs/out"

    def __post_init__(self):
        self.validate()

    # -- derived component configs ---------------------------------------

    @property
    def family(self) -> MazeFamily:
        return MazeFamily(self.env.width, self.env.height, self.env.max_blocks)

    def gae_config(self) -> GaeConfig:
        return GaeConfig(self.learner.gamma, self.learner.lam)

    def train_config(self) -> TrainConfig:
        lr = self.learner
        return TrainConfig(self.gae_config(), lr.actor_lr, lr.critic_lr, lr.entropy_coef,
                           lr.clip_ratio, lr.epochs,
                           lr.normalize_advantages)

    def replay_config(self) -> ReplayConfig:
        c = self.curriculum
        if self.strategy.kind == "plr":
            return ReplayConfig(c.K, c.p, 0.0, c.beta, "gae")
        return ReplayConfig(c.K, c.p, c.rho, c.beta, "diversity")

    def diversity_config(self) -> DiversityConfig:
        c = self.curriculum
        return DiversityConfig(c.n, c.m_prime, c.zero_norm_epsilon)

    # -- validation and (de)serialisation --------------------------------

    def validate(self):
        e, lr, c, s = self.env, self.learner, self.curriculum, self.strategy
        checks = [
            ("strategy.kind", s.kind in STRATEGY_KINDS, f"must be one of {', '.join(STRATEGY_KINDS)}"),
            ("strategy.regret_estimator", s.regret_estimator in ("returns", "gae"), "must be 'returns' or 'gae'"),
            ("strategy.generator_learning_rate", s.generator_learning_rate >= 0, "must be >= 0"),
            ("strategy.generator_baseline_decay", 0 <= s.generator_baseline_decay < 1, "must lie in [0, 1)"),
            ("env.width", e.width >= 2, "must be >= 2"),
            ("env.height", e.height >= 2, "must be >= 2"),
            ("env.max_blocks", e.max_blocks >= 0, "must be >= 0"),
            ("env.horizon", e.horizon >= 1, "must be >= 1"),
            ("env.view_size", e.view_size >= 1 and e.view_size % 2 == 1, "must be a positive odd integer"),
            ("learner.gamma", 0 < lr.gamma <= 1, "must lie in (0, 1]"),
            ("learner.lam", 0 <= lr.lam <= 1, "must lie in [0, 1]"),
            ("learner.actor_lr", lr.actor_lr >= 0, "must be >= 0"),
            ("learner.critic_lr", lr.critic_lr >= 0, "must be >= 0"),
            ("learner.entropy_coef", lr.entropy_coef >= 0, "must be >= 0"),
            ("learner.clip_ratio", lr.clip_ratio is None or lr.clip_ratio > 0, "must be null or > 0"),
            ("learner.epochs", lr.epochs >= 1, "must be >= 1"),
            ("curriculum.K", c.K >= 1, "must be >= 1"),
            ("curriculum.p", 0 <= c.p <= 1, "must lie in [0, 1]"),
            ("curriculum.rho", 0 <= c.rho <= 1, "must lie in [0, 1]"),
            ("curriculum.beta", c.beta > 0, "must be > 0"),
            ("curriculum.n", c.n >= 1, "must be >= 1"),
            ("curriculum.m_prime", c.m_prime > c.n, "must exceed curriculum.n"),
            ("curriculum.zero_norm_epsilon", c.zero_norm_epsilon > 0, "must be > 0"),
            ("curriculum.episodes_per_eval", c.episodes_per_eval >= 1, "must be >= 1"),
            ("total_env_steps", self.total_env_steps >= 0, "must be >= 0"),
            ("seed", 0 <= self.seed < 2**63, "must be a non-negative 63-bit integer"),
            ("eval_interval", self.eval_interval >= 0, "must be >= 0"),
            ("eval_episodes", self.eval_episodes >= 1, "must be >= 1"),
        ]
        for name, ok, msg in checks:
            if not ok:
                raise ConfigFieldError(name, msg)

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "ExperimentConfig":
        """Copy with top-level or dotted (``"curriculum.p"``) fields changed."""
        doc = self.to_dict()
        for key, value in changes.items():
            parts = key.replace("__", ".").split(".")
            node = doc
            for p in parts[:-1]:
                node = node[p]
            if parts[-1] not in node:
                raise ConfigFieldError(key, "unknown field")
            node[parts[-1]] = value
        return ExperimentConfig.from_dict(doc)

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        if not isinstance(doc, dict):
            raise ConfigFieldError("<root>", "config must be a JSON object")
        sections = {"env": EnvSettings, "learner": LearnerSettings,
                    "curriculum": CurriculumSettings, "strategy": StrategySettings}
        kwargs = {}
        top_fields = {f.name for f in dataclasses.fields(cls)}
        for key, value in doc.items():
            if key not in top_fields:
                raise ConfigFieldError(key, "unknown field")
            if key in sections:
                kwargs[key] = _build_section(key, sections[key], value)
            else:
                kwargs[key] = value
        try:
            return cls(**kwargs)
        except TypeError as exc:
            raise ConfigFieldError("<root>", str(exc)) from exc

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigFieldError("<root>", f"not valid JSON ({exc})") from exc
        return cls.from_dict(doc)

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def _build_section(name: str, klass, value):
    if not isinstance(value, dict):
        raise ConfigFieldError(name, "must be an object")
    allowed = {f.name: f for f in dataclasses.fields(klass)}
    for key, v in value.items():
        if key not in allowed:
            raise ConfigFieldError(f"{name}.{key}", "unknown field")
        expected = allowed[key].type
        if v is not None and "float" in str(expected) and not isinstance(v, (int, float)):
            raise ConfigFieldError(f"{name}.{key}", f"expected a number, got {v!r}")
        if "int" == str(expected) and (not isinstance(v, int) or isinstance(v, bool)):
            raise ConfigFieldError(f"{name}.{key}", f"expected an integer, got {v!r}")
    return klass(**value)
