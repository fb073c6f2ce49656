"""Curriculum laboratory for unsupervised environment design on grid mazes."""

from .core import (
    ConfigurationError,
    InvalidDesignError,
    LevelParams,
    NumericalError,
    ParseError,
    PreconditionError,
    Trajectory,
    TrajectoryStep,
    UedError,
    UsageError,
    discounted_return,
    make_env,
)
from .config import ExperimentConfig

__version__ = "0.1.0"
