import numpy as np
import pytest
from hypothesis import given, strategies as st

from uedlab.core import (
    ConfigurationError,
    LevelParams,
    PreconditionError,
    Trajectory,
    TrajectoryStep,
    discounted_return,
    make_env,
)


def traj_from_rewards(rewards, d=2):
    n = len(rewards)
    return Trajectory(np.zeros((n, d)), np.zeros(n, dtype=int), rewards, np.zeros(n))


@pytest.mark.parametrize("rewards, gamma, expected", [
    ((1, 1, 1), 1.0, 3.0),
    ((1, 0, 0), 0.5, 1.0),
    ((0, 0, 1), 0.9, 0.81),
])
def test_discounted_return_examples(rewards, gamma, expected):
    assert discounted_return(traj_from_rewards(rewards), gamma) == pytest.approx(expected, abs=1e-12)


def test_discounted_return_empty_trajectory():
    with pytest.raises(PreconditionError):
        discounted_return(traj_from_rewards([]), 0.9)


@given(st.lists(st.floats(-10, 10), min_size=1, max_size=30), st.floats(-5, 5),
       st.floats(0.01, 1.0))
def test_discounted_return_is_linear(rewards, c, gamma):
    base = discounted_return(traj_from_rewards(rewards), gamma)
    scaled = discounted_return(traj_from_rewards([c * r for r in rewards]), gamma)
    assert scaled == pytest.approx(c * base, abs=1e-9)


def test_trajectory_step_view_roundtrip():
    steps = [TrajectoryStep(np.ones(3), 1, 0.0, 0.5, False),
             TrajectoryStep(np.zeros(3), 2, 1.0, 0.2, True)]
    traj = Trajectory.from_steps(steps, bootstrap_value=7.0)
    assert traj.terminal and traj.bootstrap_value == 0.0
    back = traj.steps
    assert [s.action for s in back] == [1, 2]
    assert [s.terminal for s in back] == [False, True]


def test_only_final_step_may_be_terminal():
    steps = [TrajectoryStep(np.ones(3), 1, 0.0, 0.5, True),
             TrajectoryStep(np.zeros(3), 2, 1.0, 0.2, False)]
    with pytest.raises(PreconditionError):
        Trajectory.from_steps(steps)


def test_level_params_seed_range():
    LevelParams("maze-5x5-b3", (0, 1), 2**64 - 1)
    with pytest.raises(PreconditionError):
        LevelParams("maze-5x5-b3", (0, 1), 2**64)


def test_make_env_unknown_family():
    with pytest.raises(ConfigurationError):
        make_env("bipedal-walker")
    env = make_env("maze-5x5-b3")
    obs = env.reset(LevelParams("maze-5x5-b3", (0, 24), 0))
    assert obs.shape == (env.obs_dim,)
