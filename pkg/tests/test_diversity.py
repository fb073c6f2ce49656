import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from uedlab.core import ConfigurationError, PreconditionError
from uedlab.diversity import (
    DiversityConfig,
    RepresentativeSet,
    buffer_div_score,
    cosine_kernel,
    div_scores,
    greedy_indices,
    level_div_score,
    marginal_gain,
    rep_score,
    select_representatives,
)

O3 = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
finite_vec = arrays(np.float64, 5, elements=st.floats(-1e6, 1e6))


def naive_cosine(a, b):
    return float(np.dot(a, b) / (np.linalg.norm(a) * np.linalg.norm(b)))


# -- kernel ---------------------------------------------------------------------

def test_kernel_examples():
    assert cosine_kernel([3.0, 4.0], [3.0, 4.0]) == pytest.approx(1.0, abs=1e-15)
    assert cosine_kernel([1, 0], [0, 1]) == 0.0
    assert cosine_kernel([1, 0], [1, 1]) == pytest.approx(0.70711, abs=1e-5)
    with pytest.raises(ConfigurationError):
        cosine_kernel([1, 0], [1, 0, 0])


def test_kernel_zero_norm_rules():
    assert cosine_kernel([0, 0], [0, 0]) == 1.0
    assert cosine_kernel([0, 0], [1, 0]) == 0.0
    assert cosine_kernel([1e-12, 0], [1, 0]) == 0.0


@given(finite_vec, finite_vec)
def test_kernel_symmetric_and_bounded(a, b):
    k = cosine_kernel(a, b)
    assert k == cosine_kernel(b, a)
    assert abs(k) <= 1 + 1e-12
    if np.linalg.norm(a) > 1e-3:
        assert cosine_kernel(a, a) == pytest.approx(1.0, abs=1e-12)
    if np.linalg.norm(a) > 1e-3 and np.linalg.norm(b) > 1e-3:
        assert k == pytest.approx(naive_cosine(a, b), abs=1e-9)


# -- representative score ---------------------------------------------------------

def test_rep_score_examples():
    assert rep_score([[1.0, 1.0]], O3) == pytest.approx(2.41421, abs=1e-4)
    assert rep_score(O3, O3) == pytest.approx(3.0, abs=1e-12)
    with pytest.raises(PreconditionError):
        rep_score(np.empty((0, 2)), O3)


def test_marginal_gain_examples():
    assert marginal_gain([1.0, 0.0], [], [[1.0, 0.0]]) == pytest.approx(1.0)
    assert marginal_gain([1.0, 0.0], [[1.0, 1.0]], O3) == pytest.approx(0.29289, abs=1e-4)
    # (2, 0) duplicates (1, 0) in direction, so it improves nothing
    assert marginal_gain([2.0, 0.0], [[1.0, 0.0], [1.0, 1.0]], O3) == pytest.approx(0.0, abs=1e-12)


def _subsets(rng, m):
    """Random nested non-empty index sets S within T, plus an index outside T."""
    perm = rng.permutation(m)
    s = int(rng.integers(1, m - 1))
    t = int(rng.integers(s, m))
    return perm[:s], perm[:t], perm[t]


def test_monotone_and_submodular_fuzz():
    rng = np.random.default_rng(0)
    for _ in range(500):
        O = rng.normal(size=(10, 8))
        S, T, o = _subsets(rng, 10)
        assert rep_score(O[S], O) <= rep_score(O[T], O) + 1e-12
        assert marginal_gain(O[o], O[S], O) >= marginal_gain(O[o], O[T], O) - 1e-12


def _brute_force_opt(O, n):
    return max(rep_score(O[list(c)], O) for c in itertools.combinations(range(len(O)), n))


def test_greedy_bound_brute_force():
    # facility location is only guaranteed the (1 - 1/e) bound for non-negative similarities;
    # observation features are non-negative one-hots, so instances are drawn from [0, 1)
    rng = np.random.default_rng(1)
    for _ in range(100):
        m = int(rng.integers(5, 13))
        n = int(rng.integers(1, 5))
        O = rng.random((m, int(rng.integers(2, 9))))
        greedy = rep_score(O[greedy_indices(O, n)], O)
        assert greedy >= (1 - 1 / math.e) * _brute_force_opt(O, n) - 1e-12


def test_greedy_is_exact_on_singletons():
    chosen = greedy_indices(O3, 1)
    assert chosen == [2]
    singles = [rep_score(O3[[i]], O3) for i in range(3)]
    assert int(np.argmax(singles)) == 2
    assert singles[0] == pytest.approx(1.7071, abs=1e-4)


def test_greedy_ties_and_fill():
    pool = np.array([[1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert greedy_indices(pool, 3) == [0, 1, 2]
    # after picking both distinct directions, the duplicate adds zero gain yet is still chosen
    dup = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 0.0], [0.0, 2.0]])
    assert sorted(greedy_indices(dup, 3)) == [0, 1, 2]


def test_select_representatives():
    cfg = DiversityConfig(n=1, m_prime=4)
    reps = select_representatives(O3, cfg, np.random.default_rng(0), "lvl")
    assert np.array_equal(reps.vectors, [[1.0, 1.0]]) and reps.level_ref == "lvl"
    cfg = DiversityConfig(n=5, m_prime=8)
    assert len(select_representatives(O3, cfg, np.random.default_rng(0))) == 3

    O = np.random.default_rng(2).random((200, 6))
    cfg = DiversityConfig(n=4, m_prime=16)
    a = select_representatives(O, cfg, np.random.default_rng(9))
    b = select_representatives(O, cfg, np.random.default_rng(9))
    assert np.array_equal(a.vectors, b.vectors) and len(a) == 4
    assert all(any(np.array_equal(v, row) for row in O) for v in a.vectors)


def test_config_and_set_validation():
    with pytest.raises(ConfigurationError):
        DiversityConfig(n=8, m_prime=8)
    with pytest.raises(PreconditionError):
        RepresentativeSet("x", np.ones((3, 2)), n=2)
    with pytest.raises(PreconditionError):
        RepresentativeSet("x", [[np.nan, 1.0]], n=2)


# -- level and buffer diversity ---------------------------------------------------

def test_level_div_score_examples():
    assert level_div_score([[1, 0]], [[[0, 1]]]) == 0.0
    assert level_div_score([[1, 0]], [[[1, 0]]]) == pytest.approx(1.0)
    assert level_div_score([[1, 0], [0, 1]], [[[1, 1]]]) == pytest.approx(1.41421, abs=1e-4)
    with pytest.raises(PreconditionError):
        level_div_score([[1, 0]], [])


def test_buffer_div_score_examples():
    assert buffer_div_score([[[1, 0]], [[0, 1]]]) == 0.0
    assert buffer_div_score([[[1, 0]], [[1, 0]]]) == pytest.approx(2.0)
    # (1,1) is matched once against the pooled {(1,0), (0,1)}: 0.7071 + 0.7071 + 0.7071
    assert buffer_div_score([[[1, 0]], [[0, 1]], [[1, 1]]]) == pytest.approx(3 / math.sqrt(2), abs=1e-4)
    with pytest.raises(PreconditionError):
        buffer_div_score([[[1, 0]]])


def test_pooled_scores_match_per_level_definition():
    rng = np.random.default_rng(4)
    for _ in range(50):
        sets = [rng.normal(size=(int(rng.integers(1, 5)), 6)) for _ in range(int(rng.integers(2, 7)))]
        pooled = div_scores(sets)
        for i, s in enumerate(sets):
            others = sets[:i] + sets[i + 1:]
            assert pooled[i] == pytest.approx(level_div_score(s, others), abs=1e-12)


@settings(max_examples=100)
@given(st.integers(0, 2**32), st.floats(1e-3, 1e3))
def test_level_div_score_scale_invariant(seed, scale):
    rng = np.random.default_rng(seed)
    target = rng.normal(size=(3, 5))
    others = [rng.normal(size=(2, 5)) for _ in range(3)]
    base = level_div_score(target, others)
    scaled_target = target * scale
    scaled_others = [others[0] * scale, others[1], others[2] / scale]
    assert level_div_score(scaled_target, scaled_others) == pytest.approx(base, abs=1e-9)
