from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from breadthdepth.errors import ParameterError, ValidationError
from breadthdepth.metrics import (
    PassCurve,
    average_gain,
    diversity_profile,
    format_lift,
    lift,
    pass_at_k_unbiased,
    pass_curve,
    pass_empirical,
    problem_pass,
)
from helpers import make_pool, make_record, pass_at_k_enumerated


def test_pass_at_k_examples():
    assert pass_at_k_unbiased(4, 2, 2) == pytest.approx(5 / 6)
    assert pass_at_k_unbiased(4, 2, 2) == float(pass_at_k_enumerated(4, 2, 2))
    assert pass_at_k_unbiased(16, 0, 8) == 0.0
    assert pass_at_k_unbiased(16, 16, 1) == 1.0


def test_pass_at_k_rejects_bad_budget():
    with pytest.raises(ParameterError):
        pass_at_k_unbiased(4, 1, 5)
    with pytest.raises(ParameterError):
        pass_at_k_unbiased(4, 5, 1)


@given(n=st.integers(1, 40), data=st.data())
def test_pass_at_k_monotone(n, data):
    c = data.draw(st.integers(0, n))
    k = data.draw(st.integers(1, n))
    v = pass_at_k_unbiased(n, c, k)
    assert 0.0 <= v <= 1.0
    if k < n:
        assert pass_at_k_unbiased(n, c, k + 1) >= v
    if c < n:
        assert pass_at_k_unbiased(n, c + 1, k) >= v


def test_pass_empirical():
    t, f = make_record(0, [1], correct=True), make_record(1, [1], correct=False)
    assert pass_empirical([f, t])
    assert not pass_empirical([f, f])
    assert not pass_empirical([])
    with pytest.raises(ValidationError, match="rollout_id=5"):
        pass_empirical([make_record(5, [1])])


def test_lift_reference_rows():
    assert lift(0.6201, 0.4385) == pytest.approx(0.4141, abs=5e-5)
    assert lift(0.6377, 0.9004) == pytest.approx(-0.2918, abs=5e-5)
    assert lift(0.3, 0.3) == 0.0
    assert format_lift(lift(0.6201, 0.4385)) == "41.41%"
    with pytest.raises(ParameterError):
        lift(0.5, 0.0)


@given(a=st.floats(0.01, 1.0), b=st.floats(0.01, 1.0), t=st.floats(0.1, 10.0))
def test_lift_sign_and_scale(a, b, t):
    assert (lift(a, b) > 0) == (a > b)
    assert lift(t * a, t * b) == pytest.approx(lift(a, b), rel=1e-9, abs=1e-12)


def test_average_gain():
    curve = PassCurve((4, 8, 16), (0.9, 0.7, 0.9))
    assert average_gain(curve, 8, 16) == pytest.approx(0.025)
    assert average_gain(curve, 4, 16) == 0.0
    with pytest.raises(ParameterError):
        average_gain(curve, 16, 16)


def test_average_gain_mixture_oracle():
    # closed form 1 - 0.8**16, cross-checked by Monte Carlo below
    p16 = 1 - 0.8 ** 16
    rng = np.random.default_rng(0)
    mc = (rng.random((1_000_000, 16)) < 0.2).any(axis=1).mean()
    assert abs(mc - p16) < 4 * np.sqrt(p16 * (1 - p16) / 1_000_000)
    curve = PassCurve((1, 16), (0.2, p16))
    assert average_gain(curve, 1, 16) == pytest.approx(0.05145, abs=1e-4)


def _pool_with(correct_count, n=16):
    return make_pool([[i] for i in range(n)], correct=[i < correct_count for i in range(n)])


def test_profile_all_correct_is_zero():
    prof = diversity_profile([_pool_with(16)])
    assert prof.gains == (0.0,) * 5
    assert prof.budgets == (1, 2, 4, 6, 8)


def test_profile_single_correct_is_flat():
    # c = 1: pass@K = K/16 exactly, so every average gain equals 1/16
    prof = diversity_profile([_pool_with(1)])
    assert all(g > 0 for g in prof.gains)
    assert np.allclose(prof.gains, 1 / 16, atol=1e-15)
    assert all(a >= b - 1e-15 for a, b in zip(prof.gains, prof.gains[1:]))


def test_profile_half_correct_k8():
    prof = diversity_profile([_pool_with(8)], budgets=(8,))
    assert prof.gains[0] == pytest.approx((1 / comb(16, 8)) / 8, rel=1e-12)


def test_empirical_prefix_estimator_uses_first_k_by_id():
    pool = make_pool([[1]] * 4, correct=[False, False, True, False])
    assert problem_pass(pool, 2, "empirical-prefix") == 0.0
    assert problem_pass(pool, 3, "empirical-prefix") == 1.0


def test_pass_curve_is_mean_over_problems():
    curve = pass_curve([_pool_with(16), _pool_with(0)], [1, 4])
    assert curve.values == (0.5, 0.5)
