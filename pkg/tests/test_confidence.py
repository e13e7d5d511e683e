import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from oneid.confidence import (
    BoundKind,
    ScheduleOverflow,
    _engine_phase,
    bound,
    dyadic_exponent,
    envelope,
    exploitation_budget,
    exploration_budget,
    lil_radius_below,
    lil_threshold,
    lil_threshold_sufficient,
    none_phase,
    phase_params,
    radius,
)

# values computed with mpmath at 30 digits


def test_dyadic_exponent():
    assert [dyadic_exponent(t) for t in (1, 2, 3, 4, 5, 8, 9)] == [1, 1, 2, 2, 3, 3, 4]
    with pytest.raises(ValueError):
        dyadic_exponent(0)


def test_radius_values():
    assert radius(1, 0.5) == pytest.approx(2.35482004503094938, rel=1e-12)
    assert radius(4, 0.1) == pytest.approx(1.48020718730079837, rel=1e-12)
    assert radius(5, 0.1) == pytest.approx(1.82304481145410537, rel=1e-12)
    assert radius(1000, 0.01) == pytest.approx(0.14241608935648384, rel=1e-12)
    assert radius(0, 0.1) == math.inf
    with pytest.raises(ValueError):
        radius(3, 1.0)


def test_envelope_matches_radius():
    for t in (1, 2, 7, 100):
        assert envelope(t, 0.05) == pytest.approx(t * radius(t, 0.05))


def test_bound_examples():
    assert bound(BoundKind.EXPLORATION_LCB, 1.0, 1, 0.5, C=2) == pytest.approx(-3.70964009006189876)
    assert bound(BoundKind.EXPLORATION_UCB, 0.0, 0, 0.1) == math.inf
    assert bound(BoundKind.EXPLOIT_LCB, 0.7, 4, 0.1) == pytest.approx(0.7 - 1.48020718730079837)
    assert bound(BoundKind.EXPLOIT_UCB, 0.7, 4, 0.1, C=5) == pytest.approx(0.7 + 1.48020718730079837)
    with pytest.raises(ValueError):
        bound(BoundKind.EXPLORATION_LCB, 0.0, 1, 0.1, C=1.0)


def test_phase_params():
    p = phase_params(1)
    assert (p.delta_k, p.beta_k, p.alpha_k) == (1 / 3, 2.0, 5.0)
    p = phase_params(3)
    assert (p.delta_k, p.beta_k, p.alpha_k) == (1 / 27, 8.0, 125.0)
    with pytest.raises(ValueError):
        phase_params(0)
    with pytest.raises(ScheduleOverflow):
        phase_params(61)


def test_budgets():
    assert exploration_budget(1, 4, 1.01) == pytest.approx(31.2800784083379337, rel=1e-12)
    assert exploration_budget(2, 4, 1.01) == pytest.approx(80.3141708464679834, rel=1e-12)
    assert exploitation_budget(1, 4, 0.05, 2.0) == pytest.approx(368.887945411393630, rel=1e-12)
    assert exploitation_budget(1, 4, 0.05, 1.01) == pytest.approx(2372702.02040390003, rel=1e-9)
    for k in range(1, 20):
        assert exploration_budget(k + 1, 6, 1.3) > exploration_budget(k, 6, 1.3)


def test_exploitation_budget_decreasing_in_C():
    grid = [1.0 + i / 100 for i in range(1, 201)]
    vals = [exploitation_budget(2, 8, 0.1, c) for c in grid]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_engine_schedule_matches_exact_schedule():
    for k in range(1, 30):
        ee, et, ee_lim, et_lim = _engine_phase(k, math.log(0.05), 1.2, 7)
        assert math.exp(ee) == pytest.approx(phase_params(k).delta_k / 7, rel=1e-12)
        assert math.exp(et) == pytest.approx(0.05 / (phase_params(k).alpha_k * 7), rel=1e-12)
        assert ee_lim + 1 == pytest.approx(exploration_budget(k, 7, 1.2), rel=1e-12)
        assert et_lim + 1 == pytest.approx(exploitation_budget(k, 7, 0.05, 1.2), rel=1e-12)
    # far phases stay finite in log space
    ee, et, _, _ = _engine_phase(5000, math.log(0.05), 1.2, 7)
    assert math.isfinite(ee) and math.isfinite(et)


def test_none_phase():
    assert none_phase(0.1) == 4  # 3^-4 = 1/81 <= 1/30 < 1/27
    assert none_phase(0.99) == 2
    assert all(3.0 ** -none_phase(d) <= d / 3 for d in (0.5, 0.05, 1e-6))


def test_lil_threshold_examples():
    assert lil_threshold(0.5, 2, 0.1, 1.0) == pytest.approx(510.324144937308731, rel=1e-12)
    assert lil_threshold_sufficient(511, 0.5, 2, 0.1, 1.0)
    assert lil_radius_below(511, 0.5, 2, 0.1, 1.0)
    assert not lil_threshold_sufficient(10, 0.5, 2, 0.1, 1.0)
    with pytest.raises(ValueError):
        lil_threshold_sufficient(10, 0.5, 2, 0.7, 1.0)


@given(st.integers(1, 2**20), st.floats(1e-9, 0.99), st.floats(1e-9, 0.99))
def test_radius_monotone_in_delta(t, d1, d2):
    lo, hi = sorted((d1, d2))
    if lo < hi:
        assert radius(t, hi) < radius(t, lo)


@given(st.integers(1, 2**20), st.floats(1e-9, 0.99))
def test_radius_doubling(t, d):
    assert radius(2 * t, d) <= radius(t, d)


@given(
    st.floats(1e-3, 1.0),
    st.integers(2, 1024),
    st.floats(1e-12, 0.5),
    st.floats(1.0, 5.0),
    st.floats(1.0, 100.0),
)
def test_threshold_implication(D, K, d, C, stretch):
    t = math.floor(lil_threshold(D, K, d, C) * stretch) + 1
    if lil_threshold_sufficient(t, D, K, d, C):
        assert lil_radius_below(t, D, K, d, C)
