import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from oneid.bounds import (
    PROGRAM_CONSTANT,
    _project1,
    closed_form_lower_bound,
    closed_form_terms,
    dual_feasible_value,
    dual_point,
    g,
    g_prime,
    gamma0,
    grid_search_lb_program,
    lagrangian_dual_value,
    lb_objective,
    program_data,
    project,
    solve_lb_program,
    subgradient_solve,
    t_j_a,
    upper_bound_formula,
)
from oneid.core import BanditInstance, InstanceError, complexity_terms

# oracle values computed with mpmath at 30 digits
POS = BanditInstance((0.9, 0.5), 0.7)


def random_positive(rng, m_max=3, k_max=6):
    K = int(rng.integers(2, k_max + 1))
    m = int(rng.integers(1, min(m_max, K) + 1))
    mu0 = 0.5
    above = mu0 + rng.uniform(0.02, 0.5, m)
    below = mu0 - rng.uniform(0.02, 0.5, K - m)
    return BanditInstance(tuple(np.concatenate([above, below])), mu0)


def test_closed_form_example():
    assert closed_form_lower_bound(POS, 0.01) == pytest.approx(180.172035306127528, rel=1e-12)
    assert closed_form_terms(POS, 0.01).keys() == {1}
    assert closed_form_lower_bound(POS, 0.001) > closed_form_lower_bound(POS, 0.01)


def test_program_example():
    rep = solve_lb_program(POS, 0.01)
    assert rep.program_value == pytest.approx(0.5 * math.log(100) / 0.04, rel=1e-9)
    assert rep.argmin == pytest.approx([0.5])
    assert rep.dual_value == pytest.approx(14.7574600900195502, rel=1e-12)
    assert gamma0(program_data(POS, 0.01)) == pytest.approx(59.0298403600782009, rel=1e-12)
    assert rep.converged and not rep.valid_regime
    # second constraint at the optimum: 0.5/(1+ln 2) * 31.25
    assert 0.5 / (1 + math.log(2)) * 31.25 == pytest.approx(9.22837670546, rel=1e-10)


def test_dual_function_properties():
    data = program_data(POS, 0.01)
    alpha, beta, gam = dual_point(data)
    assert alpha == 0.5 and beta.sum() == pytest.approx(0.5)
    lag = lagrangian_dual_value(data, alpha, beta, gam)
    assert gam / 4 <= lag <= solve_lb_program(POS, 0.01).program_value + 1e-9
    assert lagrangian_dual_value(data, 0.9, np.array([0.5]), gam) == -math.inf


def test_valid_regime_and_constant():
    rep = solve_lb_program(POS, 1e-9, with_constant=True)
    assert rep.valid_regime
    assert rep.scaled()["program_value"] == pytest.approx(rep.program_value * PROGRAM_CONSTANT)


def test_requires_positive():
    with pytest.raises(InstanceError):
        solve_lb_program(BanditInstance((0.5, 0.3), 0.7), 0.1)
    with pytest.raises(InstanceError):
        closed_form_lower_bound(BanditInstance((0.7, 0.3), 0.7), 0.1)
    with pytest.raises(ValueError):
        solve_lb_program(POS, 0.1, tol=0)


def test_t_j_a():
    assert t_j_a(POS, 1, 1, 0.5) == 1
    assert t_j_a(POS, 1, 1, 1.0) == 1
    close = BanditInstance((0.52, 0.5), 0.51)
    assert t_j_a(close, 1, 1, 0.5) == 8
    assert t_j_a(close, 1, 1, 1.0) == 13
    vals = [t_j_a(close, 1, 1, p) for p in (1.0, 0.5, 0.1, 0.01)]
    assert vals == sorted(vals, reverse=True)
    with pytest.raises(ValueError):
        t_j_a(close, 2, 1, 0.5)
    with pytest.raises(ValueError):
        t_j_a(close, 1, 1, 0.0)


def test_upper_bound_examples():
    neg = upper_bound_formula(BanditInstance((0.5, 0.3), 0.7), 0.1)
    assert neg.kind == "negative"
    assert neg.value == pytest.approx(278.894337822495205, rel=1e-12)
    pos = upper_bound_formula(POS, 0.01)
    lnK = math.log(2)
    expect = lnK * (math.log(100) / 0.04 + lnK**3 * (math.log(8) + math.log2(25)) * 31.25)
    assert pos.value == pytest.approx(expect)
    assert pos.constant_free and "constants" in pos.note
    with pytest.raises(InstanceError):
        upper_bound_formula(BanditInstance((0.7, 0.3), 0.7), 0.1)


def test_upper_terms_dominate_lower_terms():
    rng = np.random.default_rng(11)
    for _ in range(100):
        inst = random_positive(rng, m_max=4, k_max=10)
        ub = upper_bound_formula(inst, 0.05)
        lb = closed_form_terms(inst, 0.05)
        prof = complexity_terms(inst)
        lnK = math.log(inst.K)
        for j, lo in lb.items():
            d2 = (inst.means[prof.ranked_arm(j)] - inst.mu0) ** 2
            poly = lnK**3 * (math.log(4 * inst.K) + math.log2(1 / d2)) * math.log(prof.m + 1) ** 2
            assert ub.per_j[j] >= lnK * min(1.0, poly) * lo * (1 - 1e-12)


def test_weak_duality_sandwich():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inst = random_positive(rng)
        data = program_data(inst, 0.05)
        rep = solve_lb_program(inst, 0.05, restarts=4, iterations=4000)
        uniform = lb_objective(data, np.full(data.m, 0.5 / data.m))
        assert rep.dual_value <= rep.program_value + 1e-9
        assert rep.program_value <= uniform + 1e-9
        assert rep.lagrangian_value <= rep.program_value * (1 + 1e-6)
        m = data.m
        floor = rep.closed_form / (8 * (1 + math.log(m + 1)) * (1 + math.log(200) + math.log(m)))
        assert rep.dual_value >= floor * (1 - 1e-12)


def test_grid_and_solver_agree():
    rng = np.random.default_rng(8)
    for _ in range(8):
        inst = random_positive(rng)
        data = program_data(inst, 0.05)
        grid, _ = grid_search_lb_program(data, step=2e-3)
        sol = subgradient_solve(data, restarts=4, iterations=4000)
        assert sol.value <= grid * (1 + 1e-9)
        assert sol.value >= grid * 0.99


def test_delta_monotone_and_gap_scaling():
    inst = BanditInstance((0.9, 0.75, 0.6, 0.2), 0.5)
    v1 = solve_lb_program(inst, 0.1, restarts=3, iterations=3000).program_value
    v2 = solve_lb_program(inst, 0.01, restarts=3, iterations=3000).program_value
    assert v2 >= v1
    half = BanditInstance(tuple(0.5 + (x - 0.5) / 2 for x in inst.means), 0.5)
    assert dual_feasible_value(half, 0.05) == pytest.approx(4 * dual_feasible_value(inst, 0.05), rel=1e-12)


def test_g_and_derivative():
    assert g(0.0) == 0.0 and g(1.0) == 1.0
    p = np.linspace(0.01, 0.99, 50)
    h = 1e-6
    assert np.allclose(g_prime(p), (g(p + h) - g(p - h)) / (2 * h), rtol=1e-5)


def test_objective_is_convex():
    rng = np.random.default_rng(2)
    for _ in range(5):
        data = program_data(random_positive(rng), 0.05)
        p = rng.uniform(0, 1, (2000, data.m))
        q = rng.uniform(0, 1, (2000, data.m))
        lam = rng.uniform(0, 1, (2000, 1))
        mid = lb_objective(data, lam * p + (1 - lam) * q)
        chord = lam[:, 0] * lb_objective(data, p) + (1 - lam[:, 0]) * lb_objective(data, q)
        assert np.all(mid <= chord + 1e-9 * (1 + np.abs(chord)))


@settings(max_examples=200)
@given(arrays(np.float64, st.integers(1, 5), elements=st.floats(-2, 2)))
def test_projection_matches_bisection_oracle(p):
    exact = _project1(p, 0.5)
    oracle = project(p)[0]
    assert np.allclose(exact, oracle, atol=1e-9)
    assert exact.sum() >= 0.5 - 1e-9 and exact.min() >= 0 and exact.max() <= 1
