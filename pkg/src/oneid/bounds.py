"""Lower and upper bound evaluators for positive and negative instances.

Every formula here is constant-free: the universal constants hidden by the
asymptotic statements are not applied.  ``solve_lb_program`` minimizes

    f(p) = max( L * sum_j p_j / D_j^2 ,  max_j g(p_j) * S_j )

over ``{sum_j p_j >= 1/2, 0 <= p <= 1}``, where ``j`` runs over the ``m``
arms above the threshold (ranked by mean), ``L = ln(1/delta)``,
``D_j`` is the gap of arm ``j`` to ``mu0``, ``g(p) = p / (1 + ln(1/p))`` and
``S_j = sum_a 1 / max(gap(a, mu0)^2, gap(a, j)^2)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numba
import numpy as np
from scipy.optimize import minimize_scalar

from .core import BanditInstance, InstanceError, classify, complexity_terms

PROGRAM_CONSTANT = 1.0 / 3200.0


def _positive(instance: BanditInstance):
    cls = classify(instance)
    if not cls.is_positive:
        raise InstanceError(f"needs a positive instance, got {cls.kind.value}")
    return cls


@dataclass(frozen=True)
class ProgramData:
    """Coefficients of the lower-bound program for one instance and delta."""

    c3: np.ndarray  # ln(1/delta) / D_j^2
    s: np.ndarray  # S_j
    m: int


def program_data(instance: BanditInstance, delta: float) -> ProgramData:
    _positive(instance)
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    prof = complexity_terms(instance)
    mu0 = instance.mu0
    means = np.asarray(instance.means)
    m = prof.m
    c3 = np.empty(m)
    s = np.empty(m)
    for j in range(1, m + 1):
        muj = instance.means[prof.ranked_arm(j)]
        c3[j - 1] = math.log(1.0 / delta) / (muj - mu0) ** 2
        s[j - 1] = np.sum(1.0 / np.maximum((means - mu0) ** 2, (means - muj) ** 2))
    return ProgramData(c3, s, m)


def g(p):
    """``p / (1 + ln(1/p))`` with value 0 at ``p = 0``."""
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore"):
        out = np.where(p > 0, p / (1.0 + np.log(1.0 / np.where(p > 0, p, 1.0))), 0.0)
    return out


def g_prime(p):
    p = np.asarray(p, dtype=float)
    safe = np.where(p > 0, p, 1.0)
    u = 1.0 / (1.0 + np.log(1.0 / safe))
    return np.where(p > 0, u + u * u, 0.0)


def lb_objective(data: ProgramData, p) -> np.ndarray:
    """``f`` evaluated at one point (shape ``(m,)``) or a batch (shape ``(n, m)``)."""
    p = np.asarray(p, dtype=float)
    c3 = p @ data.c3
    c5 = (g(p) * data.s).max(axis=-1)
    return np.maximum(c3, c5)


def project(p: np.ndarray, total: float = 0.5) -> np.ndarray:
    """Euclidean projection of rows of ``p`` onto ``{sum >= total, 0 <= p <= 1}``."""
    p = np.atleast_2d(np.asarray(p, dtype=float))
    out = np.clip(p, 0.0, 1.0)
    short = out.sum(axis=1) < total
    if short.any():
        rows = p[short]
        lo = np.zeros(rows.shape[0])
        hi = np.full(rows.shape[0], total + 1.0 + np.abs(rows).max())
        for _ in range(100):
            mid = 0.5 * (lo + hi)
            s = np.clip(rows + mid[:, None], 0.0, 1.0).sum(axis=1)
            low = s < total
            lo = np.where(low, mid, lo)
            hi = np.where(low, hi, mid)
        out[short] = np.clip(rows + hi[:, None], 0.0, 1.0)
    return out


@numba.njit(cache=True)
def _g1(p):
    return p / (1.0 + math.log(1.0 / p)) if p > 0.0 else 0.0


@numba.njit(cache=True)
def _gp1(p):
    if p <= 0.0:
        return 0.0
    u = 1.0 / (1.0 + math.log(1.0 / p))
    return u + u * u


@numba.njit(cache=True)
def _f1(c3, s, p):
    v = 0.0
    top = 0.0
    for j in range(p.shape[0]):
        v += p[j] * c3[j]
        w = _g1(p[j]) * s[j]
        if w > top:
            top = w
    return max(v, top)


@numba.njit(cache=True)
def _project1(p, total):
    # exact projection onto {sum >= total, 0 <= p <= 1}: clip, or shift by the
    # lambda solving sum(clip(p + lambda, 0, 1)) = total on its piecewise-linear path
    m = p.shape[0]
    out = np.minimum(np.maximum(p, 0.0), 1.0)
    if out.sum() >= total:
        return out
    bps = np.sort(np.concatenate((-p, 1.0 - p)))
    prev_l = bps[0]
    prev_s = 0.0
    for t in range(bps.shape[0]):
        lam = bps[t]
        cur = 0.0
        for j in range(m):
            cur += min(max(p[j] + lam, 0.0), 1.0)
        if cur >= total:
            if cur == prev_s:
                lam_star = lam
            else:
                lam_star = prev_l + (total - prev_s) * (lam - prev_l) / (cur - prev_s)
            for j in range(m):
                out[j] = min(max(p[j] + lam_star, 0.0), 1.0)
            return out
        prev_l = lam
        prev_s = cur
    return np.ones(m)


@numba.njit(cache=True)
def _sg_run(c3, s, start, iterations, step):
    m = start.shape[0]
    p = _project1(start, 0.5)
    best = _f1(c3, s, p)
    best_p = p.copy()
    checkpoint = best
    grad = np.zeros(m)
    for i in range(1, iterations + 1):
        v = 0.0
        top = -1.0
        jt = 0
        for j in range(m):
            v += p[j] * c3[j]
            w = _g1(p[j]) * s[j]
            if w > top:
                top = w
                jt = j
        grad[:] = 0.0
        if v >= top:
            grad[:] = c3
        else:
            grad[jt] = _gp1(p[jt]) * s[jt]
        nrm = math.sqrt((grad * grad).sum())
        if nrm == 0.0:
            nrm = 1.0
        p = _project1(p - (step / math.sqrt(i)) * grad / nrm, 0.5)
        f = _f1(c3, s, p)
        if f < best:
            best = f
            best_p[:] = p
        if i == int(0.9 * iterations):
            checkpoint = best
    return best, best_p, checkpoint


@dataclass
class SolverResult:
    value: float
    p: np.ndarray
    converged: bool
    iterations: int


def subgradient_solve(
    data: ProgramData, *, restarts: int = 10, iterations: int = 10_000, step: float = 0.25, seed: int = 0, tol: float = 1e-4
) -> SolverResult:
    """Projected subgradient descent with normalized steps ``step / sqrt(i)`` and random restarts.

    The best iterate over all restarts is returned.  ``converged`` reports
    whether the best value stopped improving by more than ``tol`` (relative)
    over the last tenth of the run.
    """
    rng = np.random.default_rng(seed)
    m = data.m
    starts = rng.dirichlet(np.ones(m), size=restarts) * rng.uniform(0.5, 1.0, size=(restarts, 1))
    starts[0] = 0.5 / m
    best_val, best_p, gain = math.inf, None, 0.0
    for r in range(restarts):
        v, p, chk = _sg_run(data.c3, data.s, starts[r], iterations, step)
        if v < best_val:
            best_val, best_p = float(v), p
            gain = (chk - v) / max(v, 1e-300)
    return SolverResult(best_val, best_p, gain <= tol, iterations)


def _slice_points(m: int, step: float) -> np.ndarray:
    n = int(round(0.5 / step))
    if m == 1:
        return np.array([[0.5]])
    if m == 2:
        a = np.arange(n + 1) * step
        return np.stack([a, 0.5 - a], axis=1)
    if m == 3:
        i, j = np.meshgrid(np.arange(n + 1), np.arange(n + 1), indexing="ij")
        keep = i + j <= n
        a, b = i[keep] * step, j[keep] * step
        return np.stack([a, b, np.clip(0.5 - a - b, 0.0, None)], axis=1)
    raise ValueError("grid search supports m <= 3")


def grid_search_lb_program(data: ProgramData, step: float = 1e-3) -> Tuple[float, np.ndarray]:
    """Dense search over the slice ``sum p = 1/2``.

    ``f`` is nondecreasing in every coordinate, so some minimizer lies on
    this slice.
    """
    pts = _slice_points(data.m, step)
    best, arg = math.inf, None
    for lo in range(0, pts.shape[0], 200_000):
        chunk = pts[lo : lo + 200_000]
        vals = lb_objective(data, chunk)
        k = int(vals.argmin())
        if vals[k] < best:
            best, arg = float(vals[k]), chunk[k]
    return best, arg


def gamma0(data: ProgramData) -> float:
    m = data.m
    j = np.arange(1, m + 1)
    denom = (1.0 + math.log(m + 1)) * (1.0 + math.log(200.0) + math.log(m))
    return float(np.min(0.5 * data.c3 + data.s / (2.0 * j) / denom))


def dual_point(data: ProgramData) -> Tuple[float, np.ndarray, float]:
    """``(alpha, beta, gamma)`` at the certificate point."""
    m = data.m
    j = np.arange(1, m + 1)
    beta = (1.0 / (2.0 * j)) / (2.0 * np.sum(1.0 / (2.0 * j)))
    return 0.5, beta, gamma0(data)


def dual_feasible_value(instance: BanditInstance, delta: float) -> float:
    """``gamma0 / 4``, the certified lower bound on the program's optimum."""
    return gamma0(program_data(instance, delta)) / 4.0


def lagrangian_dual_value(data: ProgramData, alpha: float, beta: np.ndarray, gam: float) -> float:
    """Exact dual function ``min_{p in [0,1]^m, v >= 0} L`` at the given multipliers.

    Returns ``-inf`` when the coefficient of ``v`` is negative.
    """
    if 1.0 - alpha - float(np.sum(beta)) < -1e-12:
        return -math.inf
    total = gam / 2.0
    for j in range(data.m):
        a1 = alpha * data.c3[j] - gam
        b1 = beta[j] * data.s[j]

        def phi(p, a1=a1, b1=b1):
            return a1 * p + b1 * float(g(p))

        res = minimize_scalar(phi, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
        total += min(phi(0.0), phi(1.0), float(res.fun))
    return total


def closed_form_lower_bound(instance: BanditInstance, delta: float) -> float:
    return min(closed_form_terms(instance, delta).values())


def closed_form_terms(instance: BanditInstance, delta: float) -> Dict[int, float]:
    """Per-rank ``ln(1/delta)/D_j^2 + H(j)/ln^2(m+1)``."""
    _positive(instance)
    prof = complexity_terms(instance)
    m = prof.m
    out = {}
    for j in range(1, m + 1):
        d = instance.means[prof.ranked_arm(j)] - instance.mu0
        out[j] = math.log(1.0 / delta) / d**2 + prof.h_of_j[j] / math.log(m + 1) ** 2
    return out


@dataclass
class LowerBoundReport:
    closed_form: float
    program_value: float
    argmin: List[float]
    dual_value: float
    lagrangian_value: float
    per_j_terms: Dict[int, Tuple[float, float]]
    converged: bool
    valid_regime: bool
    multiplier: float = 1.0
    constant_free: bool = True

    def scaled(self) -> Dict[str, float]:
        """Program value and certificate after applying ``multiplier``."""
        return {
            "program_value": self.multiplier * self.program_value,
            "dual_value": self.multiplier * self.dual_value,
        }


def solve_lb_program(
    instance: BanditInstance,
    delta: float,
    tol: float = 1e-4,
    *,
    restarts: int = 10,
    iterations: int = 10_000,
    seed: int = 0,
    with_constant: bool = False,
) -> LowerBoundReport:
    if tol <= 0:
        raise ValueError("tol must be positive")
    data = program_data(instance, delta)
    res = subgradient_solve(data, restarts=restarts, iterations=iterations, seed=seed, tol=tol)
    alpha, beta, gam = dual_point(data)
    prof = complexity_terms(instance)
    m = data.m
    per_j = {j: (float(data.c3[j - 1]), prof.h_of_j[j]) for j in range(1, m + 1)}
    return LowerBoundReport(
        closed_form=closed_form_lower_bound(instance, delta),
        program_value=res.value,
        argmin=[float(x) for x in res.p],
        dual_value=gam / 4.0,
        lagrangian_value=lagrangian_dual_value(data, alpha, beta, gam),
        per_j_terms=per_j,
        converged=res.converged,
        valid_regime=delta < min(1e-8, 1.0 / (64.0 * m * m)),
        multiplier=PROGRAM_CONSTANT if with_constant else 1.0,
    )


def t_j_a(instance: BanditInstance, j: int, a: int, p: float) -> int:
    """``ceil(1 / (200 max(D_j^2, gap(a, j)^2) (1 + ln(1/p))))`` for rank ``j`` and arm ``a``."""
    prof = complexity_terms(instance)
    if not (1 <= j <= prof.m):
        raise ValueError(f"rank j must lie in 1..{prof.m}")
    if not (0 <= a < instance.K):
        raise IndexError(f"arm {a} outside 0..{instance.K - 1}")
    if not (0.0 < p <= 1.0):
        raise ValueError("p must lie in (0, 1]")
    muj = instance.means[prof.ranked_arm(j)]
    d2 = max((muj - instance.mu0) ** 2, (instance.means[a] - muj) ** 2)
    if d2 == 0.0:
        raise ZeroDivisionError("both gaps vanish")
    return math.ceil(1.0 / (200.0 * d2 * (1.0 + math.log(1.0 / p))))


@dataclass
class UpperBoundReport:
    kind: str  # "positive" | "negative"
    per_j: Dict[int, float] = field(default_factory=dict)
    positive: Optional[float] = None
    negative: Optional[float] = None
    constant_free: bool = True
    note: str = "universal constants omitted; compare shapes, not levels"

    @property
    def value(self) -> float:
        return self.positive if self.kind == "positive" else self.negative


def upper_bound_formula(instance: BanditInstance, delta: float) -> UpperBoundReport:
    """Constant-free upper-bound expressions for the instance's class."""
    cls = classify(instance)
    if cls.is_boundary:
        raise InstanceError("no upper bound for boundary instances")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    K = instance.K
    lnK = math.log(K)
    prof = complexity_terms(instance)
    if cls.is_negative:
        h = prof.h1_neg
        return UpperBoundReport("negative", negative=lnK * h * math.log(h / delta))
    per_j = {}
    for j in range(1, prof.m + 1):
        d2 = (instance.means[prof.ranked_arm(j)] - instance.mu0) ** 2
        if d2 == 0.0 or math.isinf(prof.h_of_j[j]):
            per_j[j] = math.inf
            continue
        per_j[j] = lnK * (
            math.log(1.0 / delta) / d2 + lnK**3 * (math.log(4.0 * K) + math.log2(1.0 / d2)) * prof.h_of_j[j]
        )
    finite = [v for v in per_j.values() if math.isfinite(v)]
    return UpperBoundReport("positive", per_j=per_j, positive=min(finite) if finite else math.inf)
