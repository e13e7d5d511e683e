"""Confidence radii, bound variants, phase schedule and per-phase budgets.

All logarithms are natural unless written ``log2``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

MAX_PHASE = 60
# Engines advance phases whenever every UCB of a bracket sinks below mu0, so a
# copy whose arms are all below the threshold climbs about one phase per few
# draws.  Their schedule is evaluated in log space and only this far larger
# limit is enforced.
ENGINE_MAX_PHASE = 10**9

LN3 = math.log(3.0)
LN5 = math.log(5.0)


class ScheduleOverflow(RuntimeError):
    """Raised when a phase index exceeds :data:`MAX_PHASE`."""


class BoundKind(enum.Enum):
    EXPLORATION_UCB = "ucb_ee"
    EXPLORATION_LCB = "lcb_ee"
    EXPLOIT_UCB = "ucb_et"
    EXPLOIT_LCB = "lcb_et"


def dyadic_exponent(t: int) -> int:
    """``max(ceil(log2 t), 1)`` computed exactly on integers."""
    if t < 1:
        raise ValueError("dyadic exponent needs t >= 1; an unpulled arm has infinite radius")
    return max((int(t) - 1).bit_length(), 1)


def _radius_log(t, log_delta):
    # shared between the reference engine and the compiled kernels
    if t == 0:
        return math.inf
    e = 1
    p = 2
    while p < t:
        p *= 2
        e += 1
    return math.sqrt(2.0 * (2.0**e) * (math.log(2.0 * e * e) - log_delta)) / t


def _radius(t, delta):
    return _radius_log(t, math.log(delta))


def _engine_phase(k, log_delta, C, K):
    # (log exploration tol, log exploitation tol, exploration limit, exploitation limit)
    # for phase k, i.e. log(delta_k/K), log(delta/(alpha_k K)) and both caps minus one
    lnK = math.log(K)
    beta = 2.0**k if k < 1000 else math.inf
    ee_cap = (C + 1.0) ** 2 * beta * (math.log(4.0 * K) + k * LN3)
    et_cap = (C + 3.0) ** 2 / (C - 1.0) ** 2 * beta * (math.log(4.0 * K) + k * LN5 - log_delta)
    return -k * LN3 - lnK, log_delta - k * LN5 - lnK, ee_cap - 1.0, et_cap - 1.0


def none_phase(delta: float) -> int:
    """Smallest phase ``k`` with ``3^-k <= delta / 3`` (None may be returned from then on)."""
    k = 1
    while not (1.0 / 3.0**k <= delta / 3.0):
        k += 1
    return k


def radius(t: int, delta: float) -> float:
    """Anytime radius ``sqrt(2 * 2^e(t) * ln(2 e(t)^2 / delta)) / t``; ``+inf`` at ``t = 0``."""
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if t < 0:
        raise ValueError("pull count must be non-negative")
    return _radius(int(t), float(delta))


def envelope(t: int, delta: float) -> float:
    """Partial-sum envelope ``t * radius(t, delta)``."""
    e = dyadic_exponent(t)
    return math.sqrt(2.0 * (2.0**e) * math.log(2.0 * e * e / delta))


def bound(kind: BoundKind, mean: float, t: int, delta: float, C: float = 1.0) -> float:
    """Confidence bound of the given kind; ``delta`` is already the per-arm tolerance.

    Only the exploration LCB is widened by ``C``.  Unpulled arms (``t == 0``)
    get ``+inf`` for upper and ``-inf`` for lower bounds.
    """
    u = radius(t, delta)
    if kind is BoundKind.EXPLORATION_LCB:
        if C <= 1.0:
            raise ValueError("exploration LCB multiplier C must exceed 1")
        return -math.inf if t == 0 else mean - C * u
    if kind in (BoundKind.EXPLORATION_UCB, BoundKind.EXPLOIT_UCB):
        return math.inf if t == 0 else mean + u
    return -math.inf if t == 0 else mean - u


@dataclass(frozen=True)
class PhaseParams:
    k: int
    delta_k: float
    beta_k: float
    alpha_k: float


def phase_params(k: int, max_phase: int = MAX_PHASE) -> PhaseParams:
    if k < 1:
        raise ValueError("phases start at k = 1")
    if k > max_phase:
        raise ScheduleOverflow(f"phase {k} exceeds the schedule cap {max_phase}")
    return PhaseParams(k, 1.0 / 3.0**k, 2.0**k, 5.0**k)


def exploration_budget(k: int, K: int, C: float) -> float:
    """Per-arm exploration cap ``(C+1)^2 beta_k ln(4K / delta_k)`` of phase ``k``."""
    p = phase_params(k)
    return (C + 1.0) ** 2 * p.beta_k * math.log(4.0 * K / p.delta_k)


def exploitation_budget(k: int, K: int, delta: float, C: float) -> float:
    """Exploitation cap ``(C+3)^2/(C-1)^2 beta_k ln(4K alpha_k / delta)`` of phase ``k``.

    Note the ``(C-1)^-2`` factor: at the default ``C = 1.01`` this cap is
    about 1.6e5 times ``beta_k ln(...)``.
    """
    if C <= 1.0:
        raise ValueError("C must exceed 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    p = phase_params(k)
    return (C + 3.0) ** 2 / (C - 1.0) ** 2 * p.beta_k * math.log(4.0 * K * p.alpha_k / delta)


def lil_threshold(Delta: float, K: int, delta: float, C: float) -> float:
    return (
        28.0 * C**2 * math.log(2.0 * K / delta) / Delta**2
        + 16.0 * C**2 * math.log(math.log(24.0 * C**2 / Delta**2)) / Delta**2
    )


def lil_threshold_sufficient(t: float, Delta: float, K: int, delta: float, C: float) -> bool:
    """Whether ``t`` exceeds the sample size that forces the LIL radius below ``Delta``."""
    if not (0.0 < Delta <= 1.0) or K < 2 or not (0.0 < delta <= 0.5) or C < 1.0:
        raise ValueError("need Delta in (0,1], K >= 2, delta in (0,1/2], C >= 1")
    return t > lil_threshold(Delta, K, delta, C)


def lil_radius_below(t: float, Delta: float, K: int, delta: float, C: float) -> bool:
    """``C * sqrt(4 ln(2K (log2 2t)^2 / delta) / t) < Delta``."""
    return C * math.sqrt(4.0 * math.log(2.0 * K * math.log2(2.0 * t) ** 2 / delta) / t) < Delta
