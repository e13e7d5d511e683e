"""Reference state machine for one SEE copy (phased exploration/exploitation).

:func:`see_step` advances a copy until exactly one fresh reward is drawn or
the copy terminates.  Sample transfers through the ``Q`` container and phase
advances are bookkeeping and happen silently inside a step.

Rewards come from per-arm streams ``rng.substream(period, arm)`` with period
0 for exploration and 1 for exploitation; the ``s``-th fresh draw of an arm in
a period is draw index ``s`` of its stream.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .confidence import ENGINE_MAX_PHASE, _engine_phase, _radius_log, none_phase
from .core import BanditInstance, RngStream

EXPLORATION = 0
EXPLOITATION = 1


class InvariantViolation(AssertionError):
    pass


class Mode(enum.Enum):
    EXPLORING = "exploring"
    EXPLOITING = "exploiting"
    DONE = "done"


class History:
    """Per-arm reward stacks with running sums; only the latest draw of an arm may be removed."""

    def __init__(self, arms: Sequence[int]):
        self.draws: Dict[int, List[float]] = {a: [] for a in arms}
        self.sums: Dict[int, float] = {a: 0.0 for a in arms}

    def push(self, arm: int, x: float) -> None:
        self.draws[arm].append(x)
        self.sums[arm] += x

    def pop(self, arm: int) -> float:
        if not self.draws[arm]:
            raise IndexError(f"arm {arm} has no draws to remove")
        x = self.draws[arm].pop()
        self.sums[arm] -= x
        return x

    def count(self, arm: int) -> int:
        return len(self.draws[arm])

    def mean(self, arm: int) -> float:
        n = len(self.draws[arm])
        return math.nan if n == 0 else self.sums[arm] / n

    def __len__(self) -> int:
        return sum(len(v) for v in self.draws.values())


class QContainer:
    """Parking area holding at most one exploration draw per arm."""

    def __init__(self):
        self.items: Dict[int, float] = {}

    def park(self, arm: int, x: float) -> None:
        if arm in self.items:
            raise InvariantViolation(f"arm {arm} already has a parked sample")
        self.items[arm] = x

    def take(self, arm: int) -> float:
        return self.items.pop(arm)

    def __contains__(self, arm: int) -> bool:
        return arm in self.items

    def __len__(self) -> int:
        return len(self.items)


@dataclass
class StepOutcome:
    """Result of one :func:`see_step` call.

    ``kind`` is ``"pulled"``, ``"terminated"`` or ``"failed"``.  A terminated
    step may still have drawn a fresh reward (exploitation confirmation);
    ``arm``/``period`` are set whenever a draw happened.  ``answer`` is the
    returned arm, or ``None`` for the None-answer.
    """

    kind: str
    arm: Optional[int] = None
    period: Optional[int] = None
    answer: Optional[int] = None
    reason: Optional[str] = None

    @property
    def drew(self) -> bool:
        return self.arm is not None


@dataclass
class SeeState:
    bracket: Tuple[int, ...]
    mu0: float
    delta: float
    C: float
    K: int
    max_phase: int = ENGINE_MAX_PHASE
    check: bool = False
    phase: int = 1
    mode: Mode = Mode.EXPLORING
    t_ee: int = 0
    t_et: int = 0
    last_ee_arm: Optional[int] = None
    a_hat: Optional[int] = None
    answer: Optional[int] = None
    steps: int = 0
    ee: History = field(init=False)
    et: History = field(init=False)
    q: QContainer = field(init=False)
    fresh: Tuple[Dict[int, int], Dict[int, int]] = field(init=False)
    t_et_phase_start: int = 0
    trace: Optional[Callable[[dict], None]] = None
    _streams: Dict = field(default_factory=dict, init=False, repr=False)
    _rng_ident: Optional[tuple] = field(default=None, init=False, repr=False)

    def __post_init__(self):
        self.ee = History(self.bracket)
        self.et = History(self.bracket)
        self.q = QContainer()
        self.fresh = ({a: 0 for a in self.bracket}, {a: 0 for a in self.bracket})
        self.log_delta = math.log(self.delta)
        self.none_phase = none_phase(self.delta)
        self._load_phase()

    def _load_phase(self) -> None:
        self.ee_ltol, self.et_ltol, self.ee_limit, self.et_limit = _engine_phase(
            self.phase, self.log_delta, self.C, self.K
        )
        self.ee_cap = self.ee_limit + 1.0
        self.et_cap = self.et_limit + 1.0

    # confidence bounds at the current phase -------------------------------
    def ucb_ee(self, a: int) -> float:
        n = self.ee.count(a)
        if n == 0:
            return math.inf
        return self.ee.sums[a] / n + _radius_log(n, self.ee_ltol)

    def lcb_ee(self, a: int) -> float:
        n = self.ee.count(a)
        if n == 0:
            return -math.inf
        return self.ee.sums[a] / n - self.C * _radius_log(n, self.ee_ltol)

    def lcb_et(self, a: int) -> float:
        n = self.et.count(a)
        if n == 0:
            return -math.inf
        return self.et.sums[a] / n - _radius_log(n, self.et_ltol)

    @property
    def done(self) -> bool:
        return self.mode is Mode.DONE


def see_new(
    bracket: Sequence[int],
    mu0: float,
    delta: float,
    C: float,
    K: int,
    *,
    max_phase: int = ENGINE_MAX_PHASE,
    check: bool = False,
    trace: Optional[Callable[[dict], None]] = None,
) -> SeeState:
    """Fresh SEE copy over ``bracket``.

    ``delta`` is this copy's tolerance and ``K`` the global arm count; the
    confidence bounds use ``delta / K`` even when the bracket is smaller.
    """
    bracket = tuple(int(a) for a in bracket)
    if not bracket:
        raise ValueError("bracket must be non-empty")
    if len(set(bracket)) != len(bracket):
        raise ValueError("bracket arms must be unique")
    if any(not (0 <= a < K) for a in bracket):
        raise ValueError("bracket arms must lie in 0..K-1")
    if C <= 1.0:
        raise ValueError("C must exceed 1")
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    return SeeState(bracket, float(mu0), float(delta), float(C), int(K), max_phase, check, trace=trace)


def select_exploration_arm(state: SeeState) -> int:
    """Arm maximizing the exploration UCB among those under this phase's cap.

    Ties go to the arm stored first in the bracket.
    """
    best, best_val = None, -math.inf
    for a in state.bracket:
        if state.ee.count(a) <= state.ee_limit:
            u = state.ucb_ee(a)
            if best is None or u > best_val:
                best, best_val = a, u
    if best is None:
        raise RuntimeError("no arm under the exploration cap")
    return best


def q_transfer_out(state: SeeState, arm: int) -> None:
    """Park the most recent exploration draw of ``arm`` in Q."""
    if state.ee.count(arm) == 0:
        raise ValueError(f"arm {arm} has no exploration draws to park")
    if arm in state.q:
        raise ValueError(f"arm {arm} already has a parked sample")
    state.q.park(arm, state.ee.pop(arm))


def q_transfer_in(state: SeeState, arm: int) -> None:
    """Move the parked draw of ``arm`` back onto its exploration history."""
    if arm not in state.q:
        raise ValueError(f"arm {arm} has no parked sample")
    state.ee.push(arm, state.q.take(arm))


class _Overflow(Exception):
    pass


def _advance_phase(state: SeeState) -> None:
    if state.check:
        _check_phase_end(state)
    if state.phase + 1 > state.max_phase:
        raise _Overflow
    state.phase += 1
    state._load_phase()
    state.mode = Mode.EXPLORING
    state.t_et_phase_start = state.t_et
    if state.check:
        _check_phase_start(state)


def _draw(state: SeeState, instance: BanditInstance, rng: RngStream, period: int, arm: int) -> float:
    idx = state.fresh[period][arm]
    noise = _noise_buffer(state, rng, period, arm, idx + 1, instance.noise)
    state.fresh[period][arm] = idx + 1
    return instance.means[arm] + float(noise[idx])


def _noise_buffer(
    state: SeeState, rng: Optional[RngStream], period: int, arm: int, n: int, noise: Optional[str], cached_only: bool = False
) -> np.ndarray:
    if cached_only:
        # reuse the stream and noise model of the last call for this arm
        stream, noise = state._streams[(period, arm)], state._streams[("noise",)]
        return stream.noise(n, noise)
    ident = (rng.seed, rng.key)
    if state._rng_ident != ident:
        state._streams = {}
        state._rng_ident = ident
    state._streams[("noise",)] = noise
    stream = state._streams.get((period, arm))
    if stream is None:
        stream = state._streams[(period, arm)] = rng.substream(period, arm)
    return stream.noise(n, noise)


def see_step(state: SeeState, instance: BanditInstance, rng: RngStream) -> StepOutcome:
    """Advance the copy until one fresh draw happens or it terminates."""
    if state.mode is Mode.DONE:
        raise RuntimeError("copy already terminated")
    state.steps += 1
    try:
        out = _step(state, instance, rng)
    except _Overflow:
        state.mode = Mode.DONE
        out = StepOutcome("failed", reason="schedule-overflow")
    if state.check:
        check_invariants(state, instance, rng)
    if state.trace is not None:
        state.trace(
            {
                "step": state.steps,
                "phase": state.phase,
                "mode": state.mode.value,
                "kind": out.kind,
                "arm": out.arm,
                "period": out.period,
                "answer": out.answer,
                "t_ee": state.t_ee,
                "t_et": state.t_et,
                "q": len(state.q),
            }
        )
    return out


def _step(state: SeeState, instance: BanditInstance, rng: RngStream) -> StepOutcome:
    mu0 = state.mu0
    B = state.bracket
    transfers = 0
    while True:
        if state.mode is Mode.EXPLOITING:
            a = state.a_hat
            if state.et.count(a) <= state.et_limit:
                x = _draw(state, instance, rng, EXPLOITATION, a)
                state.et.push(a, x)
                state.t_et += 1
                if state.lcb_et(a) > mu0:
                    state.mode = Mode.DONE
                    state.answer = a
                    return StepOutcome("terminated", a, EXPLOITATION, answer=a)
                if state.et.count(a) > state.et_limit:
                    _advance_phase(state)
                return StepOutcome("pulled", a, EXPLOITATION)
            _advance_phase(state)
            continue

        last = state.last_ee_arm
        if state.t_ee >= 1 and last is not None and state.lcb_ee(last) >= mu0:
            q_transfer_out(state, last)
            state.a_hat = last
            state.mode = Mode.EXPLOITING
            continue

        if all(state.ucb_ee(a) <= mu0 for a in B):
            if state.phase >= state.none_phase and len(B) == state.K:
                state.mode = Mode.DONE
                state.answer = None
                return StepOutcome("terminated", answer=None)
            _advance_phase(state)
            continue

        limit = state.ee_limit
        if all(state.ee.count(a) > limit for a in B):
            _advance_phase(state)
            continue

        a = select_exploration_arm(state)
        state.last_ee_arm = a
        if a in state.q:
            q_transfer_in(state, a)
            transfers += 1
            if transfers > len(B) + state.max_phase + 1:
                raise InvariantViolation("internal loop made no progress")
            continue
        x = _draw(state, instance, rng, EXPLORATION, a)
        state.ee.push(a, x)
        state.t_ee += 1
        return StepOutcome("pulled", a, EXPLORATION)


# ---------------------------------------------------------------------------
# invariant checks


def _fail(msg: str):
    raise InvariantViolation(msg)


def _check_phase_start(state: SeeState) -> None:
    for a in state.bracket:
        if not state.lcb_ee(a) < state.mu0:
            _fail(f"phase {state.phase} starts with LCB of arm {a} >= mu0")


def _check_phase_end(state: SeeState) -> None:
    for a in state.bracket:
        if state.ee.count(a) > state.ee_cap:
            _fail(f"arm {a} exceeded the phase-{state.phase} exploration cap")
    if state.t_et - state.t_et_phase_start > state.et_cap:
        _fail(f"phase-{state.phase} exploitation increment exceeded its cap")


def _prefix_sum(state: SeeState, period: int, arm: int, stream: np.ndarray, n: int) -> float:
    # cumulative noise sums per stream, extended by doubling so checks stay O(1) per arm
    key = ("cum", period, arm)
    cum = state._streams.get(key)
    if cum is None or cum.shape[0] < n:
        size = max(n, 2 * (0 if cum is None else cum.shape[0]), 64)
        full = _noise_buffer(state, None, period, arm, size, None, cached_only=True)
        cum = state._streams[key] = np.cumsum(full)
    return float(cum[n - 1])


def check_invariants(state: SeeState, instance: BanditInstance, rng: RngStream) -> None:
    """Assert the step-boundary invariants of a SEE copy.

    Checks the sample accounting, the size of Q, the per-phase exploration cap
    and the prefix-mean property against the copy's reward streams.
    """
    B = state.bracket
    n_ee = len(state.ee)
    if state.t_ee != n_ee + len(state.q):
        _fail(f"t_ee={state.t_ee} != |H_ee|+|Q|={n_ee}+{len(state.q)}")
    if state.t_et != len(state.et):
        _fail("t_et != |H_et|")
    if len(state.q) > len(B):
        _fail("|Q| > |B|")
    for a in B:
        n = state.ee.count(a)
        if n > state.ee_cap:
            _fail(f"arm {a} above exploration cap")
        parked = 1 if a in state.q else 0
        if state.fresh[EXPLORATION][a] != n + parked:
            _fail(f"arm {a}: fresh exploration draws != N_ee + parked")
        for period, hist in ((EXPLORATION, state.ee), (EXPLOITATION, state.et)):
            cnt = hist.count(a)
            if cnt == 0:
                continue
            stream = _noise_buffer(state, rng, period, a, cnt + parked * (period == 0), instance.noise)
            mu = instance.means[a]
            if hist.draws[a][-1] != mu + float(stream[cnt - 1]):
                _fail(f"arm {a} period {period}: history is not a prefix of its stream")
            prefix_mean = mu + _prefix_sum(state, period, a, stream, cnt) / cnt
            if not math.isclose(hist.mean(a), prefix_mean, rel_tol=1e-9, abs_tol=1e-9):
                _fail(f"arm {a} period {period}: mean is not the prefix mean")
        if parked and state.q.items[a] != instance.means[a] + float(
            _noise_buffer(state, rng, EXPLORATION, a, n + 1, instance.noise)[n]
        ):
            _fail(f"arm {a}: parked sample is not the next prefix element")


def trace_writer(fh) -> Callable[[dict], None]:
    """Callback writing one JSON line per step to an open text file."""

    def write(record: dict) -> None:
        fh.write(json.dumps(record, sort_keys=True))
        fh.write("\n")

    return write
