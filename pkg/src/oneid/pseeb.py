"""Parallel bracketed SEE: nested brackets from one permutation, run round-robin.

Random streams used by one run with root stream ``rng``:

* ``rng.substream(0)`` draws the permutation;
* ``rng.substream(1, b)`` is handed to copy ``b``, which reads arm ``a`` in
  period ``p`` from ``rng.substream(1, b, p, a)``.

Copies never share samples.  Both engines consume these streams identically,
so ``engine="fast"`` and ``engine="reference"`` return the same outcome.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from .confidence import ENGINE_MAX_PHASE, _engine_phase, none_phase
from .core import BanditInstance, RngStream, permutation, require_simulable, reward_block
from .see import InvariantViolation, SeeState, see_new, see_step

DEFAULT_C = 1.01
DEFAULT_SAFETY_CAP = 10**8


def n_brackets(K: int) -> int:
    """``ceil(log2 K) + 1``."""
    return (K - 1).bit_length() + 1


@dataclass(frozen=True)
class BracketSet:
    """Permutation ``sigma`` and its nested prefixes; ``brackets[b]`` is bracket ``b + 1``."""

    sigma: Tuple[int, ...]
    brackets: Tuple[Tuple[int, ...], ...]

    @property
    def K(self) -> int:
        return len(self.sigma)

    @property
    def sizes(self) -> List[int]:
        return [len(B) for B in self.brackets]

    def __len__(self) -> int:
        return len(self.brackets)


def brackets_from_sigma(sigma: Sequence[int]) -> BracketSet:
    sigma = tuple(int(a) for a in sigma)
    K = len(sigma)
    if K < 2:
        raise ValueError("need K >= 2")
    if sorted(sigma) != list(range(K)):
        raise ValueError("sigma must be a permutation of 0..K-1")
    brs = tuple(sigma[: min(2**b, K)] for b in range(n_brackets(K)))
    return BracketSet(sigma, brs)


def build_brackets(K: int, rng: RngStream) -> BracketSet:
    """Uniform permutation from ``rng`` and brackets of sizes ``min(2^(b-1), K)``."""
    if K < 2:
        raise ValueError("need K >= 2")
    return brackets_from_sigma(permutation(K, rng))


def min_qualified_bracket(brackets: BracketSet, top: Sequence[int]) -> int:
    """Smallest 1-based bracket index whose bracket meets the arm set ``top``."""
    top = set(int(a) for a in top)
    if not top or not top <= set(range(brackets.K)):
        raise ValueError("top must be a non-empty set of arms")
    for b, B in enumerate(brackets.brackets, start=1):
        if top.intersection(B):
            return b
    raise AssertionError("last bracket covers every arm")


def b_index(first_position: int) -> int:
    """Bracket index reached by an arm at 1-based position ``p`` of ``sigma``."""
    return (first_position - 1).bit_length() + 1


@dataclass
class PseebOutcome:
    """Result of one run.  ``answer`` is an arm or ``None``; ``winner`` is 1-based."""

    answer: Optional[int]
    tau: int
    winner: Optional[int]
    rounds: int
    copy_draws: Tuple[int, ...]
    arm_draws: Tuple[int, ...]
    seed: int
    sigma: Tuple[int, ...]
    terminated: bool = True
    capped: bool = False
    failed: bool = False
    reason: Optional[str] = None
    final_phases: Tuple[int, ...] = field(default=())


def _check_args(instance: BanditInstance, delta: float, C: float) -> None:
    require_simulable(instance)
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    if C <= 1.0:
        raise ValueError("C must exceed 1")


def pseeb_run(
    instance: BanditInstance,
    delta: float,
    rng: RngStream,
    C: float = DEFAULT_C,
    safety_cap: int = DEFAULT_SAFETY_CAP,
    *,
    engine: str = "fast",
    check: bool = False,
    trace: Optional[Callable[[int, dict], None]] = None,
    max_phase: int = ENGINE_MAX_PHASE,
) -> PseebOutcome:
    """Run all bracket copies round-robin until one terminates.

    Each copy gets tolerance ``delta / n_brackets(K)``.  Runs whose total
    draw count reaches ``safety_cap`` stop early with ``capped=True``.
    ``check`` and ``trace`` (called as ``trace(b, record)``) need the
    reference engine.
    """
    _check_args(instance, delta, C)
    if engine not in ("fast", "reference"):
        raise ValueError(f"unknown engine {engine!r}")
    if (check or trace is not None) and engine == "fast":
        engine = "reference"
    brs = build_brackets(instance.K, rng.substream(0))
    dcopy = delta / len(brs)
    if engine == "reference":
        return _run_reference(instance, dcopy, C, rng, brs, safety_cap, check, trace, max_phase)
    return _run_fast(instance, dcopy, C, rng, brs, safety_cap, max_phase)


def _run_reference(instance, dcopy, C, rng, brs, safety_cap, check, trace, max_phase) -> PseebOutcome:
    K = instance.K
    copies: List[SeeState] = []
    for b, B in enumerate(brs.brackets):
        cb = None if trace is None else (lambda rec, b=b: trace(b + 1, rec))
        copies.append(see_new(B, instance.mu0, dcopy, C, K, max_phase=max_phase, check=check, trace=cb))
    streams = [rng.substream(1, b) for b in range(len(copies))]

    def tau() -> int:
        return sum(s.t_ee + s.t_et for s in copies)

    rnd = 0
    while True:
        rnd += 1
        for b, st in enumerate(copies):
            out = see_step(st, instance, streams[b])
            if out.kind == "terminated":
                return _outcome(copies, K, rng, brs, out.answer, b + 1, rnd)
            if out.kind == "failed":
                return _outcome(copies, K, rng, brs, None, b + 1, rnd, terminated=False, failed=True, reason=out.reason)
            if tau() >= safety_cap:
                return _outcome(copies, K, rng, brs, None, None, rnd, terminated=False, capped=True)


def _outcome(copies, K, rng, brs, answer, winner, rounds, **kw) -> PseebOutcome:
    arm = [0] * K
    for st in copies:
        for p in (0, 1):
            for a, n in st.fresh[p].items():
                arm[a] += n
    cd = tuple(st.t_ee + st.t_et for st in copies)
    return PseebOutcome(
        answer=answer,
        tau=sum(cd),
        winner=winner,
        rounds=rounds,
        copy_draws=cd,
        arm_draws=tuple(arm),
        seed=rng.seed,
        sigma=brs.sigma,
        final_phases=tuple(st.phase for st in copies),
        **kw,
    )


def _stream_source(instance, stream, arm):
    return lambda n: reward_block(instance, arm, stream, n)


def _run_fast(instance, dcopy, C, rng, brs, safety_cap, max_phase) -> PseebOutcome:
    from . import _fast

    K = instance.K
    nb = len(brs)
    brackets = np.zeros((nb, K), dtype=np.int64)
    bsize = np.zeros(nb, dtype=np.int64)
    sources = [None] * (nb * 2 * K)
    for b, B in enumerate(brs.brackets):
        brackets[b, : len(B)] = B
        bsize[b] = len(B)
        for p in (0, 1):
            for a in B:
                sources[(b * 2 + p) * K + a] = _stream_source(instance, rng.substream(1, b, p, a), a)
    flat = _fast.FlatStreams(sources)
    log_delta = math.log(dcopy)
    cur = np.tile(np.array(_engine_phase(1, log_delta, C, K)), (nb, 1))

    i64 = lambda *shape: np.zeros(shape, dtype=np.int64)  # noqa: E731
    phase = np.ones(nb, dtype=np.int64)
    mode = i64(nb)
    t_ee, t_et = i64(nb), i64(nb)
    last = np.full(nb, -1, dtype=np.int64)
    ahat = np.full(nb, -1, dtype=np.int64)
    answer = np.full(nb, -2, dtype=np.int64)
    ee_n, et_n, q_has, fresh_ee, fresh_et = (i64(nb, K) for _ in range(5))
    ee_sum, et_sum, q_val = (np.zeros((nb, K)) for _ in range(3))
    glob = i64(4)
    need = i64(2)
    while True:
        code = _fast.run_pseeb(
            K, float(instance.mu0), log_delta, none_phase(dcopy), C, max_phase, safety_cap,
            brackets, bsize, cur,
            flat.buf, flat.offsets, flat.lengths,
            phase, mode, t_ee, t_et, last, ahat, answer,
            ee_n, ee_sum, et_n, et_sum, q_has, q_val, fresh_ee, fresh_et,
            glob, need,
        )  # fmt: skip
        if code == _fast.NEED_MORE:
            flat.grow(int(need[0]), int(need[1]))
            continue
        break
    if code == _fast.BROKEN:
        raise InvariantViolation(f"arm {int(need[0])} already has a parked sample")

    cd = tuple(int(x) for x in t_ee + t_et)
    arm = tuple(int(x) for x in (fresh_ee + fresh_et).sum(axis=0))
    common = dict(
        tau=sum(cd),
        rounds=int(glob[0]) + 1,
        copy_draws=cd,
        arm_draws=arm,
        seed=rng.seed,
        sigma=brs.sigma,
        final_phases=tuple(int(x) for x in phase),
    )
    if code == _fast.TERMINATED:
        b = int(glob[3])
        ans = int(answer[b])
        return PseebOutcome(answer=None if ans < 0 else ans, winner=b + 1, **common)
    if code == _fast.FAILED:
        return PseebOutcome(
            answer=None, winner=int(glob[3]) + 1, terminated=False, failed=True, reason="schedule-overflow", **common
        )
    return PseebOutcome(answer=None, winner=None, terminated=False, capped=True, **common)


def round_robin_bound_holds(out: PseebOutcome) -> bool:
    """Every step call draws at most once, so ``tau <= n_copies * rounds``."""
    return out.tau <= len(out.copy_draws) * out.rounds


def is_correct(instance: BanditInstance, answer: Optional[int]) -> bool:
    """Correct answers: any arm with mean >= mu0 on positive instances, ``None`` on negative ones."""
    if max(instance.means) > instance.mu0:
        return answer is not None and instance.means[answer] >= instance.mu0
    return answer is None
