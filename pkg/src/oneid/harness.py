"""Monte Carlo experiments, a uniform-allocation baseline and statistical checks.

Trial ``i`` of an experiment uses the root stream ``RngStream(mix_seed(base_seed, i))``
for every delta and algorithm (common random numbers), so results for
different deltas are paired and adding trials never changes earlier ones.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.stats import norm

from .confidence import envelope, lil_radius_below, lil_threshold, lil_threshold_sufficient
from .core import BanditInstance, RngStream, load_instance, mix_seed, require_simulable, reward_block
from .pseeb import DEFAULT_C, DEFAULT_SAFETY_CAP, PseebOutcome, b_index, is_correct, n_brackets, pseeb_run

ALGORITHMS = ("pseeb", "uniform-lil")

CSV_COLUMNS = (
    "algorithm",
    "delta",
    "trials",
    "errors",
    "error_rate",
    "error_lo",
    "error_hi",
    "mean_tau",
    "se_tau",
    "median_tau",
    "max_tau",
    "anomalies",
)


# ---------------------------------------------------------------------------
# configuration


@dataclass
class ExperimentConfig:
    """Experiment description; ``instance`` is inline data or a path to an instance file."""

    instance: Union[BanditInstance, str]
    deltas: List[float]
    algorithms: List[str] = field(default_factory=lambda: ["pseeb"])
    C: float = DEFAULT_C
    trials: int = 100
    base_seed: int = 0
    safety_cap: int = DEFAULT_SAFETY_CAP
    output: Optional[str] = None
    emit_traces: bool = False
    timing: bool = False

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.deltas or any(not (0.0 < d < 1.0) for d in self.deltas):
            raise ValueError("every delta must lie in (0, 1)")
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithms {bad}; choose from {ALGORITHMS}")

    def resolve_instance(self) -> BanditInstance:
        if isinstance(self.instance, BanditInstance):
            return self.instance
        return load_instance(self.instance)

    def to_dict(self) -> dict:
        d = asdict(self) if not isinstance(self.instance, BanditInstance) else {
            **{k: getattr(self, k) for k in self.__dataclass_fields__ if k != "instance"},
            "instance": self.instance.to_dict(),
        }
        d["deltas"] = list(self.deltas)
        d["algorithms"] = list(self.algorithms)
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        inst = data.pop("instance")
        if isinstance(inst, dict):
            inst = BanditInstance.from_dict(inst)
        unknown = set(data) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown config keys {sorted(unknown)}")
        return cls(instance=inst, **data)

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "ExperimentConfig":
        return cls.from_dict(json.loads(text))


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        cfg = ExperimentConfig.loads(fh.read())
    if isinstance(cfg.instance, str) and not os.path.isabs(cfg.instance):
        cfg.instance = os.path.join(os.path.dirname(os.path.abspath(path)), cfg.instance)
    return cfg


# ---------------------------------------------------------------------------
# trials


@dataclass
class TrialRecord:
    trial: int
    seed: int
    algorithm: str
    delta: float
    answer: Optional[int]
    correct: bool
    tau: int
    copy_draws: Tuple[int, ...] = ()
    arm_draws: Tuple[int, ...] = ()
    winner: Optional[int] = None
    rounds: int = 0
    capped: bool = False
    failed: bool = False
    wall_time: Optional[float] = None

    @property
    def anomaly(self) -> bool:
        return self.capped or self.failed

    def to_json(self) -> str:
        d = asdict(self)
        d["copy_draws"] = list(self.copy_draws)
        d["arm_draws"] = list(self.arm_draws)
        if d["wall_time"] is None:
            del d["wall_time"]
        return json.dumps(d, sort_keys=True)


def _record(trial, seed, algorithm, delta, instance, out, wall) -> TrialRecord:
    finished = not (out.capped or getattr(out, "failed", False))
    return TrialRecord(
        trial=trial,
        seed=seed,
        algorithm=algorithm,
        delta=delta,
        answer=out.answer,
        correct=finished and is_correct(instance, out.answer),
        tau=out.tau,
        copy_draws=tuple(getattr(out, "copy_draws", ())),
        arm_draws=tuple(out.arm_draws),
        winner=getattr(out, "winner", None),
        rounds=out.rounds,
        capped=out.capped,
        failed=getattr(out, "failed", False),
        wall_time=wall,
    )


@dataclass
class BaselineOutcome:
    answer: Optional[int]
    tau: int
    rounds: int
    arm_draws: Tuple[int, ...]
    capped: bool = False


def _uniform_run(instance: BanditInstance, delta: float, rng: RngStream, safety_cap: int) -> BaselineOutcome:
    from . import _fast

    require_simulable(instance)
    if not (0.0 < delta < 1.0):
        raise ValueError("delta must lie in (0, 1)")
    K = instance.K
    ltol = math.log(6.0 * delta / math.pi**2 / K)
    sources = [
        (lambda n, a=a, st=rng.substream(3, a): reward_block(instance, a, st, n)) for a in range(K)
    ]
    flat = _fast.FlatStreams(sources)
    n = np.zeros(K, dtype=np.int64)
    sums = np.zeros(K)
    glob = np.zeros(4, dtype=np.int64)
    need = np.zeros(2, dtype=np.int64)
    while True:
        code = _fast.run_uniform(
            K, float(instance.mu0), ltol, safety_cap, flat.buf, flat.offsets, flat.lengths, n, sums, glob, need
        )
        if code != _fast.NEED_MORE:
            break
        flat.grow(int(need[0]), int(need[1]))
    draws = tuple(int(x) for x in n)
    if code == _fast.CAPPED:
        return BaselineOutcome(None, int(glob[1]), int(glob[3]) + 1, draws, capped=True)
    ans = int(glob[2])
    return BaselineOutcome(None if ans < 0 else ans, int(glob[1]), int(glob[3]) + 1, draws)


def uniform_lil_baseline(
    instance: BanditInstance, delta: float, rng: RngStream, safety_cap: int = DEFAULT_SAFETY_CAP
) -> TrialRecord:
    """Round-robin sampling with anytime bounds at per-arm tolerance ``(6 delta / pi^2) / K``.

    Stops with arm ``a`` once its lower bound exceeds ``mu0``, or with ``None``
    once every upper bound is below ``mu0``.  Arm ``a`` reads rewards from
    ``rng.substream(3, a)``.
    """
    t0 = time.perf_counter()
    out = _uniform_run(instance, delta, rng, safety_cap)
    return _record(0, rng.seed, "uniform-lil", delta, instance, out, time.perf_counter() - t0)


def run_trial(
    instance: BanditInstance,
    algorithm: str,
    delta: float,
    trial: int,
    base_seed: int,
    C: float = DEFAULT_C,
    safety_cap: int = DEFAULT_SAFETY_CAP,
    timing: bool = False,
) -> TrialRecord:
    seed = mix_seed(base_seed, trial)
    rng = RngStream(seed)
    t0 = time.perf_counter()
    if algorithm == "pseeb":
        out = pseeb_run(instance, delta, rng, C, safety_cap)
    elif algorithm == "uniform-lil":
        out = _uniform_run(instance, delta, rng, safety_cap)
    else:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    wall = time.perf_counter() - t0 if timing else None
    return _record(trial, seed, algorithm, delta, instance, out, wall)


# ---------------------------------------------------------------------------
# summaries


def wilson(errors: int, n: int, level: float = 0.95) -> Tuple[float, float]:
    """Two-sided Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValueError("n must be positive")
    z = norm.ppf(0.5 + level / 2.0)
    phat = errors / n
    denom = 1.0 + z * z / n
    centre = (phat + z * z / (2 * n)) / denom
    half = z * math.sqrt(phat * (1 - phat) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if errors == 0 else max(0.0, float(centre - half))
    hi = 1.0 if errors == n else min(1.0, float(centre + half))
    return lo, hi


@dataclass
class SummaryRow:
    algorithm: str
    delta: float
    trials: int
    errors: int
    error_rate: float
    error_lo: float
    error_hi: float
    mean_tau: float
    se_tau: float
    median_tau: float
    max_tau: int
    anomalies: int


def summarize(records: Sequence[TrialRecord]) -> SummaryRow:
    if not records:
        raise ValueError("no records to summarize")
    taus = np.array([r.tau for r in records], dtype=float)
    n = len(records)
    errors = sum(not r.correct for r in records)
    lo, hi = wilson(errors, n)
    return SummaryRow(
        algorithm=records[0].algorithm,
        delta=records[0].delta,
        trials=n,
        errors=errors,
        error_rate=errors / n,
        error_lo=lo,
        error_hi=hi,
        mean_tau=float(taus.mean()),
        se_tau=float(taus.std(ddof=1) / math.sqrt(n)) if n > 1 else 0.0,
        median_tau=float(np.median(taus)),
        max_tau=int(taus.max()),
        anomalies=sum(r.anomaly for r in records),
    )


def rows_to_csv(rows: Iterable[SummaryRow]) -> str:
    """CSV text with columns :data:`CSV_COLUMNS`; floats are written with ``repr``."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for row in rows:
        d = asdict(row)
        w.writerow([repr(d[c]) if isinstance(d[c], float) else d[c] for c in CSV_COLUMNS])
    return buf.getvalue()


@dataclass
class ExperimentResult:
    rows: List[SummaryRow]
    records: List[TrialRecord]
    csv_text: str


def run_experiment(config: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    """Run every (algorithm, delta) cell and write the requested outputs.

    With ``config.output = "out.csv"`` this writes ``out.csv``, a JSON
    summary ``out.json`` and, when ``emit_traces`` is set, one trial record
    per line in ``out.trials.ndjson``.  Records are merged in trial order, so
    the output does not depend on ``workers``.
    """
    instance = config.resolve_instance()
    require_simulable(instance)
    rows: List[SummaryRow] = []
    records: List[TrialRecord] = []
    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for algorithm in config.algorithms:
            for delta in config.deltas:
                args = [
                    (instance, algorithm, delta, i, config.base_seed, config.C, config.safety_cap, config.timing)
                    for i in range(config.trials)
                ]
                if pool is None:
                    recs = [run_trial(*a) for a in args]
                else:
                    recs = list(pool.map(lambda a: run_trial(*a), args))
                rows.append(summarize(recs))
                records.extend(recs)
    finally:
        if pool is not None:
            pool.shutdown()
    text = rows_to_csv(rows)
    if config.output:
        base, _ = os.path.splitext(config.output)
        with open(config.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        with open(base + ".json", "w", encoding="utf-8") as fh:
            json.dump({"config": config.to_dict(), "rows": [asdict(r) for r in rows]}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        if config.emit_traces:
            with open(base + ".trials.ndjson", "w", encoding="utf-8") as fh:
                for r in records:
                    fh.write(r.to_json() + "\n")
    return ExperimentResult(rows, records, text)


# ---------------------------------------------------------------------------
# bracket statistics


def bracket_tail_bound(K: int, j: int, b_tilde: int) -> float:
    """``exp(-j * floor(2^(b_tilde - 2)) / K)``."""
    return math.exp(-j * math.floor(2.0 ** (b_tilde - 2)) / K)


def exact_bracket_tail(K: int, j: int) -> Dict[int, float]:
    """``Pr(b_j >= b)`` for every bracket index by enumerating all permutations.

    Arms ``0..j-1`` play the top-``j`` set; by symmetry any ``j`` arms give the same law.
    """
    nb = n_brackets(K)
    counts = np.zeros(nb + 2)
    total = 0
    for perm in itertools.permutations(range(K)):
        pos = next(i for i, a in enumerate(perm, start=1) if a < j)
        counts[b_index(pos)] += 1
        total += 1
    tail = np.cumsum(counts[::-1])[::-1] / total
    return {b: float(tail[b]) for b in range(1, nb + 1)}


@dataclass
class BracketStatRow:
    b_tilde: int
    empirical: float
    se: float
    bound: float
    exact: Optional[float] = None


def bracket_stats(K: int, j: int, samples: int, rng: RngStream) -> List[BracketStatRow]:
    if not (1 <= j <= K):
        raise ValueError("need 1 <= j <= K")
    gen = rng.generator()
    keys = gen.random((samples, K))
    perms = np.argsort(keys, axis=1)
    first = (perms < j).argmax(axis=1) + 1  # 1-based first position of a top-j arm
    b = np.array([b_index(int(p)) for p in range(1, K + 1)])[first - 1]
    exact = exact_bracket_tail(K, j) if K <= 7 else None
    rows = []
    for bt in range(1, n_brackets(K) + 1):
        p = float(np.mean(b >= bt))
        rows.append(
            BracketStatRow(bt, p, math.sqrt(p * (1 - p) / samples), bracket_tail_bound(K, j, bt), None if exact is None else exact[bt])
        )
    return rows


# ---------------------------------------------------------------------------
# concentration and technical inequalities


@dataclass
class ConcentrationReport:
    delta: float
    streams: int
    horizon: int
    violations: int
    fraction: float
    se: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.fraction <= self.bound + 3.0 * self.se


def envelope_curve(horizon: int, delta: float) -> np.ndarray:
    return np.array([envelope(t, delta) for t in range(1, horizon + 1)])


def concentration_check(delta: float, streams: int, horizon: int, rng: RngStream, chunk: int = 250) -> ConcentrationReport:
    """Fraction of unit-Gaussian random walks leaving the anytime envelope before ``horizon``."""
    if horizon < 2:
        raise ValueError("horizon must be >= 2")
    env = envelope_curve(horizon, delta)
    gen = rng.generator()
    hits = 0
    for lo in range(0, streams, chunk):
        n = min(chunk, streams - lo)
        walks = np.cumsum(gen.standard_normal((n, horizon)), axis=1)
        hits += int(np.any(np.abs(walks) >= env, axis=1).sum())
    frac = hits / streams
    return ConcentrationReport(
        delta, streams, horizon, hits, frac, math.sqrt(max(frac * (1 - frac), 1.0 / streams) / streams), math.pi**2 * delta / 6.0
    )


@dataclass
class MaximalRow:
    n: int
    sigma: float
    z: float
    frequency: float
    se: float
    bound: float

    @property
    def passed(self) -> bool:
        return self.frequency <= self.bound + 3.0 * self.se


def maximal_inequality_check(
    ns: Sequence[int] = (16, 128, 1024),
    sigmas: Sequence[float] = (0.5, 1.0, 2.0),
    zs: Sequence[float] = (0.5, 1.0, 2.0, 3.0),
    reps: int = 4000,
    rng: Optional[RngStream] = None,
) -> List[MaximalRow]:
    """Monte Carlo of ``Pr(max_t S_t > z)`` for Gaussian walks vs ``exp(-z^2 / (2 n sigma^2))``.

    ``zs`` are in units of ``sigma * sqrt(n)``.
    """
    gen = (rng or RngStream(0)).generator()
    rows = []
    for n in ns:
        walks = np.cumsum(gen.standard_normal((reps, n)), axis=1).max(axis=1)
        for s in sigmas:
            for c in zs:
                z = c * s * math.sqrt(n)
                freq = float(np.mean(s * walks > z))
                se = math.sqrt(max(freq * (1 - freq), 1.0 / reps) / reps)
                rows.append(MaximalRow(n, s, z, freq, se, math.exp(-z * z / (2 * n * s * s))))
    return rows


@dataclass
class ImplicationReport:
    tried: int
    premise_true: int
    failures: int
    worst: Optional[tuple] = None

    @property
    def passed(self) -> bool:
        return self.failures == 0 and self.premise_true > 0


def lil_implication_check(samples: int, rng: RngStream) -> ImplicationReport:
    """Sample valid ``(t, Delta, K, delta, C)`` and test the threshold implication.

    ``t`` is drawn just above the threshold (up to 100 times it), where the
    implication is tightest.
    """
    gen = rng.generator()
    fails = 0
    hits = 0
    worst = None
    for _ in range(samples):
        D = float(gen.uniform(1e-3, 1.0))
        K = int(gen.integers(2, 1025))
        d = float(10 ** gen.uniform(-12, math.log10(0.5)))
        C = float(gen.uniform(1.0, 5.0))
        t = math.floor(lil_threshold(D, K, d, C) * (1.0 + gen.exponential(0.5))) + 1
        if not lil_threshold_sufficient(t, D, K, d, C):
            continue
        hits += 1
        if not lil_radius_below(t, D, K, d, C):
            fails += 1
            worst = (t, D, K, d, C)
    return ImplicationReport(samples, hits, fails, worst)


def loglog_inequality_check(samples: int, rng: RngStream) -> ImplicationReport:
    """Both claims of the ``x`` vs ``a lnln x + b`` inequality on random ``b >= a``."""
    gen = rng.generator()
    fails = 0
    hits = 0
    worst = None
    lnln = lambda x: math.log(math.log(x))  # noqa: E731
    for _ in range(samples):
        b = float(math.e**2 * 10 ** gen.uniform(0, 6))
        a = float(gen.uniform(0, 1) * b)
        x = b + 2 * a * lnln(b) + float(gen.exponential(b))
        hits += 1
        if not (x >= a * lnln(x) + b):
            fails += 1
            worst = ("first", x, a, b)
        b2 = float(math.e * 10 ** gen.uniform(1e-9, 6))
        a2 = float(math.e + gen.uniform(0, 1) * max(b2 - math.e, 0.0))
        x2 = float(gen.uniform(math.e, b2 + a2 * lnln(b2)))
        hits += 1
        if not (x2 < a2 * lnln(x2) + b2):
            fails += 1
            worst = ("second", x2, a2, b2)
    return ImplicationReport(2 * samples, hits, fails, worst)
