"""Ground-truth instance model for 1-identification.

A :class:`BanditInstance` holds the arm means, the threshold ``mu0`` and the
noise model.  Arms are addressed by 0-based position in ``means`` everywhere
except in :func:`gap` and :attr:`ComplexityProfile.gaps`, which use the
extended index set ``{0, 1, ..., K}`` where index 0 is the threshold and
index ``a + 1`` is arm ``a``.
"""

from __future__ import annotations

import enum
import json
import math
import os
import warnings
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

MASK64 = (1 << 64) - 1


class InstanceError(ValueError):
    """Raised for malformed instances or instance files."""


class InstanceClass(enum.Enum):
    POSITIVE = "positive"
    NEGATIVE = "negative"
    BOUNDARY = "boundary"


@dataclass(frozen=True)
class Classification:
    kind: InstanceClass
    m: int = 0

    @property
    def is_positive(self) -> bool:
        return self.kind is InstanceClass.POSITIVE

    @property
    def is_negative(self) -> bool:
        return self.kind is InstanceClass.NEGATIVE

    @property
    def is_boundary(self) -> bool:
        return self.kind is InstanceClass.BOUNDARY


def _parse_noise(noise: str) -> Tuple[str, float]:
    if noise == "gaussian":
        return "gaussian", 1.0
    if noise.startswith("bounded:"):
        try:
            width = float(noise.split(":", 1)[1])
        except ValueError as exc:
            raise InstanceError(f"bad bounded noise model {noise!r}") from exc
        # uniform on [-w, w] is w-sub-Gaussian; w <= 1 keeps it 1-sub-Gaussian
        if not (0.0 < width <= 1.0) or not math.isfinite(width):
            raise InstanceError("bounded noise half-width must lie in (0, 1]")
        return "bounded", width
    raise InstanceError(f"unknown noise model {noise!r}")


@dataclass(frozen=True)
class BanditInstance:
    """Arm means, threshold and noise model (``"gaussian"`` or ``"bounded:<w>"``)."""

    means: Tuple[float, ...]
    mu0: float
    noise: str = "gaussian"

    def __post_init__(self):
        means = tuple(float(x) for x in self.means)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "mu0", float(self.mu0))
        if len(means) < 2:
            raise InstanceError("an instance needs K >= 2 arms")
        if not all(math.isfinite(x) for x in means) or not math.isfinite(self.mu0):
            raise InstanceError("means and mu0 must be finite")
        _parse_noise(self.noise)
        if any(x < 0.0 or x > 1.0 for x in means + (self.mu0,)):
            warnings.warn(
                "means or mu0 outside [0, 1]; several guarantees assume gaps below 1",
                stacklevel=3,
            )

    @property
    def K(self) -> int:
        return len(self.means)

    @property
    def noise_kind(self) -> Tuple[str, float]:
        return _parse_noise(self.noise)

    def permuted(self, perm: Sequence[int]) -> "BanditInstance":
        return BanditInstance(tuple(self.means[i] for i in perm), self.mu0, self.noise)

    def to_dict(self) -> dict:
        return {"means": list(self.means), "mu0": self.mu0, "noise": self.noise}

    @classmethod
    def from_dict(cls, data: dict) -> "BanditInstance":
        try:
            means = data["means"]
            mu0 = data["mu0"]
        except KeyError as exc:
            raise InstanceError(f"instance is missing key {exc}") from exc
        if not isinstance(means, list) or not all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in means
        ):
            raise InstanceError("'means' must be an array of reals")
        if not isinstance(mu0, (int, float)) or isinstance(mu0, bool):
            raise InstanceError("'mu0' must be a real")
        return cls(tuple(means), mu0, data.get("noise", "gaussian"))


def _reject_constant(name: str):
    raise InstanceError(f"non-finite value {name} is not allowed")


def loads_instance(text: str) -> BanditInstance:
    """Parse an instance from JSON text; NaN and infinities are rejected."""
    try:
        data = json.loads(text, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise InstanceError(f"invalid instance file: {exc}") from exc
    if not isinstance(data, dict):
        raise InstanceError("instance file must hold an object")
    return BanditInstance.from_dict(data)


def load_instance(path: "str | os.PathLike") -> BanditInstance:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_instance(fh.read())


def dump_instance(instance: BanditInstance, path: "str | os.PathLike") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance.to_dict(), fh, indent=2)
        fh.write("\n")


def classify(instance: BanditInstance) -> Classification:
    top = max(instance.means)
    if top > instance.mu0:
        return Classification(InstanceClass.POSITIVE, sum(x > instance.mu0 for x in instance.means))
    if top < instance.mu0:
        return Classification(InstanceClass.NEGATIVE)
    return Classification(InstanceClass.BOUNDARY)


def require_simulable(instance: BanditInstance) -> Classification:
    cls = classify(instance)
    if cls.is_boundary:
        raise InstanceError("boundary instances (max mean == mu0) cannot be simulated")
    return cls


def gap(instance: BanditInstance, i: int, j: int) -> float:
    """``|value(i) - value(j)|`` over extended indices (0 is ``mu0``, ``a+1`` is arm ``a``)."""
    K = instance.K
    for idx in (i, j):
        if not (0 <= idx <= K):
            raise IndexError(f"extended index {idx} outside 0..{K}")
    vi = instance.mu0 if i == 0 else instance.means[i - 1]
    vj = instance.mu0 if j == 0 else instance.means[j - 1]
    return abs(vi - vj)


def _inv(x: float) -> float:
    return math.inf if x == 0.0 else 1.0 / x


@dataclass(frozen=True)
class ComplexityProfile:
    """Gap table and the complexity measures of a single instance.

    ``order`` lists the original arm indices sorted by descending mean (ties
    keep user order); ``h_of_j[j]`` is H(j) for ranks ``j = 1..m``.
    """

    gaps: np.ndarray
    order: Tuple[int, ...]
    m: int
    h1_neg: float
    h1_low: float
    h: float
    h1: float
    h0: float
    h_u: float
    h_of_j: Dict[int, float]
    delta_min: float
    boundary: bool = False
    infinite: Tuple[str, ...] = field(default=())

    def ranked_arm(self, j: int) -> int:
        """Original index of the rank-``j`` arm (1-based rank)."""
        return self.order[j - 1]


def complexity_terms(instance: BanditInstance) -> ComplexityProfile:
    K = instance.K
    values = np.array((instance.mu0,) + instance.means)
    gaps = np.abs(values[:, None] - values[None, :])
    order = tuple(sorted(range(K), key=lambda a: -instance.means[a]))
    mu = [instance.means[a] for a in order]  # descending
    mu0 = instance.mu0
    top = mu[0]
    m = sum(x > mu0 for x in mu)

    def d2(x, y):
        return (x - y) ** 2

    h1_neg = sum(2.0 * _inv(d2(mu0, x)) for x in mu)
    h1_low = sum(2.0 * _inv(d2(top, x)) for x in mu if x < mu0)
    h = 2.0 * _inv(d2(mu0, top))
    h1 = sum(2.0 * _inv(d2(top, x)) for x in mu[1:])
    h0 = sum(2.0 * _inv(d2(mu0, x)) for x in mu if x >= mu0)
    if m > 0:
        delta_min = min(abs(x - mu0) for x in mu if x > mu0)
        factor = K / m - 1.0
        # every arm above mu0 makes the term exactly 0, even if the gap squares to 0
        h_u = 0.0 if factor == 0.0 else factor * _inv(delta_min**2)
    else:
        delta_min = math.inf
        h_u = math.inf
    h_of_j = {}
    for j in range(1, m + 1):
        muj = mu[j - 1]
        h_of_j[j] = sum(_inv(max(d2(muj, x), d2(x, mu0))) for x in mu) / j

    named = {"h1_neg": h1_neg, "h1_low": h1_low, "h": h, "h1": h1, "h0": h0, "h_u": h_u}
    named.update({f"h_of_j[{j}]": v for j, v in h_of_j.items()})
    infinite = tuple(k for k, v in named.items() if math.isinf(v))
    return ComplexityProfile(
        gaps=gaps,
        order=order,
        m=m,
        h1_neg=h1_neg,
        h1_low=h1_low,
        h=h,
        h1=h1,
        h0=h0,
        h_u=h_u,
        h_of_j=h_of_j,
        delta_min=delta_min,
        boundary=classify(instance).is_boundary,
        infinite=infinite,
    )


# ---------------------------------------------------------------------------
# random streams


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def mix_seed(base_seed: int, index: int) -> int:
    """Per-trial seed: ``splitmix64(base_seed XOR splitmix64(index))``.

    Trial ``i`` depends only on ``(base_seed, i)``, so adding trials never
    perturbs earlier ones.
    """
    return splitmix64((base_seed & MASK64) ^ splitmix64(index & MASK64))


class RngStream:
    """Counter-based random stream identified by ``(seed, key)``.

    Values are produced by a Philox generator seeded from
    ``SeedSequence(seed, spawn_key=key)``, so the ``i``-th draw of a stream
    depends only on the seed, the key and ``i``.  Draws are cached, which
    makes random access by draw index cheap and prefix-stable.
    """

    __slots__ = ("seed", "key", "_gens", "_bufs")

    def __init__(self, seed: int, key: Tuple[int, ...] = ()):
        self.seed = int(seed) & MASK64
        self.key = tuple(int(k) for k in key)
        self._gens: Dict[str, np.random.Generator] = {}
        self._bufs: Dict[str, np.ndarray] = {}

    def substream(self, *ids: int) -> "RngStream":
        return RngStream(self.seed, self.key + tuple(ids))

    def generator(self) -> np.random.Generator:
        """A fresh generator for this stream (independent of the draw cache)."""
        ss = np.random.SeedSequence(self.seed, spawn_key=self.key)
        return np.random.Generator(np.random.Philox(ss))

    def _values(self, kind: str, n: int) -> np.ndarray:
        buf = self._bufs.get(kind)
        have = 0 if buf is None else buf.shape[0]
        if n > have:
            gen = self._gens.get(kind)
            if gen is None:
                ss = np.random.SeedSequence(self.seed, spawn_key=self.key + (_KIND_TAG[kind],))
                gen = self._gens[kind] = np.random.Generator(np.random.Philox(ss))
            extra = max(n - have, have, 64)
            if kind == "normal":
                new = gen.standard_normal(extra)
            else:
                new = gen.random(extra)
            buf = new if buf is None else np.concatenate([buf, new])
            self._bufs[kind] = buf
        return buf[:n]

    def normals(self, n: int) -> np.ndarray:
        return self._values("normal", n)

    def uniforms(self, n: int) -> np.ndarray:
        return self._values("uniform", n)

    def noise(self, n: int, noise: str) -> np.ndarray:
        """First ``n`` zero-mean noise values under the given noise model."""
        kind, width = _parse_noise(noise)
        if kind == "gaussian":
            return self.normals(n)
        return width * (2.0 * self.uniforms(n) - 1.0)


_KIND_TAG = {"normal": 0, "uniform": 1}


def reward_block(instance: BanditInstance, arm: int, rng: RngStream, n: int) -> np.ndarray:
    """First ``n`` rewards of ``arm`` drawn from the (per-arm) stream ``rng``."""
    return instance.means[arm] + rng.noise(n, instance.noise)


def sample(instance: BanditInstance, arm: int, rng: RngStream, index: int = 0) -> float:
    """Reward number ``index`` (0-based) of ``arm`` from ``rng.substream(arm)``."""
    if not (0 <= arm < instance.K):
        raise IndexError(f"arm {arm} outside 0..{instance.K - 1}")
    if index < 0:
        raise IndexError("draw index must be non-negative")
    return float(reward_block(instance, arm, rng.substream(arm), index + 1)[index])


def permutation(n: int, rng: RngStream) -> np.ndarray:
    return rng.generator().permutation(n)
