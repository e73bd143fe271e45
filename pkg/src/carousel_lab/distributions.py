"""Pick- and rotation-time laws.

Every family exposes ``cdf``, ``cdf_left`` (P[X < x]), ``mean``, ``scv``,
``sample`` and ``integrated_cdf`` (G(c) = int_0^c F(a) da). Families with a
closed-form Laplace-Stieltjes transform E[exp(-sX)] also provide its
derivatives through ``lst_derivative``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate, special

from .numerics import ArgumentError


class Distribution:
    family = "abstract"
    #: upper end of the support (inf if unbounded)
    support_max = math.inf

    def cdf(self, x):
        raise NotImplementedError

    def cdf_left(self, x):
        return self.cdf(x)

    def mean(self) -> float:
        raise NotImplementedError

    def second_moment(self) -> float:
        raise NotImplementedError

    def scv(self) -> float:
        m = self.mean()
        return (self.second_moment() - m * m) / (m * m)

    def sample(self, gen: np.random.Generator, size: int) -> np.ndarray:
        raise NotImplementedError

    def integrated_cdf(self, c):
        raise NotImplementedError

    def lst_derivative(self, j: int, s: float) -> float:
        raise ArgumentError(f"{self.family} has no closed-form LST")

    @property
    def has_lst(self) -> bool:
        return type(self).lst_derivative is not Distribution.lst_derivative

    def atoms(self) -> np.ndarray:
        """Points carrying positive probability mass."""
        return np.empty(0)

    def describe(self) -> str:
        return self.family

    def __repr__(self):
        return self.describe()


def _rising(k: int, j: int) -> float:
    out = 1.0
    for i in range(j):
        out *= k + i
    return out


@dataclass(frozen=True, repr=False)
class Uniform01(Distribution):
    family = "uniform01"
    support_max = 1.0

    def cdf(self, x):
        return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)

    def mean(self):
        return 0.5

    def second_moment(self):
        return 1.0 / 3.0

    def sample(self, gen, size):
        return gen.random(size)

    def integrated_cdf(self, c):
        c = np.asarray(c, dtype=float)
        return np.where(c <= 0, 0.0, np.where(c < 1, 0.5 * c * c, c - 0.5))

    def lst_derivative(self, j, s):
        val, _ = integrate.quad(lambda x: (-x) ** j * math.exp(-s * x), 0.0, 1.0)
        return val

    def describe(self):
        return "uniform01"


@dataclass(frozen=True, repr=False)
class Erlang(Distribution):
    rate: float
    stages: int = 1
    family = "erlang"

    def __post_init__(self):
        if not self.rate > 0 or self.stages < 1 or int(self.stages) != self.stages:
            raise ArgumentError("Erlang needs rate > 0 and an integer stage count >= 1")

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x > 0, special.gammainc(self.stages, self.rate * np.maximum(x, 0)), 0.0)

    def mean(self):
        return self.stages / self.rate

    def second_moment(self):
        k = self.stages
        return k * (k + 1) / self.rate**2

    def sample(self, gen, size):
        if self.stages == 1:
            return gen.standard_exponential(size) / self.rate
        return gen.gamma(self.stages, 1.0 / self.rate, size)

    def integrated_cdf(self, c):
        # G(c) = c F_k(c) - E[A; A <= c] = c F_k(c) - (k / rate) F_{k+1}(c)
        c = np.maximum(np.asarray(c, dtype=float), 0.0)
        k, lam = self.stages, self.rate
        return c * special.gammainc(k, lam * c) - (k / lam) * special.gammainc(k + 1, lam * c)

    def lst_derivative(self, j, s):
        k, lam = self.stages, self.rate
        return (-1) ** j * lam**k * _rising(k, j) / (lam + s) ** (k + j)

    def describe(self):
        if self.stages == 1:
            return f"exp:{self.rate:g}"
        return f"erlang:{self.rate:g}:{self.stages}"


def Exponential(rate: float) -> Erlang:
    return Erlang(rate, 1)


@dataclass(frozen=True, repr=False)
class MixedErlang(Distribution):
    """Mixture of Erlang branches, branch i with (weight, rate, stages)."""

    weights: tuple[float, ...]
    rates: tuple[float, ...]
    stages: tuple[int, ...]
    family = "mixerlang"

    def __post_init__(self):
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        object.__setattr__(self, "rates", tuple(float(r) for r in self.rates))
        object.__setattr__(self, "stages", tuple(int(k) for k in self.stages))
        if not (len(self.weights) == len(self.rates) == len(self.stages) >= 1):
            raise ArgumentError("mixed Erlang needs matching weight/rate/stage lists")
        if any(w < 0 for w in self.weights) or abs(sum(self.weights) - 1) > 1e-12:
            raise ArgumentError("mixture weights must be non-negative and sum to 1")

    @property
    def branches(self) -> list[Erlang]:
        return [Erlang(r, k) for r, k in zip(self.rates, self.stages)]

    def _mix(self, name, *args):
        return sum(w * getattr(b, name)(*args) for w, b in zip(self.weights, self.branches))

    def cdf(self, x):
        return self._mix("cdf", x)

    def mean(self):
        return self._mix("mean")

    def second_moment(self):
        return self._mix("second_moment")

    def integrated_cdf(self, c):
        return self._mix("integrated_cdf", c)

    def lst_derivative(self, j, s):
        return self._mix("lst_derivative", j, s)

    def sample(self, gen, size):
        branch = gen.choice(len(self.weights), size=size, p=np.asarray(self.weights))
        out = np.empty(size)
        for i, b in enumerate(self.branches):
            idx = np.flatnonzero(branch == i)
            out[idx] = b.sample(gen, idx.size)
        return out

    def describe(self):
        parts = [f"{w:g}:{r:g}:{k}" for w, r, k in zip(self.weights, self.rates, self.stages)]
        return "mixerlang:" + ":".join(parts)


@dataclass(frozen=True, repr=False)
class Deterministic(Distribution):
    value: float
    family = "det"

    def __post_init__(self):
        if self.value < 0:
            raise ArgumentError("deterministic time must be non-negative")

    @property
    def support_max(self):
        return self.value

    def cdf(self, x):
        return (np.asarray(x, dtype=float) >= self.value).astype(float)

    def cdf_left(self, x):
        return (np.asarray(x, dtype=float) > self.value).astype(float)

    def mean(self):
        return self.value

    def second_moment(self):
        return self.value**2

    def scv(self):
        return 0.0

    def sample(self, gen, size):
        return np.full(size, self.value)

    def integrated_cdf(self, c):
        return np.maximum(np.asarray(c, dtype=float) - self.value, 0.0)

    def lst_derivative(self, j, s):
        return (-self.value) ** j * math.exp(-s * self.value)

    def atoms(self):
        return np.array([self.value])

    def describe(self):
        return f"det:{self.value:g}"


@dataclass(frozen=True, repr=False)
class Empirical(Distribution):
    """Step CDF of a finite sample; each observation carries mass 1/n."""

    samples: tuple[float, ...]
    label: str = ""
    family = "empirical"

    def __post_init__(self):
        vals = np.sort(np.asarray(self.samples, dtype=float))
        if vals.size == 0:
            raise ArgumentError("empirical distribution needs at least one sample")
        if np.any(vals < 0) or not np.all(np.isfinite(vals)):
            raise ArgumentError("empirical samples must be finite and non-negative")
        object.__setattr__(self, "samples", tuple(vals.tolist()))
        object.__setattr__(self, "_arr", vals)
        object.__setattr__(self, "_cum", np.concatenate([[0.0], np.cumsum(vals)]))

    @property
    def support_max(self):
        return float(self._arr[-1])

    def cdf(self, x):
        return np.searchsorted(self._arr, np.asarray(x, dtype=float), side="right") / self._arr.size

    def cdf_left(self, x):
        return np.searchsorted(self._arr, np.asarray(x, dtype=float), side="left") / self._arr.size

    def mean(self):
        return float(self._arr.mean())

    def second_moment(self):
        return float(np.mean(self._arr**2))

    def sample(self, gen, size):
        return self._arr[gen.integers(0, self._arr.size, size)]

    def integrated_cdf(self, c):
        # mean of (c - x_i)_+, piecewise linear and exact
        c = np.asarray(c, dtype=float)
        k = np.searchsorted(self._arr, c, side="right")
        return (k * c - self._cum[k]) / self._arr.size

    def lst_derivative(self, j, s):
        return float(np.mean((-self._arr) ** j * np.exp(-s * self._arr)))

    def atoms(self):
        return np.unique(self._arr)

    def describe(self):
        return f"empirical:{self.label}" if self.label else f"empirical[{self._arr.size}]"


UNIFORM01 = Uniform01()


def fit_mean_scv(mean: float, scv: float) -> Distribution:
    """Two-moment fit: mixed Erlang(k-1, k) for scv < 1, balanced-means
    hyperexponential for scv > 1, exponential at scv == 1."""
    if not mean > 0 or not scv > 0:
        raise ArgumentError("mean and squared coefficient of variation must be positive")
    if abs(scv - 1.0) < 1e-12:
        return Exponential(1.0 / mean)
    if scv < 1.0:
        k = math.ceil(1.0 / scv - 1e-12)
        if k < 2:
            k = 2
        p = (k * scv - math.sqrt(k * (1 + scv) - k * k * scv)) / (1 + scv)
        p = min(max(p, 0.0), 1.0)
        rate = (k - p) / mean
        if p < 1e-12:
            return Erlang(rate, k)
        return MixedErlang((p, 1 - p), (rate, rate), (k - 1, k))
    p1 = 0.5 * (1 + math.sqrt((scv - 1) / (scv + 1)))
    return MixedErlang((p1, 1 - p1), (2 * p1 / mean, 2 * (1 - p1) / mean), (1, 1))


def parse_distribution(text: str) -> Distribution:
    """``uniform01``, ``exp:RATE``, ``erlang:RATE:STAGES``, ``det:VALUE``,
    ``mixerlang:w1:r1:k1:w2:r2:k2...``, ``empirical:PATH``."""
    head, _, rest = text.strip().partition(":")
    head = head.lower()
    try:
        if head in ("uniform01", "uniform", "u01"):
            if rest:
                raise ArgumentError("uniform01 takes no parameters")
            return UNIFORM01
        if head == "exp":
            return Exponential(float(rest))
        if head == "erlang":
            r, k = rest.split(":")
            return Erlang(float(r), int(k))
        if head == "det":
            return Deterministic(float(rest))
        if head == "mixerlang":
            vals = rest.split(":")
            if len(vals) % 3 or not vals:
                raise ArgumentError("mixerlang expects weight:rate:stages triples")
            w = [float(v) for v in vals[0::3]]
            r = [float(v) for v in vals[1::3]]
            k = [int(v) for v in vals[2::3]]
            return MixedErlang(tuple(w), tuple(r), tuple(k))
        if head == "empirical":
            return Empirical(tuple(read_number_file(rest)), label=rest)
    except (ValueError, TypeError) as exc:
        raise ArgumentError(f"bad distribution {text!r}: {exc}") from exc
    raise ArgumentError(f"unknown distribution {text!r}")


def read_number_file(path: str | Path) -> list[float]:
    """One decimal per line; blank lines and '#' comments ignored."""
    out = []
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        try:
            out.append(float(line))
        except ValueError as exc:
            raise ArgumentError(f"{path}:{lineno}: not a number: {line!r}") from exc
    return out
