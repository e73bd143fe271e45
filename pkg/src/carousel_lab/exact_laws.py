"""Closed-form travel-time laws, representation samplers and limit functionals
for single-carousel strategies."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy import integrate

from .numerics import ArgumentError, NumericError, as_generator
from .strategies import Kind, StrategySpec


class PrecisionError(NumericError):
    """Float evaluation would lose too many digits to cancellation."""


# Beyond this order the caller must opt in to (slow) exact evaluation. The
# float path with exactly computed coefficients stays within ~1e-15 of the
# exact value up to here; see tests/test_exact_laws.py.
EXACT_MAX_N = 64


def _check_t(t):
    if not (0 <= t <= 1):
        raise ArgumentError(f"t={t!r} outside [0, 1]")


def _check_n(n):
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ArgumentError(f"n must be a positive integer, got {n!r}")


def cw_cdf(n: int, t):
    """P(T_n^CW <= t) = t**n."""
    _check_n(n)
    _check_t(t)
    return t**n


@lru_cache(maxsize=None)
def ni_coefficients(n: int) -> tuple[Fraction, ...]:
    """prod_{j != i} 2^j / (2^j - 2^i) for i = 0..n, exactly."""
    _check_n(n)
    out = []
    for i in range(n + 1):
        c = Fraction(1)
        for j in range(n + 1):
            if j != i:
                c *= Fraction(2**j, 2**j - 2**i)
        out.append(c)
    return tuple(out)


def ni_cdf(n: int, t, high_precision: bool = False):
    """P(T_n^NI <= t) for the nearest-item heuristic.

    Evaluated in exact rational arithmetic. ``int`` and ``Fraction`` inputs
    return a ``Fraction``; floats are converted exactly and the result is
    rounded once at the end.
    """
    _check_n(n)
    _check_t(t)
    if n > EXACT_MAX_N and not high_precision:
        raise PrecisionError(f"n={n} exceeds {EXACT_MAX_N}; pass high_precision=True")
    exact_in = isinstance(t, (int, Fraction))
    tf = Fraction(t)
    total = Fraction(0)
    for i, c in enumerate(ni_coefficients(n)):
        base = 2**i * tf - 2**i + 1
        if base > 0:
            total += c * base**n
    return total if exact_in else float(total)


def ni_cdf_array(n: int, t, high_precision: bool = False) -> np.ndarray:
    """Vectorised nearest-item CDF.

    Coefficients are computed exactly and rounded once; the sum is taken in
    floats for n <= EXACT_MAX_N.
    """
    _check_n(n)
    t = np.asarray(t, dtype=float)
    if np.any((t < 0) | (t > 1)):
        raise ArgumentError("t outside [0, 1]")
    if n > EXACT_MAX_N:
        if not high_precision:
            raise PrecisionError(f"n={n} exceeds {EXACT_MAX_N}; pass high_precision=True")
        return np.vectorize(lambda x: ni_cdf(n, float(x), True), otypes=[float])(t)
    coef = [float(c) for c in ni_coefficients(n)]
    out = np.zeros_like(t)
    for i, c in enumerate(coef):
        base = np.maximum(2.0**i * t - (2.0**i - 1.0), 0.0)
        out += c * base**n
    return np.clip(out, 0.0, 1.0)


def ni_support_max(n: int) -> float:
    return 1.0 - 2.0**-n


def ni_mean(n: int) -> float:
    """(n - 1 + 2^-n) / (n + 1), from E[D_i] = 1/(n+1)."""
    _check_n(n)
    return (n - 1 + 2.0**-n) / (n + 1)


def cw_mean(n: int) -> float:
    _check_n(n)
    return n / (n + 1)


@dataclass(frozen=True)
class TravelTimeLaw:
    strategy: StrategySpec
    n: int
    cdf: Callable
    mean: float

    def moment(self, k: int) -> float:
        """E[T^k] = int_0^1 k t^(k-1) (1 - F(t)) dt."""
        val, _ = integrate.quad(lambda t: k * t ** (k - 1) * (1 - self.cdf(t)), 0, 1,
                                limit=200, points=self._kinks())
        return val

    def variance(self) -> float:
        return self.moment(2) - self.moment(1) ** 2

    def _kinks(self):
        if self.strategy.kind is Kind.NEAREST_ITEM:
            return [1 - 2.0**-i for i in range(1, min(self.n, 40) + 1)]
        return None


def travel_time_law(strategy: StrategySpec, n: int) -> TravelTimeLaw:
    _check_n(n)
    if strategy.kind is Kind.CLOCKWISE or strategy.kind is Kind.COUNTERCLOCKWISE:
        return TravelTimeLaw(strategy, n, lambda t: cw_cdf(n, t), cw_mean(n))
    if strategy.kind is Kind.NEAREST_ITEM:
        return TravelTimeLaw(strategy, n, lambda t: ni_cdf(n, float(t)), ni_mean(n))
    raise ArgumentError(f"no closed-form law for {strategy}")


# ---------------------------------------------------------------------------
# Representation samplers


def sample_ni_representation(n: int, rng, size: int | None = None):
    """Draws of sum_{i=1}^n (1 - 2^-i) D_{i,n}."""
    _check_n(n)
    gen = as_generator(rng)
    m = 1 if size is None else size
    x = gen.standard_exponential((m, n + 1))
    w = 1.0 - 2.0 ** -np.arange(1, n + 1)
    out = (x[:, :n] @ w) / x.sum(axis=1)
    return float(out[0]) if size is None else out


def mstep_weights(m: int) -> np.ndarray:
    return 1.0 / (2.0 ** np.arange(1, m + 2) - 1.0)


def sample_mstep_representation(n: int, m: int, rng, size: int | None = None):
    """Draws of 1 - max(sum_j X_j/(2^j-1), sum_j X_{n+2-j}/(2^j-1)) / S_{n+1}.

    Only valid for 2m < n.
    """
    _check_n(n)
    if m < 0 or 2 * m >= n:
        raise ArgumentError(f"representation needs 2m < n (got m={m}, n={n})")
    gen = as_generator(rng)
    k = 1 if size is None else size
    x = gen.standard_exponential((k, n + 1))
    w = mstep_weights(m)
    front = x[:, : m + 1] @ w
    back = x[:, ::-1][:, : m + 1] @ w  # X_{n+1}, X_n, ..., X_{n+1-m}
    out = 1.0 - np.maximum(front, back) / x.sum(axis=1)
    return float(out[0]) if size is None else out


# ---------------------------------------------------------------------------
# Limit functionals


@dataclass(frozen=True)
class LimitFunctionalSpec:
    """``kind`` in {"I_q", "J_q", "ni-limit", "opt-limit"}; ``q`` for I_q/J_q."""

    kind: str
    q: float | None = None
    truncation_terms: int | None = None

    def __post_init__(self):
        if self.kind not in ("I_q", "J_q", "ni-limit", "opt-limit"):
            raise ArgumentError(f"unknown limit functional {self.kind!r}")
        if self.kind in ("I_q", "J_q"):
            if self.q is None or not (0 < self.q < 1):
                raise ArgumentError("q must lie in (0, 1)")
        if self.truncation_terms is None:
            object.__setattr__(self, "truncation_terms", self._default_terms())
        elif self.tail_bound() >= 1e-12 * self.mean():
            raise ArgumentError(f"{self.truncation_terms} terms leave a tail above 1e-12 of the mean")

    @property
    def effective_q(self) -> float:
        return 0.5 if self.kind in ("ni-limit", "opt-limit") else self.q

    def coefficients(self, k: int | None = None) -> np.ndarray:
        k = self.truncation_terms if k is None else k
        j = np.arange(1, k + 1, dtype=float)
        q = self.effective_q
        if self.kind in ("I_q", "ni-limit"):
            return q ** (j - 1)
        if self.kind == "J_q":
            return (1 / q - 1) / (q**-j - 1)
        return 1.0 / (2.0**j - 1.0)

    def tail_bound(self) -> float:
        """Upper bound on the mean contributed by terms beyond the truncation."""
        k = self.truncation_terms
        q = self.effective_q
        if self.kind in ("I_q", "ni-limit"):
            return q**k / (1 - q)
        # (q^-j - 1)^-1 <= q^j / (1 - q) for j >= 1
        scale = (1 / q - 1) if self.kind == "J_q" else 1.0
        return scale * q ** (k + 1) / (1 - q) ** 2

    def mean(self) -> float:
        """Mean of the (untruncated) functional; for opt-limit, of one branch."""
        if self.kind in ("I_q", "ni-limit"):
            return 1 / (1 - self.effective_q)
        return float(self.coefficients(200).sum())

    def _default_terms(self) -> int:
        k = 1
        while True:
            object.__setattr__(self, "truncation_terms", k)
            if self.tail_bound() < 1e-12 * self.mean():
                return k
            k += 1


def sample_limit_functional(spec: LimitFunctionalSpec, rng, size: int | None = None):
    gen = as_generator(rng)
    m = 1 if size is None else size
    c = spec.coefficients()
    k = c.size
    if spec.kind == "opt-limit":
        x = gen.standard_exponential((m, 2 * k))
        out = np.maximum(x[:, :k] @ c, x[:, k:] @ c)
    else:
        out = gen.standard_exponential((m, k)) @ c
    return float(out[0]) if size is None else out
