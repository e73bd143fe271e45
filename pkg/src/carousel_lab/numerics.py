"""Shared numerical utilities: seeded streams, KS statistics, polynomial roots,
linear solves."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np


class ArgumentError(ValueError):
    """Invalid input to a numerical routine."""


class NumericError(ArithmeticError):
    """A computation produced a value outside its valid range."""


class SingularSystemError(NumericError):
    pass


class ConvergenceError(NumericError):
    pass


@dataclass(frozen=True)
class RandomStream:
    """Reproducible substream of a 64-bit seed.

    Each ``(seed, stream_index)`` maps to its own ``SeedSequence`` spawn key,
    so substreams can be handed to workers in any order.
    """

    seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise ArgumentError("stream_index must be non-negative")
        if not 0 <= self.seed < 2**64:
            raise ArgumentError("seed must fit in an unsigned 64-bit integer")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(self.seed, spawn_key=(self.stream_index,))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, k: int) -> "RandomStream":
        # Children live in a separate index block from the parent's siblings.
        return RandomStream(self.seed, (self.stream_index + 1) * 1_000_003 + k)


def as_generator(rng) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator()
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, (int, np.integer)):
        return RandomStream(int(rng)).generator()
    raise ArgumentError(f"cannot build a generator from {type(rng).__name__}")


# ---------------------------------------------------------------------------
# Kolmogorov-Smirnov


def ks_critical_value(n_a: int, n_b: int | None = None, coefficient: float = 1.63) -> float:
    """Asymptotic 1% critical value (one- or two-sample)."""
    if n_b is None:
        return coefficient / np.sqrt(n_a)
    return coefficient * np.sqrt((n_a + n_b) / (n_a * n_b))


@dataclass(frozen=True)
class KsReport:
    statistic: float
    sample_sizes: tuple[int, int]
    threshold: float
    passed: bool


def _as_sorted(x) -> np.ndarray:
    arr = np.asarray(x, dtype=float).ravel()
    if arr.size == 0:
        raise ArgumentError("sample must be non-empty")
    if np.any(arr[1:] < arr[:-1]):
        arr = np.sort(arr)
    return arr


def ks_two_sample(a, b, threshold: float | None = None) -> KsReport:
    """Two-sample KS distance sup_x |F_a(x) - F_b(x)|.

    Ties (within or across samples) are handled by evaluating both empirical
    CDFs right-continuously at every observed value.
    """
    a = _as_sorted(a)
    b = _as_sorted(b)
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    stat = float(np.max(np.abs(fa - fb)))
    if threshold is None:
        threshold = ks_critical_value(a.size, b.size)
    return KsReport(stat, (a.size, b.size), float(threshold), stat < threshold)


def ks_against_cdf(a, cdf: Callable, threshold: float | None = None) -> KsReport:
    """One-sample KS statistic against a continuous CDF.

    ``cdf`` must accept a numpy array.
    """
    a = _as_sorted(a)
    n = a.size
    f = np.asarray(cdf(a), dtype=float)
    if np.any(f < -1e-12) or np.any(f > 1 + 1e-12) or not np.all(np.isfinite(f)):
        raise NumericError("CDF returned values outside [0, 1]")
    i = np.arange(1, n + 1)
    stat = float(max(np.max(np.abs(i / n - f)), np.max(np.abs((i - 1) / n - f))))
    if threshold is None:
        threshold = ks_critical_value(n)
    return KsReport(stat, (n, n), float(threshold), stat < threshold)


def sup_cdf_distance(samples, cdf: Callable, grid) -> float:
    """max over ``grid`` of |empirical CDF - cdf|; safe with atoms."""
    s = _as_sorted(samples)
    grid = np.asarray(grid, dtype=float)
    emp = np.searchsorted(s, grid, side="right") / s.size
    return float(np.max(np.abs(emp - np.asarray(cdf(grid), dtype=float))))


# ---------------------------------------------------------------------------
# Polynomials


@dataclass(frozen=True)
class Polynomial:
    """Polynomial with complex coefficients in ascending degree order."""

    coefficients: tuple

    def __init__(self, coefficients: Sequence[complex]):
        c = [complex(x) for x in coefficients]
        while len(c) > 1 and c[-1] == 0:
            c.pop()
        if not c:
            c = [0j]
        object.__setattr__(self, "coefficients", tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.coefficients)

    def __call__(self, s):
        # Horner, highest degree first.
        s = np.asarray(s, dtype=complex)
        out = np.zeros_like(s)
        for c in reversed(self.coefficients):
            out = out * s + c
        return out

    def derivative(self) -> "Polynomial":
        c = self.coefficients
        return Polynomial([k * c[k] for k in range(1, len(c))] or [0])

    def scale(self, s):
        """Sum of |a_k| |s|^k, the natural size of p near ``s``."""
        s = np.abs(np.asarray(s, dtype=complex))
        out = np.zeros(s.shape)
        for c in reversed(self.coefficients):
            out = out * s + abs(c)
        return out

    @classmethod
    def from_numpy(cls, p: np.polynomial.Polynomial) -> "Polynomial":
        return cls(p.coef)


def poly_roots(p: Polynomial, polish_steps: int = 1) -> np.ndarray:
    """All roots of ``p`` via companion-matrix eigenvalues, Newton-polished."""
    if p.degree < 1:
        raise ArgumentError("polynomial must have degree >= 1")
    c = np.asarray(p.coefficients)
    monic = c[:-1] / c[-1]
    deg = p.degree
    comp = np.zeros((deg, deg), dtype=complex)
    comp[1:, :-1] = np.eye(deg - 1)
    comp[:, -1] = -monic
    if p.is_real:
        comp = comp.real
    roots = np.linalg.eigvals(comp).astype(complex)

    dp = p.derivative()
    for _ in range(polish_steps):
        d = dp(roots)
        ok = np.abs(d) > 0
        step = np.zeros_like(roots)
        with np.errstate(over="ignore", invalid="ignore"):
            step[ok] = p(roots[ok]) / d[ok]
            candidate = roots - step
            # near repeated roots the step can blow up; keep the eigenvalue then
            better = np.isfinite(candidate) & (np.abs(p(candidate)) <= np.abs(p(roots)))
        roots = np.where(better, candidate, roots)

    if p.is_real:
        roots = _symmetrize_conjugates(roots)
    return roots


def _symmetrize_conjugates(roots: np.ndarray, tol: float = 1e-8) -> np.ndarray:
    """Pair each non-real root with its conjugate and make the pair exact."""
    roots = roots.copy()
    scale = np.maximum(1.0, np.abs(roots))
    is_real = np.abs(roots.imag) <= tol * scale
    roots[is_real] = roots[is_real].real
    upper = [i for i in range(roots.size) if not is_real[i] and roots[i].imag > 0]
    lower = [i for i in range(roots.size) if not is_real[i] and roots[i].imag < 0]
    used = set()
    for i in upper:
        j = min((k for k in lower if k not in used), key=lambda k: abs(roots[k] - np.conj(roots[i])))
        used.add(j)
        mid = 0.5 * (roots[i] + np.conj(roots[j]))
        roots[i], roots[j] = mid, np.conj(mid)
    return roots


# ---------------------------------------------------------------------------
# Linear systems


def solve_linear(A, b, max_condition: float = 1e12) -> np.ndarray:
    A = np.asarray(A)
    b = np.asarray(b)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ArgumentError("matrix must be square")
    if b.shape[0] != A.shape[0]:
        raise ArgumentError("dimension mismatch between matrix and right-hand side")
    cond = np.linalg.cond(A)
    if not np.isfinite(cond) or cond > max_condition:
        raise SingularSystemError(f"matrix is numerically singular (condition {cond:.3g})")
    return np.linalg.solve(A, b)


def trapezoid_weights(m: int, h: float) -> np.ndarray:
    w = np.full(m, h)
    w[0] = w[-1] = 0.5 * h
    if m == 1:
        w[0] = 0.0
    return w


def map_chunks(fn, stream: RandomStream, total: int, chunk: int = 50_000, threads: int = 1):
    """Run ``fn(size, generator)`` over fixed chunks of ``total`` draws.

    Chunk ``k`` always uses ``stream.substream(k)``, so the concatenated
    result does not depend on ``threads``.
    """
    if total < 0:
        raise ArgumentError("total must be non-negative")
    if not isinstance(stream, RandomStream):
        raise ArgumentError("map_chunks needs a RandomStream")
    sizes = [chunk] * (total // chunk)
    if total % chunk:
        sizes.append(total % chunk)
    jobs = [(s, stream.substream(k)) for k, s in enumerate(sizes)]
    if threads > 1 and len(jobs) > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(lambda job: fn(job[0], job[1].generator()), jobs))
    else:
        parts = [fn(s, sub.generator()) for s, sub in jobs]
    if not parts:
        return np.empty(0)
    if isinstance(parts[0], tuple):
        return tuple(np.concatenate(p) for p in zip(*parts))
    return np.concatenate(parts)
