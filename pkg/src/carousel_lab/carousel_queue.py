"""Two-carousel alternating-service model.

The picker waits W_{n+1} = max(0, B_{n+1} - A_n - W_n) before pick n+1, with
A the pick times and B the rotation times. This module simulates the
recursion and solves for its stationary law:

* ``solve_stationary_fixed_point``: uniform rotations, any pick law, by
  iterating the equilibrium map on a grid;
* ``solve_stationary_general``: any rotation law on [0, 1), CDF iteration;
* ``erlang_uniform_structure``: exponential-mixture form of the density for
  Erlang picks;
* ``solve_erlang_rotation``: Erlang rotations via a small linear system.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numba
import numpy as np
from scipy import integrate, special

from .distributions import UNIFORM01, Distribution, Empirical, Uniform01, fit_mean_scv
from .numerics import (
    ArgumentError,
    ConvergenceError,
    NumericError,
    Polynomial,
    SingularSystemError,
    as_generator,
    poly_roots,
    solve_linear,
    trapezoid_weights,
)


class StructureMismatchError(NumericError):
    """Solved density is not in the span predicted by the Erlang structure."""


class ModelInputError(ArgumentError):
    pass


# ---------------------------------------------------------------------------
# Simulation


@dataclass
class WaitingPath:
    waits: np.ndarray  # W_0..W_N
    picks: np.ndarray  # A_0..A_N, A_0 = 0
    rotations: np.ndarray  # B_0..B_N, B_0 unused (0)
    burn_in: int = 0

    @property
    def window(self) -> slice:
        return slice(self.burn_in + 1, None)

    def summary(self, batches: int = 50) -> "PathSummary":
        return summarize(self.waits[self.window], self.picks[self.window], batches)


@dataclass(frozen=True)
class PathSummary:
    mean_wait: float
    mean_wait_se: float
    pi0: float
    pi0_se: float
    mean_pick: float
    throughput: float
    utilization: float
    steps: int


def batch_se(x: np.ndarray, batches: int = 50) -> float:
    n = x.size // batches
    if n < 2:
        return float("nan")
    means = x[: n * batches].reshape(batches, n).mean(axis=1)
    return float(means.std(ddof=1) / math.sqrt(batches))


def summarize(waits: np.ndarray, picks: np.ndarray, batches: int = 50) -> PathSummary:
    mw = float(waits.mean())
    ma = float(picks.mean())
    zero = (waits == 0).astype(float)
    cycle = mw + ma
    return PathSummary(
        mean_wait=mw,
        mean_wait_se=batch_se(waits, batches),
        pi0=float(zero.mean()),
        pi0_se=batch_se(zero, batches),
        mean_pick=ma,
        throughput=1.0 / cycle if cycle > 0 else math.inf,
        utilization=ma / cycle if cycle > 0 else 1.0,
        steps=int(waits.size),
    )


def draw_inputs(pick: Distribution, rotation: Distribution, steps: int, gen):
    """Rotation draws B_1..B_N, then pick draws A_1..A_N, from one generator."""
    b = np.zeros(steps + 1)
    a = np.zeros(steps + 1)
    b[1:] = rotation.sample(gen, steps)
    a[1:] = pick.sample(gen, steps)
    return a, b


@numba.njit(cache=True)
def _alternating_kernel(a, b):
    n = a.size
    w = np.zeros(n)
    for k in range(n - 1):
        x = b[k + 1] - a[k] - w[k]
        w[k + 1] = x if x > 0.0 else 0.0
    return w


def simulate_recursion(pick: Distribution, rotation: Distribution, steps: int, burn_in: int,
                       rng) -> WaitingPath:
    if steps <= burn_in or burn_in < 0:
        raise ArgumentError("need steps > burn_in >= 0")
    a, b = draw_inputs(pick, rotation, steps, as_generator(rng))
    return WaitingPath(_alternating_kernel(a, b), a, b, burn_in)


# ---------------------------------------------------------------------------
# Stationary solution, uniform rotations


@dataclass
class StationarySolution:
    grid: np.ndarray
    atom_pi0: float
    density: np.ndarray | None
    cdf_values: np.ndarray
    mean_wait: float
    throughput: float
    iterations: int
    contraction: float  # P[B > A]
    pick: Distribution = field(repr=False, default=None)
    rotation: Distribution = field(repr=False, default=None)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        out = np.interp(x, self.grid, self.cdf_values)
        return np.where(x < 0, 0.0, np.where(x >= self.grid[-1], 1.0, out))

    def mass(self) -> float:
        h = self.grid[1] - self.grid[0]
        return self.atom_pi0 + float(trapezoid_weights(self.grid.size, h) @ self.density)


def prob_rotation_exceeds_pick(pick: Distribution, rotation: Distribution, cells: int = 8192) -> float:
    """P[B > A] for a rotation law on [0, 1)."""
    if isinstance(rotation, Uniform01):
        return float(pick.integrated_cdf(1.0))
    return 1.0 - float(_prob_rotation_le(pick, rotation, np.array([0.0]), cells)[0])


def _prob_rotation_le(pick: Distribution, rotation: Distribution, z: np.ndarray, cells: int = 8192):
    """H(z) = P[B <= A + z] on an array of z >= 0."""
    z = np.asarray(z, dtype=float)
    if isinstance(rotation, Uniform01):
        return 1.0 - pick.integrated_cdf(1.0 - np.minimum(z, 1.0))
    if isinstance(rotation, Empirical):
        vals, mass = np.asarray(rotation.samples), None
    elif rotation.atoms().size:
        vals, mass = rotation.atoms(), None
    else:
        # continuous rotation: Stieltjes sum over a fine partition of [0, 1]
        edges = np.linspace(0.0, 1.0, cells + 1)
        vals, mass = 0.5 * (edges[1:] + edges[:-1]), np.diff(rotation.cdf(edges))
    p_ge = 1.0 - pick.cdf_left(vals[None, :] - z[:, None])  # P[A >= b - z]
    if mass is None:
        return p_ge.mean(axis=1)
    return p_ge @ mass


def _check_unit_rotation(rotation: Distribution):
    if not rotation.support_max <= 1.0:
        raise ArgumentError("rotation law must live on [0, 1)")


def solve_stationary_fixed_point(pick: Distribution, rotation: Distribution = UNIFORM01,
                                 grid_size: int = 2048, tol: float = 1e-10,
                                 max_iter: int = 100_000) -> StationarySolution:
    """Stationary waiting time for uniform rotations by fixed-point iteration.

    Iterates the equilibrium map in density form,

        f(x) = pi0 P[A < 1-x] + int_0^{1-x} P[A < 1-x-w] f(w) dw,
        pi0  = 1 - int_0^1 f,

    with the trapezoid rule on a uniform grid of [0, 1]. This is the
    derivative of the CDF map F(x) = 1 - E[G_A(1 - x - W)], whose
    contraction factor is P[B > A]. Iteration stops when the CDF moves by
    less than ``tol`` in sup norm.
    """
    if not isinstance(rotation, Uniform01):
        raise ArgumentError("solve_stationary_fixed_point needs Uniform01 rotations; "
                            "use solve_stationary_general")
    m = int(grid_size)
    if m < 3:
        raise ArgumentError("grid_size must be at least 3")
    x = np.linspace(0.0, 1.0, m)
    h = x[1] - x[0]
    fa = pick.cdf_left(x)  # fa[k] = P[A < x_k]

    # K[i, j] = trapezoid weight on [0, x_{m-1-i}] times P[A < x_{m-1-i-j}]
    i = np.arange(m)[:, None]
    j = np.arange(m)[None, :]
    top = m - 1 - i
    wts = np.where(j < top, h, 0.0)
    wts = np.where((j == 0) | (j == top), 0.5 * h, wts)
    wts = np.where(j > top, 0.0, wts)
    wts[m - 1, 0] = 0.0
    idx = np.clip(top - j, 0, m - 1)
    K = wts * fa[idx]
    source = fa[::-1].copy()  # P[A < 1 - x_i]
    tw = trapezoid_weights(m, h)

    f = np.ones(m)
    cdf_prev = _cdf_from_density(1.0 - tw @ f, f, h)
    contraction = float(pick.integrated_cdf(1.0))
    for it in range(1, max_iter + 1):
        pi0 = 1.0 - tw @ f
        f = pi0 * source + K @ f
        cdf = _cdf_from_density(1.0 - tw @ f, f, h)
        change = np.max(np.abs(cdf - cdf_prev))
        cdf_prev = cdf
        if change < tol:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations (last change {change:.3g})")

    pi0 = float(1.0 - tw @ f)
    mean_wait = float(tw @ (x * f))
    return StationarySolution(x, pi0, f, cdf, mean_wait, 1.0 / (mean_wait + pick.mean()), it,
                              contraction, pick, rotation)


def _cdf_from_density(pi0, f, h):
    cum = np.concatenate([[0.0], np.cumsum(0.5 * h * (f[1:] + f[:-1]))])
    return pi0 + cum


# ---------------------------------------------------------------------------
# Stationary solution, general rotation on [0, 1)


def solve_stationary_general(pick: Distribution, rotation: Distribution, grid_size: int = 2048,
                             tol: float = 1e-10, max_iter: int = 100_000) -> StationarySolution:
    """Iterate F_{k+1}(x) = int H(x + w) dF_k(w), H(z) = P[B <= A + z].

    The Stieltjes integral uses cell masses of F_k and the average of H at the
    cell ends. Works for discrete rotation laws, where no density exists.
    """
    _check_unit_rotation(rotation)
    m = int(grid_size)
    x = np.linspace(0.0, 1.0, m)
    h = x[1] - x[0]
    z = np.arange(2 * m - 1) * h
    H = np.ones(z.size)
    inside = z < 1.0
    H[inside] = _prob_rotation_le(pick, rotation, z[inside])
    H = np.clip(H, 0.0, 1.0)
    # Hm[i, j] = (H(x_i + w_j) + H(x_i + w_{j+1})) / 2, j = 0..m-2
    idx = np.arange(m)[:, None] + np.arange(m - 1)[None, :]
    Hm = 0.5 * (H[idx] + H[idx + 1])
    H0 = H[:m]

    cdf = x.copy()
    for it in range(1, max_iter + 1):
        new = cdf[0] * H0 + Hm @ np.diff(cdf)
        new[-1] = 1.0
        change = np.max(np.abs(new - cdf))
        cdf = new
        if change < tol:
            break
    else:
        raise ConvergenceError(f"no convergence after {max_iter} iterations (last change {change:.3g})")

    tw = trapezoid_weights(m, h)
    mean_wait = float(tw @ (1.0 - cdf))
    density = None
    if isinstance(rotation, Uniform01):
        density = np.gradient(cdf, h)
    contraction = 1.0 - float(H[0])
    return StationarySolution(x, float(cdf[0]), density, cdf, mean_wait,
                              1.0 / (mean_wait + pick.mean()), it, contraction, pick, rotation)


# ---------------------------------------------------------------------------
# Erlang picks, uniform rotations: exponential-mixture structure


@dataclass
class ErlangUniformStructure:
    lam: float
    stages: int
    roots: np.ndarray
    coefficients: np.ndarray
    pi0: float
    throughput: float
    root_residual: float
    projection_residual: float

    def density(self, x):
        x = np.asarray(x, dtype=float)
        return np.real(np.exp(np.multiply.outer(x, self.roots)) @ self.coefficients)

    def density_complex(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(np.multiply.outer(x, self.roots)) @ self.coefficients


def erlang_uniform_polynomial(lam: float, stages: int) -> Polynomial:
    """R(s) = s^2 (lam^2 - s^2)^n + lam^(2n)."""
    base = np.polynomial.Polynomial([lam * lam, 0.0, -1.0]) ** stages
    r = np.polynomial.Polynomial([0.0, 0.0, 1.0]) * base + lam ** (2 * stages)
    return Polynomial(r.coef)


def _real_basis(roots: np.ndarray, x: np.ndarray):
    """Real basis spanning the conjugate-closed exponentials, and the map
    back to complex coefficients."""
    cols, back = [], []
    for k, r in enumerate(roots):
        if r.imag == 0:
            cols.append(np.exp(r.real * x))
            back.append(("real", k))
        elif r.imag > 0:
            e = np.exp(r.real * x)
            cols.append(e * np.cos(r.imag * x))
            cols.append(e * np.sin(r.imag * x))
            back.append(("pair", k))
    return np.column_stack(cols), back


def erlang_uniform_structure(lam: float, stages: int, base: StationarySolution | None = None,
                             residual_tol: float = 1e-6, identity_tol: float = 1e-4,
                             grid_size: int = 2048) -> ErlangUniformStructure:
    """Fit f_W(x) = sum_i c_i exp(r_i x) over the roots of R and check the
    atom and throughput identities against the grid solution."""
    from .distributions import Erlang

    if base is None:
        base = solve_stationary_fixed_point(Erlang(lam, stages), UNIFORM01, grid_size)
    p = erlang_uniform_polynomial(lam, stages)
    roots = poly_roots(p)
    if roots.size != 2 * stages + 2:
        raise NumericError("unexpected number of roots")
    sep = np.min(np.abs(roots[:, None] - roots[None, :]) + np.eye(roots.size) * 1e9)
    if sep < 1e-6:
        raise NumericError("clustered roots: exponential basis is degenerate")
    root_residual = float(np.max(np.abs(p(roots))))

    x = base.grid
    h = x[1] - x[0]
    sw = np.sqrt(trapezoid_weights(x.size, h))
    sw[0] = sw[-1] = math.sqrt(0.5 * h)
    basis, back = _real_basis(roots, x)
    alpha, *_ = np.linalg.lstsq(basis * sw[:, None], base.density * sw, rcond=None)
    fit = basis @ alpha
    projection_residual = float(np.linalg.norm((fit - base.density) * sw)
                                / np.linalg.norm(base.density * sw))
    if projection_residual > residual_tol:
        raise StructureMismatchError(
            f"density not in exponential span: relative residual {projection_residual:.3g}")

    coeffs = np.zeros(roots.size, dtype=complex)
    col = 0
    for kind, k in back:
        if kind == "real":
            coeffs[k] = alpha[col]
            col += 1
        else:
            c = 0.5 * (alpha[col] - 1j * alpha[col + 1])
            coeffs[k] = c
            partner = int(np.argmin(np.abs(roots - np.conj(roots[k]))))
            coeffs[partner] = np.conj(c)
            col += 2

    r = roots
    pi0 = float(np.real(1.0 - np.sum(coeffs / r * (np.exp(r) - 1.0))))
    inv_tau = float(np.real(stages / lam + np.sum(coeffs / r**2 * (1.0 + (r - 1.0) * np.exp(r)))))
    out = ErlangUniformStructure(lam, stages, roots, coeffs, pi0, 1.0 / inv_tau,
                                 root_residual, projection_residual)
    if abs(pi0 - base.atom_pi0) > identity_tol * max(1.0, abs(base.atom_pi0)):
        raise StructureMismatchError(f"atom identity off: {pi0} vs {base.atom_pi0}")
    if abs(out.throughput - base.throughput) > identity_tol * base.throughput:
        raise StructureMismatchError(f"throughput identity off: {out.throughput} vs {base.throughput}")
    return out


# ---------------------------------------------------------------------------
# General picks, Erlang rotations


@dataclass
class ErlangRotationSolution:
    mu: float
    stages: int
    psi_derivatives: np.ndarray  # psi^(k)(mu), k = 0..n-1
    phi_derivatives: np.ndarray  # phi^(i)(mu) of W + A
    pi0: float

    def density(self, x):
        """mu^n e^{-mu x} sum_i (-1)^i/i! phi^(i) x^(n-1-i)/(n-1-i)!"""
        x = np.asarray(x, dtype=float)
        n, mu = self.stages, self.mu
        poly = np.zeros_like(x)
        for i in range(n):
            poly = poly + ((-1) ** i / math.factorial(i)) * self.phi_derivatives[i] \
                * x ** (n - 1 - i) / math.factorial(n - 1 - i)
        return np.where(x >= 0, mu**n * np.exp(-mu * x) * poly, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        n, mu = self.stages, self.mu
        out = np.full(x.shape, self.pi0)
        for i in range(n):
            out = out + ((-mu) ** i / math.factorial(i)) * self.phi_derivatives[i] \
                * special.gammainc(n - i, mu * np.maximum(x, 0))
        return np.where(x < 0, 0.0, out)

    def mean_wait(self) -> float:
        # int x f(x) dx with int x^(m+1) e^{-mu x} / m! = (m+1)/mu^(m+2)
        n, mu = self.stages, self.mu
        return float(sum(((-1) ** i / math.factorial(i)) * self.phi_derivatives[i]
                         * mu**n * (n - i) / mu ** (n - i + 1) for i in range(n)))

    def density_mass(self) -> float:
        val, _ = integrate.quad(lambda t: float(self.density(t)), 0.0, np.inf, limit=200)
        return val


def erlang_rotation_system(alpha: np.ndarray, mu: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Matrix and right-hand side for psi^(0..n-1)(mu).

    ``alpha[j]`` is the j-th derivative of the pick-time LST at ``mu``.
    """
    fact = math.factorial
    M = np.eye(n)
    rhs = np.zeros(n)
    rhs[0] = 1.0
    for ell in range(n):
        for i in range(n):
            if ell == 0:
                coef = -((-mu) ** i) * (1.0 - 2.0 ** -(n - i))
            else:
                coef = (mu ** (i - ell) * (-1) ** (i + ell) / 2.0 ** (n - i + ell)
                        * fact(n - i + ell - 1) / fact(n - i - 1))
            for k in range(i + 1):
                M[ell, k] -= coef * alpha[i - k] / (fact(k) * fact(i - k))
    return M, rhs


def solve_erlang_rotation(pick: Distribution, mu: float, stages: int) -> ErlangRotationSolution:
    if not pick.has_lst:
        raise ModelInputError(f"pick law {pick.describe()} has no LST derivatives")
    if not mu > 0 or stages < 1:
        raise ArgumentError("need mu > 0 and stages >= 1")
    n = int(stages)
    alpha = np.array([pick.lst_derivative(j, mu) for j in range(n)])
    M, rhs = erlang_rotation_system(alpha, mu, n)
    try:
        psi = solve_linear(M, rhs)
    except SingularSystemError as exc:
        raise ModelInputError(f"balance system is singular: {exc}") from exc
    phi = np.array([sum(math.comb(i, k) * psi[k] * alpha[i - k] for k in range(i + 1))
                    for i in range(n)])
    pi0 = 1.0 - sum((-mu) ** i / math.factorial(i) * phi[i] for i in range(n))
    if not (-1e-8 <= pi0 <= 1 + 1e-8):
        raise NumericError(f"pi0 = {pi0} outside [0, 1]")
    return ErlangRotationSolution(mu, n, psi, phi, float(min(max(pi0, 0.0), 1.0)))


# ---------------------------------------------------------------------------
# Error bound for rotation approximations


@dataclass(frozen=True)
class ErrorBoundReport:
    epsilon: float
    contraction: float
    bound: float
    measured: float

    @property
    def holds(self) -> bool:
        return self.measured <= self.bound + 1e-8


def rotation_cdf_distance(b1: Distribution, b2: Distribution, grid_size: int = 4097) -> float:
    """Sup-norm distance of two rotation CDFs, including both sides of atoms."""
    pts = [np.linspace(0.0, 1.0, grid_size)]
    for d in (b1, b2):
        at = d.atoms()
        if at.size:
            pts += [at, np.nextafter(at, -np.inf)]
    pts = np.concatenate(pts)
    return float(np.max(np.abs(b1.cdf(pts) - b2.cdf(pts))))


def error_bound_check(pick: Distribution, rotation: Distribution, rotation_perturbed: Distribution,
                      grid_size: int = 1024) -> ErrorBoundReport:
    _check_unit_rotation(rotation)
    _check_unit_rotation(rotation_perturbed)
    eps = rotation_cdf_distance(rotation, rotation_perturbed)
    contraction = prob_rotation_exceeds_pick(pick, rotation)
    if contraction >= 1.0 - 1e-15:
        raise NumericError("P[B > A] = 1: error bound undefined")
    if eps == 0.0:
        return ErrorBoundReport(0.0, contraction, 0.0, 0.0)
    s1 = solve_stationary_general(pick, rotation, grid_size)
    s2 = solve_stationary_general(pick, rotation_perturbed, grid_size)
    measured = float(np.max(np.abs(s1.cdf_values - s2.cdf_values)))
    return ErrorBoundReport(eps, contraction, eps / (1.0 - contraction), measured)


def random_error_bound_case(gen: np.random.Generator):
    """Random (pick, rotation, perturbed rotation) triple on [0, 1) rotations.

    The perturbation is the empirical law of a small Beta sample, so its
    sup-distance to the uniform rotation varies from trial to trial.
    """
    from .distributions import Deterministic, Erlang

    kind = int(gen.integers(3))
    if kind == 0:
        pick = Erlang(float(gen.uniform(0.5, 5.0)), 1)
    elif kind == 1:
        pick = Erlang(float(gen.uniform(1.0, 6.0)), int(gen.integers(2, 4)))
    else:
        pick = Deterministic(float(gen.uniform(0.05, 0.9)))
    a, b = gen.uniform(0.8, 1.25, 2)
    sample = np.minimum(gen.beta(a, b, int(gen.integers(20, 200))), np.nextafter(1.0, 0.0))
    return pick, UNIFORM01, Empirical(tuple(sample.tolist()))


# ---------------------------------------------------------------------------
# Diagnostics


@dataclass(frozen=True)
class CovarianceEstimate:
    lag: int
    estimate: float
    se: float


def covariance_diagnostics(waits, max_lag: int, batches: int = 100) -> list[CovarianceEstimate]:
    """Autocovariances c(0..max_lag) with batch-means standard errors."""
    if isinstance(waits, WaitingPath):
        waits = waits.waits[waits.window]
    w = np.asarray(waits, dtype=float)
    if max_lag < 0 or w.size < 100 * max(max_lag, 1):
        raise ArgumentError("path too short for the requested lags")
    centred = w - w.mean()
    n = w.size
    out = []
    for k in range(max_lag + 1):
        prod = centred[: n - k] * centred[k:]
        per = prod.size // batches
        bm = prod[: per * batches].reshape(batches, per).mean(axis=1)
        out.append(CovarianceEstimate(k, float(prod.mean()), float(bm.std(ddof=1) / math.sqrt(batches))))
    return out


@dataclass(frozen=True)
class SensitivityReport:
    scv: tuple[float, ...]
    throughput: tuple[float, ...]
    nonincreasing: bool
    relative_spread: float


def throughput_sensitivity(mean_pick: float, scv_list, rotation: Distribution = UNIFORM01,
                           grid_size: int = 2048) -> SensitivityReport:
    if not isinstance(rotation, Uniform01):
        raise ArgumentError("sensitivity study uses uniform rotations")
    taus = []
    for c2 in scv_list:
        pick = fit_mean_scv(mean_pick, c2)
        taus.append(solve_stationary_fixed_point(pick, rotation, grid_size).throughput)
    t = np.asarray(taus)
    nonincreasing = bool(np.all(np.diff(t) <= 1e-12))
    spread = float((t.max() - t.min()) / t.max())
    return SensitivityReport(tuple(float(c) for c in scv_list), tuple(taus), nonincreasing, spread)
