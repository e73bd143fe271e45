"""One picker serving r >= 2 carousels cyclically, and the non-alternating
(machine-repair) variant of the two-carousel model."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from .carousel_queue import PathSummary, WaitingPath, draw_inputs, summarize
from .distributions import Distribution
from .numerics import ArgumentError, NumericError, RandomStream, as_generator


@dataclass(frozen=True)
class MultiCarouselConfig:
    carousels: int
    pick: Distribution
    rotation: Distribution
    steps: int
    burn_in: int = 10_000

    def __post_init__(self):
        if self.carousels < 2:
            raise ArgumentError("need at least two carousels")
        if self.steps <= self.burn_in or self.burn_in < 0:
            raise ArgumentError("need steps > burn_in >= 0")


@dataclass(frozen=True)
class CyclicSummary:
    base: PathSummary
    carousels: int

    @property
    def per_carousel_throughput(self) -> float:
        return self.base.throughput / self.carousels

    def __getattr__(self, name):
        return getattr(self.base, name)


@numba.njit(cache=True)
def _cyclic_kernel(a, b, r):
    # The rotation before pick m starts when the picker leaves that carousel
    # and overlaps the r-1 intervening (pick + wait) intervals. Subtraction
    # order matches the two-carousel kernel so r=2 is bit-identical.
    n = a.size
    w = np.zeros(n)
    for m in range(1, n):
        x = b[m]
        lo = m - r + 1
        if lo < 0:
            lo = 0
        for k in range(m - 1, lo - 1, -1):
            x = x - a[k] - w[k]
        w[m] = x if x > 0.0 else 0.0
    return w


def simulate_cyclic(config: MultiCarouselConfig, rng) -> tuple[WaitingPath, CyclicSummary]:
    """W_m = max(0, B_m - sum_{k=m-r+1}^{m-1} (A_k + W_k)), W_0 = A_0 = 0."""
    a, b = draw_inputs(config.pick, config.rotation, config.steps, as_generator(rng))
    path = WaitingPath(_cyclic_kernel(a, b, config.carousels), a, b, config.burn_in)
    return path, CyclicSummary(path.summary(), config.carousels)


# ---------------------------------------------------------------------------
# Machine repair: serve whichever carousel is ready first


@dataclass(frozen=True)
class RepairPath:
    waits: np.ndarray  # W_1..W_N (index 0 is W_1)
    picks: np.ndarray
    served: np.ndarray  # carousel index per pick
    clock: float  # event clock at the end of the last pick


@numba.njit(cache=True)
def _repair_kernel(a, b):
    # b[1], b[2]: first rotations of carousels 0 and 1 (both start at t = 0);
    # later rotations are consumed in order as carousels restart.
    n = a.size - 1
    w = np.zeros(n)
    served = np.zeros(n, dtype=np.int64)
    ready0 = b[1]
    ready1 = b[2]
    nxt = 3
    t = 0.0
    for i in range(n):
        if i == 0:
            c = 0  # the picker starts at carousel 0, as in the alternating model
        elif ready1 < ready0:
            c = 1
        else:
            c = 0
        ready = ready0 if c == 0 else ready1
        wait = ready - t
        if wait < 0.0:
            wait = 0.0
        start = t if t > ready else ready
        t = start + a[i + 1]
        w[i] = wait
        served[i] = c
        rot = b[nxt] if nxt < b.size else 0.0
        nxt += 1
        if c == 0:
            ready0 = t + rot
        else:
            ready1 = t + rot
    return w, served, t


def simulate_machine_repair_path(pick: Distribution, rotation: Distribution, steps: int,
                                 rng) -> RepairPath:
    a, b = draw_inputs(pick, rotation, steps + 1, as_generator(rng))
    w, served, clock = _repair_kernel(a[: steps + 1], b)
    picks = a[1: steps + 1]
    total = float(w.sum() + picks.sum())
    if abs(total - clock) > 1e-9 * max(1.0, clock):
        raise NumericError(f"event clock {clock} disagrees with work total {total}")
    return RepairPath(w, picks, served, clock)


def simulate_machine_repair(pick: Distribution, rotation: Distribution, steps: int, rng,
                            burn_in: int = 10_000) -> PathSummary:
    if steps <= burn_in:
        raise ArgumentError("need steps > burn_in")
    path = simulate_machine_repair_path(pick, rotation, steps, rng)
    return summarize(path.waits[burn_in:], path.picks[burn_in:])


@dataclass(frozen=True)
class PartialSumCheck:
    horizon: int
    mean_alternating: float
    mean_repair: float
    se_difference: float

    @property
    def ordered(self) -> bool:
        return self.mean_alternating - self.mean_repair >= -3 * self.se_difference


@dataclass(frozen=True)
class DisciplineComparison:
    alternating: PathSummary
    non_alternating: PathSummary
    confidence: float
    partial_sums: tuple[PartialSumCheck, ...]

    @property
    def z(self) -> float:
        from scipy.stats import norm

        return float(norm.ppf(0.5 + self.confidence / 2))

    def mean_wait_separated(self) -> bool:
        a, na, z = self.alternating, self.non_alternating, self.z
        return na.mean_wait + z * na.mean_wait_se < a.mean_wait - z * a.mean_wait_se

    def pi0_separated(self) -> bool:
        a, na, z = self.alternating, self.non_alternating, self.z
        return a.pi0 - z * a.pi0_se > na.pi0 + z * na.pi0_se


def compare_disciplines(pick: Distribution, rotation: Distribution, steps: int, rng: RandomStream,
                        burn_in: int = 10_000, horizons=(10, 100, 1000), replications: int = 2000,
                        confidence: float = 0.99) -> DisciplineComparison:
    """Long-run summaries of both disciplines plus transient partial sums.

    Each partial-sum replication drives both models with the same pick and
    rotation sequence.
    """
    if not isinstance(rng, RandomStream):
        raise ArgumentError("compare_disciplines needs a RandomStream")
    from .carousel_queue import _alternating_kernel

    gen_a = rng.substream(0).generator()
    a, b = draw_inputs(pick, rotation, steps, gen_a)
    w_alt = _alternating_kernel(a, b)
    alt = summarize(w_alt[burn_in + 1:], a[burn_in + 1:])
    na = simulate_machine_repair(pick, rotation, steps, rng.substream(1), burn_in)

    horizon = max(horizons)
    sums_a = np.zeros((replications, len(horizons)))
    sums_na = np.zeros((replications, len(horizons)))
    gen = rng.substream(2).generator()
    for k in range(replications):
        a, b = draw_inputs(pick, rotation, horizon + 1, gen)
        wa = np.cumsum(_alternating_kernel(a, b)[1:])
        wna = np.cumsum(_repair_kernel(a, b)[0])
        for h, i in enumerate(horizons):
            sums_a[k, h] = wa[i - 1]
            sums_na[k, h] = wna[i - 1]
    diff = sums_a - sums_na
    checks = tuple(
        PartialSumCheck(i, float(sums_a[:, h].mean()), float(sums_na[:, h].mean()),
                        float(diff[:, h].std(ddof=1) / math.sqrt(replications)))
        for h, i in enumerate(horizons))
    return DisciplineComparison(alt, na, confidence, checks)
