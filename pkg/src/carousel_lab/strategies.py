"""Route planning on one carousel: clockwise, counterclockwise, nearest-item,
m-step and optimal (one-turn) strategies.

Distances are in units of one full rotation; unit speed makes distance and
time interchangeable. Positive legs are clockwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .numerics import ArgumentError
from .spacings import OrderInstance


class Kind(str, Enum):
    CLOCKWISE = "clockwise"
    COUNTERCLOCKWISE = "counterclockwise"
    NEAREST_ITEM = "nearest-item"
    M_STEP = "m-step"
    OPTIMAL = "optimal"


@dataclass(frozen=True)
class StrategySpec:
    kind: Kind
    m: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "kind", Kind(self.kind))
        if self.kind is Kind.M_STEP:
            if self.m is None or self.m < 0:
                raise ArgumentError("m-step strategy needs m >= 0")
        elif self.m is not None:
            raise ArgumentError(f"{self.kind.value} takes no m parameter")

    @classmethod
    def parse(cls, name: str, m: int | None = None) -> "StrategySpec":
        aliases = {"cw": Kind.CLOCKWISE, "ccw": Kind.COUNTERCLOCKWISE, "ni": Kind.NEAREST_ITEM,
                   "opt": Kind.OPTIMAL, "mstep": Kind.M_STEP}
        kind = aliases.get(name, None) or Kind(name)
        return cls(kind, m if kind is Kind.M_STEP else None)

    def __str__(self):
        return f"m-step({self.m})" if self.kind is Kind.M_STEP else self.kind.value


CLOCKWISE = StrategySpec(Kind.CLOCKWISE)
COUNTERCLOCKWISE = StrategySpec(Kind.COUNTERCLOCKWISE)
NEAREST_ITEM = StrategySpec(Kind.NEAREST_ITEM)
OPTIMAL = StrategySpec(Kind.OPTIMAL)


def m_step(m: int) -> StrategySpec:
    return StrategySpec(Kind.M_STEP, m)


@dataclass(frozen=True)
class RouteResult:
    pick_order: tuple[int, ...]
    legs: tuple[float, ...]
    travel_time: float
    turns: int


@dataclass(frozen=True)
class CandidateRoute:
    """One-turn route: ``turn_after`` items in ``first_direction``, then back.

    ``turn_after == 0`` is the pure rotation in the opposite direction.
    """

    first_direction: str  # "cw" or "ccw"
    turn_after: int
    travel_time: float


def count_turns(legs) -> int:
    signs = [1 if x > 0 else -1 for x in legs if x != 0]
    return sum(1 for a, b in zip(signs, signs[1:]) if a != b)


def enumerate_candidates(instance: OrderInstance, m: int | str = "all") -> list[CandidateRoute]:
    n = instance.n
    if n < 1:
        raise ArgumentError("candidate routes need at least one item")
    if m == "all":
        top = n - 1
    elif isinstance(m, (int, np.integer)) and m >= 0:
        top = min(int(m), n - 1)
    else:
        raise ArgumentError(f"m must be a non-negative integer or 'all', got {m!r}")
    u = np.concatenate([[0.0], instance.sorted_positions(), [1.0]])  # u[k] = u_(k)
    out = []
    for j in range(top + 1):
        out.append(CandidateRoute("cw", j, float(2 * u[j] + 1 - u[j + 1])))
    for j in range(top + 1):
        out.append(CandidateRoute("ccw", j, float(2 * (1 - u[n + 1 - j]) + u[n - j])))
    return out


def _route_from_candidate(instance: OrderInstance, cand: CandidateRoute) -> RouteResult:
    order = instance.order()
    u = instance.sorted_positions()
    n = instance.n
    j = cand.turn_after
    if cand.first_direction == "cw":
        seq = list(order[:j]) + list(order[j:][::-1])
    else:
        seq = list(order[n - j:][::-1]) + list(order[: n - j])
    return _route_through(instance, seq, first_direction=cand.first_direction, turn_after=j,
                          sorted_u=u)


def _route_through(instance, seq, first_direction, turn_after, sorted_u) -> RouteResult:
    pos = np.asarray(instance.positions, dtype=float)
    first = 1 if first_direction == "cw" else -1
    cur = 0.0
    legs = []
    for k, item in enumerate(seq):
        direction = first if k < turn_after else -first
        target = pos[item]
        if direction > 0:
            leg = (target - cur) % 1.0
        else:
            leg = -((cur - target) % 1.0)
        legs.append(float(leg))
        cur = target
    return RouteResult(tuple(int(i) for i in seq), tuple(legs),
                       float(sum(abs(x) for x in legs)), count_turns(legs))


def _nearest_item_route(instance: OrderInstance) -> RouteResult:
    n = instance.n
    order = instance.order()
    u = instance.sorted_positions()
    hi, lo = 0, n - 1  # next unvisited item clockwise / counterclockwise
    cur = 0.0
    legs, seq = [], []
    while hi <= lo:
        d_cw = (u[hi] - cur) % 1.0
        d_ccw = (cur - u[lo]) % 1.0
        if d_cw <= d_ccw:
            legs.append(float(d_cw))
            seq.append(order[hi])
            cur = u[hi]
            hi += 1
        else:
            legs.append(-float(d_ccw))
            seq.append(order[lo])
            cur = u[lo]
            lo -= 1
    return RouteResult(tuple(int(i) for i in seq), tuple(legs),
                       float(sum(abs(x) for x in legs)), count_turns(legs))


def plan_route(instance: OrderInstance, strategy: StrategySpec) -> RouteResult:
    n = instance.n
    if n == 0:
        return RouteResult((), (), 0.0, 0)
    kind = strategy.kind
    if kind is Kind.CLOCKWISE:
        return _route_from_candidate(instance, CandidateRoute("ccw", 0, 0.0))
    if kind is Kind.COUNTERCLOCKWISE:
        return _route_from_candidate(instance, CandidateRoute("cw", 0, 0.0))
    if kind is Kind.NEAREST_ITEM:
        return _nearest_item_route(instance)
    m = "all" if kind is Kind.OPTIMAL else strategy.m
    cands = enumerate_candidates(instance, m)
    best = min(cands, key=lambda c: c.travel_time)  # first minimum wins ties
    return _route_from_candidate(instance, best)


# ---------------------------------------------------------------------------
# Batch evaluation over many instances (rows of sorted positions).


@dataclass(frozen=True)
class BatchRoutes:
    travel_time: np.ndarray
    turns: np.ndarray
    # items collected before the turn (0 = no turn); only for candidate strategies
    turn_after: np.ndarray | None = None


def candidate_times(sorted_u: np.ndarray, m: int | None = None) -> tuple[np.ndarray, np.ndarray]:
    """CW-first and CCW-first candidate times, shape (size, min(m, n-1) + 1)."""
    size, n = sorted_u.shape
    top = n - 1 if m is None else min(m, n - 1)
    u = np.hstack([np.zeros((size, 1)), sorted_u, np.ones((size, 1))])
    j = np.arange(top + 1)
    cw_first = 2 * u[:, j] + 1 - u[:, j + 1]
    ccw_first = 2 * (1 - u[:, n + 1 - j]) + u[:, n - j]
    return cw_first, ccw_first


def batch_travel_times(sorted_u: np.ndarray, strategy: StrategySpec) -> BatchRoutes:
    sorted_u = np.asarray(sorted_u, dtype=float)
    size, n = sorted_u.shape
    if n == 0:
        z = np.zeros(size)
        return BatchRoutes(z, z.astype(int), z.astype(int))
    kind = strategy.kind
    if kind is Kind.CLOCKWISE:
        return BatchRoutes(sorted_u[:, -1].copy(), np.zeros(size, dtype=int))
    if kind is Kind.COUNTERCLOCKWISE:
        return BatchRoutes(1 - sorted_u[:, 0], np.zeros(size, dtype=int))
    if kind is Kind.NEAREST_ITEM:
        return _batch_nearest_item(sorted_u)
    m = None if kind is Kind.OPTIMAL else strategy.m
    cw_first, ccw_first = candidate_times(sorted_u, m)
    both = np.hstack([cw_first, ccw_first])
    best = np.argmin(both, axis=1)
    k = cw_first.shape[1]
    turn_after = np.where(best < k, best, best - k)
    return BatchRoutes(both[np.arange(size), best], (turn_after > 0).astype(int), turn_after)


def _batch_nearest_item(sorted_u: np.ndarray) -> BatchRoutes:
    size, n = sorted_u.shape
    rows = np.arange(size)
    hi = np.zeros(size, dtype=np.int64)
    lo = np.full(size, n - 1, dtype=np.int64)
    cur = np.zeros(size)
    total = np.zeros(size)
    turns = np.zeros(size, dtype=np.int64)
    last = np.zeros(size, dtype=np.int64)  # sign of the last nonzero leg
    for _ in range(n):
        d_cw = np.mod(sorted_u[rows, hi] - cur, 1.0)
        d_ccw = np.mod(cur - sorted_u[rows, lo], 1.0)
        go_cw = d_cw <= d_ccw
        d = np.where(go_cw, d_cw, d_ccw)
        sign = np.where(d == 0, 0, np.where(go_cw, 1, -1))
        turns += (sign != 0) & (last != 0) & (sign != last)
        last = np.where(sign != 0, sign, last)
        total += d
        cur = np.where(go_cw, sorted_u[rows, hi], sorted_u[rows, lo])
        hi = hi + go_cw
        lo = lo - (~go_cw)
    return BatchRoutes(total, turns)
