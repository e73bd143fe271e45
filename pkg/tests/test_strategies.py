import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carousel_lab.numerics import ArgumentError, RandomStream
from carousel_lab.spacings import OrderInstance, sample_sorted_positions
from carousel_lab.strategies import (
    CLOCKWISE,
    COUNTERCLOCKWISE,
    NEAREST_ITEM,
    OPTIMAL,
    Kind,
    StrategySpec,
    batch_travel_times,
    count_turns,
    enumerate_candidates,
    m_step,
    plan_route,
)

positions = st.lists(st.floats(0, 1, exclude_max=True), min_size=1, max_size=5)


def brute_force_optimal(pos):
    """Shortest walk from 0 visiting every item, over all visiting orders and
    leg directions."""
    best = np.inf
    for perm in itertools.permutations(pos):
        for dirs in itertools.product((1, -1), repeat=len(pos)):
            cur, total = 0.0, 0.0
            for p, d in zip(perm, dirs):
                total += (p - cur) % 1.0 if d > 0 else (cur - p) % 1.0
                cur = p
            best = min(best, total)
    return best


def greedy_nearest(pos):
    """Straightforward nearest-item walk; ties go clockwise."""
    left = list(pos)
    cur, total = 0.0, 0.0
    while left:
        cw = [(p - cur) % 1.0 for p in left]
        ccw = [(cur - p) % 1.0 for p in left]
        i_cw, i_ccw = int(np.argmin(cw)), int(np.argmin(ccw))
        if cw[i_cw] <= ccw[i_ccw]:
            total += cw[i_cw]
            cur = left.pop(i_cw)
        else:
            total += ccw[i_ccw]
            cur = left.pop(i_ccw)
    return total


def test_spec_parsing():
    assert StrategySpec.parse("ni") == NEAREST_ITEM
    assert StrategySpec.parse("m-step", 2) == m_step(2)
    assert StrategySpec.parse("opt", 3) == OPTIMAL
    with pytest.raises(ArgumentError):
        StrategySpec(Kind.M_STEP)
    with pytest.raises(ArgumentError):
        StrategySpec(Kind.CLOCKWISE, 2)
    assert str(m_step(2)) == "m-step(2)"


def test_two_item_hand_case():
    inst = OrderInstance([0.1, 0.8])
    r = plan_route(inst, OPTIMAL)
    assert r.travel_time == pytest.approx(0.4)
    assert r.legs == pytest.approx((0.1, -0.3))
    assert r.turns == 1
    assert r.pick_order == (0, 1)
    assert plan_route(inst, NEAREST_ITEM).travel_time == pytest.approx(0.4)
    assert plan_route(inst, CLOCKWISE).travel_time == pytest.approx(0.8)
    assert plan_route(inst, COUNTERCLOCKWISE).travel_time == pytest.approx(0.9)


def test_candidate_set_hand_case():
    times = sorted(c.travel_time for c in enumerate_candidates(OrderInstance([0.1, 0.8])))
    assert times == pytest.approx([0.4, 0.5, 0.8, 0.9])


def test_candidates_respect_m():
    inst = OrderInstance([0.1, 0.3, 0.6, 0.9])
    assert len(enumerate_candidates(inst, 1)) == 4
    assert len(enumerate_candidates(inst)) == 8
    assert len(enumerate_candidates(inst, 99)) == 8
    with pytest.raises(ArgumentError):
        enumerate_candidates(inst, -1)


def test_empty_order():
    r = plan_route(OrderInstance([]), OPTIMAL)
    assert r.travel_time == 0.0 and r.pick_order == ()


def test_count_turns():
    assert count_turns([0.1, 0.2, -0.3, 0.0, -0.1, 0.2]) == 2


@settings(max_examples=60, deadline=None)
@given(positions)
def test_optimal_matches_brute_force(pos):
    r = plan_route(OrderInstance(pos), OPTIMAL)
    assert r.travel_time == pytest.approx(brute_force_optimal(pos), abs=1e-12)
    assert r.turns <= 1


@settings(max_examples=100, deadline=None)
@given(positions)
def test_nearest_item_matches_greedy(pos):
    assert plan_route(OrderInstance(pos), NEAREST_ITEM).travel_time == pytest.approx(
        greedy_nearest(pos), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(positions, st.integers(0, 5))
def test_route_structure(pos, m):
    inst = OrderInstance(pos)
    for strat in (CLOCKWISE, COUNTERCLOCKWISE, NEAREST_ITEM, OPTIMAL, m_step(m)):
        r = plan_route(inst, strat)
        assert sorted(r.pick_order) == list(range(inst.n))
        assert r.travel_time == pytest.approx(sum(abs(x) for x in r.legs))
        # following the legs from 0 lands on each item in pick order
        cur = 0.0
        for item, leg in zip(r.pick_order, r.legs):
            cur = (cur + leg) % 1.0
            assert min(abs(cur - pos[item]), 1 - abs(cur - pos[item])) < 1e-12
    opt = plan_route(inst, OPTIMAL).travel_time
    assert opt <= plan_route(inst, m_step(m)).travel_time + 1e-15
    assert opt <= plan_route(inst, NEAREST_ITEM).travel_time + 1e-12
    assert plan_route(inst, m_step(0)).travel_time == pytest.approx(
        min(plan_route(inst, CLOCKWISE).travel_time, plan_route(inst, COUNTERCLOCKWISE).travel_time))
    assert plan_route(inst, m_step(inst.n - 1)).travel_time == opt


@pytest.mark.parametrize("strategy", [CLOCKWISE, COUNTERCLOCKWISE, NEAREST_ITEM, OPTIMAL, m_step(0),
                                      m_step(2)])
@pytest.mark.parametrize("n", [1, 2, 6])
def test_batch_matches_plan_route(strategy, n):
    u = sample_sorted_positions(300, n, RandomStream(n))
    batch = batch_travel_times(u, strategy)
    for row in range(u.shape[0]):
        r = plan_route(OrderInstance(u[row]), strategy)
        assert batch.travel_time[row] == pytest.approx(r.travel_time, abs=1e-12)
        assert batch.turns[row] == r.turns


def test_batch_turn_after_identifies_route():
    u = sample_sorted_positions(200, 5, RandomStream(4))
    b = batch_travel_times(u, OPTIMAL)
    for row in range(200):
        r = plan_route(OrderInstance(u[row]), OPTIMAL)
        legs = np.sign(r.legs)
        # items collected before the first direction change
        k = int(np.argmax(legs != legs[0])) if r.turns else 0
        assert b.turn_after[row] == k


def test_tie_goes_clockwise():
    r = plan_route(OrderInstance([0.25, 0.75]), NEAREST_ITEM)
    assert r.legs[0] == pytest.approx(0.25)
