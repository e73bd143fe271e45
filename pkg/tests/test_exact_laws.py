from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carousel_lab import exact_laws as ex
from carousel_lab.numerics import ArgumentError, RandomStream, ks_against_cdf, ks_two_sample
from carousel_lab.strategies import CLOCKWISE, NEAREST_ITEM, OPTIMAL, m_step


def test_hand_values_are_exact():
    assert ex.ni_cdf(1, Fraction(1, 4)) == Fraction(1, 2)
    assert ex.ni_cdf(2, Fraction(1, 2)) == Fraction(2, 3)
    assert ex.ni_cdf(3, Fraction(7, 8)) == 1
    assert ex.ni_cdf(1, 0.6) == 1.0


def test_single_item_law():
    # one item: the walk is min(U, 1 - U)
    for t in np.linspace(0, 1, 21):
        assert ex.ni_cdf(1, float(t)) == pytest.approx(min(2 * t, 1.0), abs=1e-15)


def test_support_endpoint_and_zero():
    for n in range(1, 12):
        assert ex.ni_cdf(n, 0) == 0
        assert ex.ni_cdf(n, Fraction(2**n - 1, 2**n)) == 1
        assert ex.ni_cdf(n, Fraction(2**n - 1, 2**n) - Fraction(1, 2**(n + 8))) < 1


def test_cw_law():
    assert ex.cw_cdf(3, 0.5) == 0.125
    with pytest.raises(ArgumentError):
        ex.cw_cdf(0, 0.5)
    with pytest.raises(ArgumentError):
        ex.cw_cdf(2, 1.5)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 10])
def test_law_mean_equals_closed_form(n):
    # integrating the CDF is an independent route to the mean
    law = ex.travel_time_law(NEAREST_ITEM, n)
    assert law.moment(1) == pytest.approx(ex.ni_mean(n), abs=1e-9)
    assert law.variance() > 0


def test_representation_mean_matches_weights():
    # E[D_i] = 1/(n+1) gives the closed form directly
    for n in range(1, 20):
        w = 1 - 2.0 ** -np.arange(1, n + 1)
        assert w.sum() / (n + 1) == pytest.approx(ex.ni_mean(n))


def test_float_path_agrees_with_rationals_up_to_limit():
    t = np.linspace(0, 1, 201)
    for n in (1, 5, 20, 30, 40, 50, 64):
        exact = np.array([float(ex.ni_cdf(n, Fraction(x))) for x in t])
        assert np.max(np.abs(ex.ni_cdf_array(n, t) - exact)) < 1e-13


def test_precision_guard():
    with pytest.raises(ex.PrecisionError):
        ex.ni_cdf(65, 0.5)
    with pytest.raises(ex.PrecisionError):
        ex.ni_cdf_array(80, [0.5])
    v = ex.ni_cdf_array(70, [0.3, 0.9, 1.0], high_precision=True)
    assert np.all(np.diff(v) >= 0) and v[-1] == 1.0


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 25), st.fractions(0, 1), st.fractions(0, 1))
def test_cdf_monotone(n, a, b):
    lo, hi = min(a, b), max(a, b)
    assert 0 <= ex.ni_cdf(n, lo) <= ex.ni_cdf(n, hi) <= 1


@pytest.mark.parametrize("n", [2, 4, 7])
def test_ni_law_vs_route_simulation(n):
    from carousel_lab.spacings import sample_sorted_positions
    from carousel_lab.strategies import batch_travel_times

    t = batch_travel_times(sample_sorted_positions(40_000, n, RandomStream(n)), NEAREST_ITEM).travel_time
    assert ks_against_cdf(t, lambda x: ex.ni_cdf_array(n, np.clip(x, 0, 1))).passed


def test_ni_representation_sampler():
    x = ex.sample_ni_representation(6, RandomStream(1), size=50_000)
    assert ks_against_cdf(x, lambda t: ex.ni_cdf_array(6, np.clip(t, 0, 1))).passed
    assert isinstance(ex.sample_ni_representation(3, RandomStream(2)), float)


def test_mstep_representation_guard_and_bounds():
    with pytest.raises(ArgumentError):
        ex.sample_mstep_representation(4, 2, RandomStream(0))
    x = ex.sample_mstep_representation(7, 2, RandomStream(0), size=1000)
    assert np.all((x > 0) & (x < 1))


@pytest.mark.parametrize("n,m", [(3, 1), (9, 3)])
def test_mstep_representation_in_distribution(n, m):
    # the identity holds in law only: the weights act on reordered spacings
    from carousel_lab.spacings import sample_sorted_positions
    from carousel_lab.strategies import batch_travel_times

    direct = batch_travel_times(sample_sorted_positions(50_000, n, RandomStream(4)), m_step(m)).travel_time
    rep = ex.sample_mstep_representation(n, m, RandomStream(5), size=50_000)
    assert ks_two_sample(direct, rep).passed


def test_limit_spec_validation_and_means():
    with pytest.raises(ArgumentError):
        ex.LimitFunctionalSpec("I_q")
    with pytest.raises(ArgumentError):
        ex.LimitFunctionalSpec("nope")
    with pytest.raises(ArgumentError):
        ex.LimitFunctionalSpec("ni-limit", truncation_terms=5)
    s = ex.LimitFunctionalSpec("I_q", q=0.25)
    assert s.mean() == pytest.approx(4 / 3)
    assert s.tail_bound() < 1e-12 * s.mean()
    j = ex.LimitFunctionalSpec("J_q", q=0.5)
    assert j.mean() == pytest.approx(ex.LimitFunctionalSpec("opt-limit").mean())


def test_limit_samplers():
    s = ex.LimitFunctionalSpec("ni-limit")
    x = ex.sample_limit_functional(s, RandomStream(3), size=100_000)
    assert abs(x.mean() - 2.0) < 3 * x.std() / np.sqrt(x.size)
    o = ex.sample_limit_functional(ex.LimitFunctionalSpec("opt-limit"), RandomStream(3), size=1000)
    assert o.min() > 0


def test_cw_law_object():
    law = ex.travel_time_law(CLOCKWISE, 4)
    assert law.mean == pytest.approx(0.8)
    assert law.moment(1) == pytest.approx(0.8)
    with pytest.raises(ArgumentError):
        ex.travel_time_law(OPTIMAL, 3)


def test_ks_between_two_representation_draws_is_small():
    a = ex.sample_ni_representation(4, RandomStream(10), size=20_000)
    b = ex.sample_ni_representation(4, RandomStream(11), size=20_000)
    assert ks_two_sample(a, b).passed
