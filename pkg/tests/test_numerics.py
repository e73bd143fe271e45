import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from carousel_lab.numerics import (
    ArgumentError,
    NumericError,
    Polynomial,
    RandomStream,
    SingularSystemError,
    as_generator,
    ks_against_cdf,
    ks_critical_value,
    ks_two_sample,
    map_chunks,
    poly_roots,
    solve_linear,
    sup_cdf_distance,
    trapezoid_weights,
)


def test_stream_reproducible_and_distinct():
    a = RandomStream(42).generator().random(5)
    b = RandomStream(42).generator().random(5)
    c = RandomStream(42, 1).generator().random(5)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


def test_substreams_do_not_collide_with_siblings():
    s = RandomStream(3)
    keys = {s.substream(k).stream_index for k in range(100)}
    assert len(keys) == 100
    assert all(k > 100 for k in keys)


def test_stream_validation():
    with pytest.raises(ArgumentError):
        RandomStream(-1)
    with pytest.raises(ArgumentError):
        RandomStream(2**64)
    with pytest.raises(ArgumentError):
        as_generator("seed")


def test_ks_two_sample_extremes():
    x = np.arange(10.0)
    assert ks_two_sample(x, x).statistic == 0.0
    assert ks_two_sample(x, x + 100).statistic == 1.0


def test_ks_two_sample_with_ties():
    # F_a jumps to 1/2 at 0 and 1 at 1; F_b jumps to 1 at 0.
    rep = ks_two_sample([0.0, 1.0], [0.0, 0.0, 0.0])
    assert rep.statistic == pytest.approx(0.5)


def test_ks_two_sample_is_symmetric():
    g = np.random.default_rng(0)
    a, b = g.random(300), g.random(500) ** 1.1
    assert ks_two_sample(a, b).statistic == ks_two_sample(b, a).statistic


def test_ks_against_cdf_single_point():
    # One sample at 0.3 against U(0,1): sup is max(0.3, 0.7)
    assert ks_against_cdf([0.3], lambda t: t).statistic == pytest.approx(0.7)


def test_ks_against_cdf_rejects_bad_cdf():
    with pytest.raises(NumericError):
        ks_against_cdf([0.5], lambda t: 2 * t + 1)


def test_ks_uniform_sample_passes():
    x = RandomStream(1).generator().random(20000)
    rep = ks_against_cdf(x, lambda t: np.clip(t, 0, 1))
    assert rep.passed and rep.threshold == pytest.approx(ks_critical_value(20000))


def test_sup_cdf_distance_with_atom():
    s = np.zeros(10)
    assert sup_cdf_distance(s, lambda t: np.where(t >= 0, 0.5, 0.0), np.array([0.0, 1.0])) == 0.5


def test_polynomial_trim_and_eval():
    p = Polynomial([1, 0, 2, 0, 0])
    assert p.degree == 2
    assert complex(p(2.0)) == 9
    assert p.derivative().coefficients == (0j, 4 + 0j)


@pytest.mark.parametrize("roots", [[1.0, 2.0, 3.0], [1j, -1j], [0.5, 0.5 + 2j, 0.5 - 2j, -3.0]])
def test_poly_roots_recovers_known_roots(roots):
    coef = np.polynomial.polynomial.polyfromroots(roots)
    found = poly_roots(Polynomial(coef))
    for r in roots:
        assert np.min(np.abs(found - r)) < 1e-10


def test_poly_roots_conjugate_symmetry():
    # s^2 (4 - s^2)^2 + 16, the two-stage structure polynomial at rate 2
    p = Polynomial(np.polynomial.polynomial.polymul([0, 0, 1], [16, 0, -8, 0, 1]) + np.r_[16, np.zeros(6)])
    r = poly_roots(p)
    assert r.size == 6
    for z in r:
        assert np.min(np.abs(r - np.conj(z))) == 0.0
    assert np.max(np.abs(p(r))) < 1e-9


def test_poly_roots_degree_zero():
    with pytest.raises(ArgumentError):
        poly_roots(Polynomial([3.0]))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=1, max_size=6))
def test_poly_roots_residual_property(roots):
    coef = np.polynomial.polynomial.polyfromroots(roots)
    p = Polynomial(coef)
    found = poly_roots(p)
    scale = p.scale(found)
    assert np.all(np.abs(p(found)) <= 1e-8 * np.maximum(scale, 1.0))


def test_solve_linear():
    A = np.array([[2.0, 1.0], [1.0, 3.0]])
    assert np.allclose(solve_linear(A, [3.0, 5.0]), [0.8, 1.4])
    with pytest.raises(SingularSystemError):
        solve_linear(np.ones((2, 2)), [1.0, 1.0])
    with pytest.raises(ArgumentError):
        solve_linear(np.ones((2, 3)), [1.0, 1.0])


def test_trapezoid_weights_integrate_linear_exactly():
    x = np.linspace(0, 2, 11)
    w = trapezoid_weights(11, 0.2)
    assert w @ (3 * x + 1) == pytest.approx(8.0)


def test_map_chunks_independent_of_threads():
    fn = lambda size, gen: gen.random(size)  # noqa: E731
    s = RandomStream(9)
    one = map_chunks(fn, s, 1234, chunk=100, threads=1)
    many = map_chunks(fn, s, 1234, chunk=100, threads=4)
    assert one.size == 1234 and np.array_equal(one, many)


def test_map_chunks_tuples_and_empty():
    fn = lambda size, gen: (np.zeros(size), np.ones(size))  # noqa: E731
    a, b = map_chunks(fn, RandomStream(0), 7, chunk=3)
    assert a.size == b.size == 7
    assert map_chunks(fn, RandomStream(0), 0).size == 0
