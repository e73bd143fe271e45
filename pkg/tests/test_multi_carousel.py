import numpy as np
import pytest

from carousel_lab import multi_carousel as mc
from carousel_lab.carousel_queue import draw_inputs, simulate_recursion
from carousel_lab.distributions import UNIFORM01, Deterministic, Erlang, Exponential
from carousel_lab.numerics import ArgumentError, NumericError, RandomStream


def cyclic_reference(a, b, r):
    w = np.zeros(a.size)
    for m in range(1, a.size):
        lo = max(0, m - r + 1)
        w[m] = max(0.0, b[m] - sum(a[k] + w[k] for k in range(lo, m)))
    return w


def test_config_validation():
    with pytest.raises(ArgumentError):
        mc.MultiCarouselConfig(1, Exponential(1.0), UNIFORM01, 100)
    with pytest.raises(ArgumentError):
        mc.MultiCarouselConfig(2, Exponential(1.0), UNIFORM01, 100, burn_in=100)


def test_two_carousels_bit_identical():
    cfg = mc.MultiCarouselConfig(2, Erlang(2.0, 2), UNIFORM01, 50_000, 100)
    path, _ = mc.simulate_cyclic(cfg, RandomStream(11))
    ref = simulate_recursion(Erlang(2.0, 2), UNIFORM01, 50_000, 100, RandomStream(11))
    assert np.array_equal(path.waits, ref.waits)


@pytest.mark.parametrize("r", [3, 4, 6])
def test_cyclic_matches_reference(r):
    a, b = draw_inputs(Exponential(3.0), UNIFORM01, 2000, np.random.default_rng(r))
    assert np.allclose(mc._cyclic_kernel(a, b, r), cyclic_reference(a, b, r), atol=1e-12)


def test_cyclic_three_carousel_recursion():
    # W_{k+2} = max(0, B_{k+2} - W_{k+1} - A_{k+1} - W_k - A_k)
    cfg = mc.MultiCarouselConfig(3, Exponential(2.0), UNIFORM01, 5000, 10)
    path, _ = mc.simulate_cyclic(cfg, RandomStream(1))
    w, a, b = path.waits, path.picks, path.rotations
    rhs = np.maximum(0.0, b[2:] - w[1:-1] - a[1:-1] - w[:-2] - a[:-2])
    assert np.allclose(w[2:], rhs, atol=1e-12)


def test_zero_rotation():
    _, s = mc.simulate_cyclic(mc.MultiCarouselConfig(4, Exponential(1.0), Deterministic(0.0), 1000, 10),
                              RandomStream(0))
    assert s.mean_wait == 0 and s.utilization == 1.0
    r = mc.simulate_machine_repair(Exponential(1.0), Deterministic(0.0), 1000, RandomStream(0), burn_in=10)
    assert r.mean_wait == 0


def test_per_carousel_throughput():
    _, s = mc.simulate_cyclic(mc.MultiCarouselConfig(3, Exponential(1.0), UNIFORM01, 20_000, 100),
                              RandomStream(2))
    assert s.per_carousel_throughput == pytest.approx(s.throughput / 3)


def test_more_carousels_wait_less():
    out = []
    for r in (2, 3, 6):
        _, s = mc.simulate_cyclic(mc.MultiCarouselConfig(r, Exponential(1.0), UNIFORM01, 200_000, 1000),
                                  RandomStream(3))
        out.append(s)
    assert out[0].mean_wait > out[1].mean_wait > out[2].mean_wait
    assert out[0].utilization < out[1].utilization < out[2].utilization


def test_repair_clock_and_first_wait():
    path = mc.simulate_machine_repair_path(Exponential(1.0), UNIFORM01, 10_000, RandomStream(5))
    assert path.clock == pytest.approx(path.waits.sum() + path.picks.sum(), rel=1e-12)
    assert path.waits[0] > 0
    # the first wait is the first rotation in both models
    alt = simulate_recursion(Exponential(1.0), UNIFORM01, 10_001, 0, RandomStream(5))
    assert path.waits[0] == alt.waits[1]


def test_repair_serves_first_ready():
    # carousel 1 is ready (0.1) long before carousel 0 (0.9), but pick 1 is forced
    # to carousel 0; afterwards the earlier-ready carousel wins
    a = np.array([0.0, 0.05, 0.05, 0.05])
    b = np.array([0.0, 0.9, 0.1, 0.5, 0.5, 0.5])
    w, served, clock = mc._repair_kernel(a, b)
    # pick 1 ends at 0.95 (carousel 0 ready again at 1.45); pick 2 on
    # carousel 1 ends at 1.0 (ready again at 1.5); carousel 0 is next
    assert list(served) == [0, 1, 0]
    assert w == pytest.approx([0.9, 0.0, 0.45])
    assert clock == pytest.approx(w.sum() + a[1:].sum())


def test_repair_tie_goes_to_lower_index():
    a = np.array([0.0, 0.1, 0.1])
    b = np.array([0.0, 0.2, 0.4, 0.1, 0.0])
    _, served, _ = mc._repair_kernel(a, b)
    # after pick 1 ends at 0.3, carousel 0 is ready at 0.4, carousel 1 at 0.4
    assert list(served) == [0, 0]


def test_compare_disciplines_small():
    c = mc.compare_disciplines(Exponential(1.0), UNIFORM01, 200_000, RandomStream(4), burn_in=1000,
                               replications=200)
    assert c.non_alternating.mean_wait < c.alternating.mean_wait
    assert c.alternating.pi0 > c.non_alternating.pi0
    assert c.non_alternating.throughput >= c.alternating.throughput
    assert [x.horizon for x in c.partial_sums] == [10, 100, 1000]
    assert all(x.ordered for x in c.partial_sums)
    with pytest.raises(ArgumentError):
        mc.compare_disciplines(Exponential(1.0), UNIFORM01, 1000, 3)


def test_clock_check_raises(monkeypatch):
    kernel = mc._repair_kernel

    def broken(a, b):
        w, s, t = kernel(a, b)
        return w, s, t + 1.0

    monkeypatch.setattr(mc, "_repair_kernel", broken)
    with pytest.raises(NumericError):
        mc.simulate_machine_repair_path(Exponential(1.0), UNIFORM01, 100, RandomStream(0))
