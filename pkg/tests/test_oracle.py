import numpy as np
import pytest

from mmrsink import oracle
from mmrsink.evac import SinkLocation, aggregate_time, aggregate_time_at, completion_time_to_v1
from mmrsink.network import ParametricPathNetwork, random_instance

from conftest import nets


def const_net(w, lengths, caps, tau=1.0):
    return ParametricPathNetwork.build(w, [0.0] * len(w), lengths, caps, tau=tau)


def test_phi_examples():
    net = const_net([0, 1], [1], [1])
    assert oracle.oracle_phi(net, 0.0, 0.3) == pytest.approx(1.5)
    zero = const_net([0, 0, 0], [1, 1], [1, 1])
    assert oracle.oracle_phi(zero, 1.3, 0.3) == 0.0


def test_phi_agrees_with_evac(rng):
    for net in nets(11, 20, 9):
        xs = rng.uniform(0, net.total_length, 50)
        ts = rng.uniform(net.t_lo, net.t_hi, 50)
        for x, t in zip(xs, ts):
            ref = aggregate_time_at(net, float(x), float(t))
            assert oracle.oracle_phi(net, float(x), float(t)) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_phi_at_vertices_agrees_with_evac():
    for net in nets(12, 10, 7):
        for k in range(net.n):
            x = float(net.positions[k])
            ref = aggregate_time(net, SinkLocation.vertex(k), 0.25)
            assert oracle.oracle_phi(net, x, 0.25) == pytest.approx(ref, rel=1e-9, abs=1e-9)


def test_mr_constant_weights():
    net = const_net([1, 3, 2], [1, 2], [1, 2])
    opt = min(oracle.oracle_phi(net, float(v), 0.0) for v in net.positions)
    for x in (0.0, 0.7, 1.0, 2.5):
        expect = oracle.oracle_phi(net, x, 0.0) - opt
        assert oracle.oracle_mr(net, x, 50, 5) == pytest.approx(expect, abs=1e-12)


def test_mr_nondecreasing_in_grid():
    net = random_instance(5, np.random.default_rng(4))
    xs = np.linspace(0, net.total_length, 7)
    prev = oracle.oracle_mr_many(net, xs, 65, 0)
    for size in (129, 257, 513):
        # nested grids: 2^k + 1 points contain the previous grid
        cur = oracle.oracle_mr_many(net, xs, size, 0)
        assert np.all(cur >= prev - 1e-12)
        prev = cur


def test_mr_grid_size_guard():
    with pytest.raises(ValueError):
        oracle.oracle_mr(const_net([1, 1], [1], [1]), 0.5, 1, 0)


def test_simulation_hand_case(three_vertex):
    sim = oracle.simulate_completion_refined(three_vertex, SinkLocation.vertex(0), 0.0)
    assert sim == pytest.approx(4.0, rel=1e-5)


def test_simulation_no_supply():
    net = const_net([3, 0, 0], [1, 1], [1, 1])
    assert oracle.simulate_completion(net, SinkLocation.vertex(0), 0.0, 0.01) == 0.0


def test_simulation_two_vertices():
    # one bottleneck, nothing to wait for: travel plus drain time
    net = const_net([0, 3], [2], [1.5], tau=0.5)
    sim = oracle.simulate_completion_refined(net, SinkLocation.vertex(0), 0.0)
    assert sim == pytest.approx(0.5 * 2 + 3 / 1.5, rel=1e-6)


def test_simulation_matches_closed_form(rng):
    for net in nets(21, 5, 6, n_min=3):
        t = float(rng.uniform(net.t_lo, net.t_hi))
        sim = oracle.simulate_completion_refined(net, SinkLocation.vertex(0), t)
        assert sim == pytest.approx(completion_time_to_v1(net, t), rel=1e-5)


def test_simulated_aggregate_matches_evac(rng):
    net = random_instance(5, rng)
    sink = SinkLocation.edge(2, 0.5 * net.lengths[2])
    sim = oracle.refine(oracle.simulate_aggregate, net, sink, 0.4, tol=1e-5)
    assert sim == pytest.approx(aggregate_time(net, sink, 0.4), rel=1e-4)


def test_simulation_step_guard():
    with pytest.raises(ValueError):
        oracle.simulate_completion(const_net([1, 1], [1], [1]), 0.0, 0.0, 0.0)


def test_refine_gives_up():
    def noisy(net, sink, t, dt):
        noisy.calls += 1
        return float(noisy.calls % 2)

    noisy.calls = 0
    with pytest.raises(oracle.ConvergenceError):
        oracle.refine(noisy, const_net([1, 1], [1], [1]), 0.0, 0.0, max_halvings=5)
