import numpy as np
import pytest

from mmrsink.evac import (
    SinkLocation,
    aggregate_time,
    aggregate_time_at,
    completion_time_to_v1,
    side_total,
    theta_L,
    theta_R,
)
from mmrsink.network import ParametricPathNetwork, random_instance

from conftest import nets


def const_net(w, lengths, caps, tau=1.0):
    return ParametricPathNetwork.build(w, [0.0] * len(w), lengths, caps, tau=tau)


def test_completion_hand_case(three_vertex):
    assert completion_time_to_v1(three_vertex, 0.0) == pytest.approx(4.0)


def test_completion_zero_weights():
    net = const_net([0, 0, 0], [1, 2], [1, 1], tau=2.0)
    assert completion_time_to_v1(net, 0.5) == pytest.approx(6.0)


def test_theta_examples():
    net = const_net([0, 2, 1], [1, 1], [1, 1])
    assert theta_R(net, 0, 0.5, 0.0, 1.0) == pytest.approx(1.5)
    assert theta_R(net, 0, 0.5, 0.0, 2.5) == pytest.approx(3.0)
    # vanishing supply: travel time to the first vertex
    assert theta_R(net, 0, 0.5, 0.0, 1e-12) == pytest.approx(0.5)


def test_theta_rejects_excess_supply():
    net = const_net([0, 2, 1], [1, 1], [1, 1])
    with pytest.raises(ValueError, match="outside"):
        theta_R(net, 0, 0.5, 0.0, 3.5)


def test_theta_monotone_in_z(rng):
    net = random_instance(8, rng)
    for side, theta in (("L", theta_L), ("R", theta_R)):
        edge = 3
        x = float(np.mean(net.positions[edge : edge + 2]))
        t = 0.3
        total = side_total(net, edge, side, t)
        zs = np.sort(rng.uniform(0, total, 1001))[1:]
        vals = [theta(net, edge, x, t, z) for z in zs]
        assert np.all(np.diff(vals) >= -1e-12)


def test_aggregate_examples():
    net = const_net([0, 1], [1], [1])
    assert aggregate_time(net, SinkLocation.vertex(0), 0.0) == pytest.approx(1.5)
    zero = const_net([0, 0, 0], [1, 1], [1, 2])
    assert aggregate_time(zero, SinkLocation.edge(1, 0.3), 0.5) == 0.0


def test_aggregate_matches_quadrature(rng):
    net = random_instance(8, rng)
    edge = 4
    x = float(net.positions[edge] + 0.4 * net.lengths[edge])
    t = 0.6
    panels = 100_000
    acc = 0.0
    for side, theta in (("L", theta_L), ("R", theta_R)):
        total = side_total(net, edge, side, t)
        zs = (np.arange(panels) + 0.5) * total / panels
        acc += sum(theta(net, edge, x, t, z) for z in zs) * total / panels
    value = aggregate_time(net, SinkLocation.edge(edge, x - net.positions[edge]), t)
    # midpoint rule; the integrand is piecewise linear with a few jumps
    assert value == pytest.approx(acc, rel=1e-5)


def test_sink_location_snapping():
    net = const_net([1, 1, 1], [1, 2], [1, 1])
    assert SinkLocation.at(net, 1.0) == SinkLocation.vertex(1)
    assert SinkLocation.at(net, 2.0) == SinkLocation.edge(1, 1.0)
    with pytest.raises(ValueError):
        SinkLocation.at(net, 3.5)
    with pytest.raises(ValueError):
        SinkLocation.edge(0, 1.0).check(net)


def test_vertex_limit_dominates_vertex_value():
    # an edge point next to a vertex pays at least the vertex cost
    for net in nets(7, 10, 8):
        for k in range(net.n - 1):
            x = float(net.positions[k]) + 1e-9
            t = 0.5
            assert aggregate_time_at(net, x, t) >= aggregate_time(net, SinkLocation.vertex(k), t) - 1e-6
