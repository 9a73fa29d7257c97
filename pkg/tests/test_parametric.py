import numpy as np
import pytest

from mmrsink import oracle
from mmrsink.evac import SinkLocation, aggregate_time, side_integral
from mmrsink.network import ParametricPathNetwork, random_instance
from mmrsink.parametric import (
    _z_functions,
    compute_F,
    compute_opt,
    phi_at_vertex,
    z_breakpoint_envelope,
)
from mmrsink.pwpoly import track_additions

from conftest import constant, nets


def rel_err(a, b):
    return np.max(np.abs(np.asarray(a) - b) / np.maximum(1.0, np.abs(b)))


def test_single_vertex_side():
    net = ParametricPathNetwork.build([1, 2], [2, 0], [1.5], [0.5], tau=2.0)
    F = compute_F(net, 0, "L")
    assert F.n_pieces == 1
    ts = np.linspace(0, 1, 11)
    w = 1 + 2 * ts
    assert np.allclose(F(ts), w**2 / (2 * 0.5))
    # the lone right vertex sits at distance 1.5
    G = compute_F(net, 0, "R")
    assert np.allclose(G(ts), 2 * 1.5 * 2 + 2**2 / (2 * 0.5))


def test_constant_weights_give_constant_F():
    net = constant(random_instance(9, np.random.default_rng(5)))
    for i in range(net.n - 1):
        for side in "LR":
            F = compute_F(net, i, side)
            assert F.n_pieces == 1
            assert np.allclose(F.coefs[0][:2], 0)


def test_z_hand_case():
    # capacities (1, 2, 1); on edge 1 vertex 0 takes over from vertex 1 at z = 2 w_1 - 2
    net = ParametricPathNetwork.build([1, 1, 0, 1], [0, 2, 0, 1], [1, 1, 1], [1, 2, 1])
    ts = np.linspace(0, 1, 5)
    w1 = 1 + 2 * ts
    expect = np.minimum(np.maximum(w1, 2 * w1 - 2), 2 + 2 * ts)
    assert np.allclose(z_breakpoint_envelope(net, 1, "L", 0)(ts), expect)
    zfs, _ = _z_functions(net, 1)
    assert np.allclose(zfs[0](ts), expect)
    assert np.allclose(z_breakpoint_envelope(net, 1, "L", 1)(ts), 0)


def test_single_left_vertex_has_no_competitor():
    net = random_instance(4, np.random.default_rng(6))
    z = z_breakpoint_envelope(net, 0, "L", 0)
    assert z.n_pieces == 1 and np.allclose(z.coefs, 0)


def test_z_engines_agree():
    for net in nets(31, 15, 10, n_min=3):
        for edge in range(net.n - 1):
            zfs, _ = _z_functions(net, edge)
            ts = np.linspace(net.t_lo, net.t_hi, 97)
            for j in range(edge + 1):
                a = zfs[j](ts)
                b = z_breakpoint_envelope(net, edge, "L", j)(ts)
                assert rel_err(a, b) < 1e-9


def test_uniform_capacity_z_has_few_breakpoints():
    net = random_instance(15, np.random.default_rng(8), capacity_mode="uniform")
    for edge in range(net.n - 1):
        zfs, _ = _z_functions(net, edge)
        for z in zfs:
            assert len(z.breaks) - 2 <= 2


def test_F_matches_fixed_t_integral(rng):
    for net in nets(41, 15, 12):
        ts = rng.uniform(net.t_lo, net.t_hi, 200)
        for i in range(net.n - 1):
            for side in "LR":
                F = compute_F(net, i, side)
                ref = np.array([side_integral(net, i, side, t) for t in ts[:40]])
                assert rel_err(F(ts[:40]), ref) < 1e-7
                assert rel_err(F(ts), oracle.oracle_F(net, i, side, ts)) < 1e-7


def test_equal_capacity_ties():
    # equal bottlenecks make the realizer change where no takeover level bends
    rng = np.random.default_rng(9)
    for _ in range(10):
        net = random_instance(12, rng, capacity_mode="uniform")
        caps = rng.choice([1.0, 2.0], net.n - 1)
        net = ParametricPathNetwork.build(net.a, net.b, net.lengths, caps)
        ts = rng.uniform(0, 1, 100)
        for i in range(net.n - 1):
            F = compute_F(net, i, "L")
            assert rel_err(F(ts), oracle.oracle_F(net, i, "L", ts)) < 1e-7


def test_phi_at_vertex(rng):
    for net in nets(51, 8, 9):
        ts = rng.uniform(net.t_lo, net.t_hi, 200)
        for k in range(net.n):
            phi = phi_at_vertex(net, k)
            ref = [aggregate_time(net, SinkLocation.vertex(k), t) for t in ts]
            assert rel_err(phi(ts), ref) < 1e-7
    # at the origin only the right side remains
    net = random_instance(5, rng)
    assert rel_err(phi_at_vertex(net, 0)(ts), compute_F(net, 0, "R")(ts)) < 1e-12


def test_opt(rng):
    for net in nets(61, 10, 12):
        opt = compute_opt(net)
        ts = rng.uniform(net.t_lo, net.t_hi, 500)
        assert rel_err(opt(ts), oracle.oracle_opt_many(net, ts)) < 1e-7
        assert all(0 <= tag < net.n for tag in opt.tags)


def test_opt_constant_weights():
    net = constant(random_instance(8, np.random.default_rng(2)))
    opt = compute_opt(net)
    assert opt.n_pieces == 1 and np.allclose(opt.coefs[0][:2], 0)


def test_opt_switches_realizer_in_symmetric_pair():
    # weights cross at t = 1/2; the optimal vertex is the heavier one
    net = ParametricPathNetwork.build([0, 1], [1, -1], [1], [1])
    opt = compute_opt(net)
    assert opt.tags == (1, 0)
    assert opt.breaks[1] == pytest.approx(0.5)


def test_additions_respect_size_bound():
    with track_additions() as counter:
        for net in nets(71, 5, 10):
            for k in range(net.n):
                phi_at_vertex(net, k)
    assert counter.calls > 0 and counter.violations == []
