import numpy as np
import pytest

from mmrsink import oracle
from mmrsink.evac import SinkLocation, aggregate_time_at
from mmrsink.network import ParametricPathNetwork, random_instance
from mmrsink.pwpoly import PiecewisePoly, maximize_on
from mmrsink.regret import (
    PieceTable,
    RegretModel,
    RegretPiece,
    g_of_x,
    minimize_mr_on_edge,
    mr_at_vertex,
    solve,
)

from conftest import constant, nets


@pytest.fixture(scope="module")
def models():
    return [RegretModel(net) for net in nets(81, 8, 8)]


def test_constant_weights_have_no_cross_term():
    net = constant(random_instance(6, np.random.default_rng(1)))
    model = RegretModel(net)
    for i in range(net.n - 1):
        for p in model.pieces(i):
            assert p.beta[1] == 0.0


def test_piece_count_bound(models):
    for m in models:
        for i in range(m.net.n - 1):
            assert len(m.pieces(i)) <= m.F_L[i].n_pieces + m.F_R[i].n_pieces + m.opt.n_pieces


def test_pieces_reconstruct_regret(models, rng):
    for m in models:
        net = m.net
        for i in range(net.n - 1):
            for p in m.pieces(i):
                t = 0.5 * (p.t_lo + p.t_hi)
                for x in rng.uniform(net.positions[i], net.positions[i + 1], 3):
                    ref = aggregate_time_at(net, float(x), t) - float(m.opt(t))
                    assert p(x, t) == pytest.approx(ref, rel=1e-7, abs=1e-7)


def test_g_hand_case():
    piece = RegretPiece(0, -1.0, 1.0, (-1.0, 1.0, 0.0, 0.0, 0.0))
    G = g_of_x(piece, (0.0, 4.0))
    xs = np.linspace(0, 4, 41)
    expect = np.where(xs <= 2, xs**2 / 4, xs - 1)
    assert np.allclose(G(xs), expect)
    assert G.n_pieces == 2


def test_g_linear_in_t():
    piece = RegretPiece(0, 0.0, 1.0, (0.0, 0.0, 2.0, 1.0, 0.0))
    G = g_of_x(piece, (0.0, 1.0))
    assert G.n_pieces == 1
    assert np.allclose(G(np.linspace(0, 1, 5)), np.linspace(0, 1, 5) + 2)


def test_g_dominates_samples(rng):
    for _ in range(50):
        beta = tuple(rng.normal(size=5))
        t0, t1 = np.sort(rng.uniform(-1, 1, 2))
        piece = RegretPiece(0, t0, t1, beta)
        G = g_of_x(piece, (0.0, 2.0))
        assert G.n_pieces <= 3
        xs = rng.uniform(0, 2, 100)
        ts = rng.uniform(t0, t1, 100)
        assert np.all(G(xs) >= piece(xs, ts) - 1e-12)
        for x in xs[:10]:
            _, top = maximize_on(PiecewisePoly.from_quad(piece.at_x(x), t0, t1), (t0, t1))
            assert G(x) == pytest.approx(top, rel=1e-12, abs=1e-12)


def test_single_piece_interior_minimum():
    net = ParametricPathNetwork.build([1, 1], [0, 0], [4], [1], horizon=(-10, 10))
    piece = RegretPiece(0, -10.0, 10.0, (-1.0, 1.0, 0.0, -1.0, 0.0))
    res = minimize_mr_on_edge(net, 0, [piece])
    assert res.x == pytest.approx(2.0)
    assert res.value == pytest.approx(-1.0)


def test_edge_minimum_beats_grid(models):
    for m in models:
        net = m.net
        for i in range(net.n - 1):
            res = minimize_mr_on_edge(net, i, m.pieces(i))
            xs = np.linspace(net.positions[i], net.positions[i + 1], 1000)
            grid = m.table(i).mr(xs)
            assert res.value <= grid.min() + 1e-9 * (1 + abs(res.value))


def test_table_matches_per_piece_maximization(models, rng):
    m = max(models, key=lambda m: m.net.n)
    net = m.net
    xs = rng.uniform(net.positions[2], net.positions[3], 100)
    fast = m.table(2).mr(xs)
    for x, v in zip(xs, fast):
        slow = max(
            maximize_on(PiecewisePoly.from_quad(p.at_x(x), p.t_lo, p.t_hi), (p.t_lo, p.t_hi))[1]
            for p in m.pieces(2)
        )
        assert v == pytest.approx(slow, rel=1e-7, abs=1e-7)


def test_vertex_regret(models):
    for m in models:
        net = m.net
        for k in range(net.n):
            prev = m.F_L[k - 1] if k > 0 else None
            nxt = m.F_R[k] if k < net.n - 1 else None
            value = mr_at_vertex(net, k, prev, nxt, m.opt)
            assert value >= -1e-9
            assert value == pytest.approx(m.mr_vertex(k), rel=1e-12, abs=1e-12)
            ref = oracle.oracle_mr(net, float(net.positions[k]))
            assert value == pytest.approx(ref, rel=1e-6, abs=1e-6)


def test_always_optimal_vertex_has_zero_regret():
    # all supply at vertex 0: it is the optimal sink for every t
    net = ParametricPathNetwork.build([1, 0, 0], [1, 0, 0], [1, 1], [1, 1])
    model = RegretModel(net)
    assert model.mr_vertex(0) == pytest.approx(0.0, abs=1e-12)
    assert solve(net).sink == SinkLocation.vertex(0)


def test_symmetric_pair():
    net = ParametricPathNetwork.build([1, 1], [0, 0], [2], [1])
    res = solve(net)
    # both ends are optimal for every t, so regret is zero there; the tie goes left
    assert res.sink == SinkLocation.vertex(0)
    assert res.max_regret == 0.0
    model = RegretModel(net)
    mid = oracle.oracle_phi(net, 1.0, 0.5) - float(model.opt(0.5))
    assert model.mr([1.0])[0] == pytest.approx(mid) == pytest.approx(0.5)


def test_constant_weights_reduce_to_minsum(rng):
    for net in nets(91, 5, 7):
        net = constant(net)
        res = solve(net)
        xs = np.linspace(0, net.total_length, 2001)
        phi = np.array([oracle.oracle_phi(net, float(x), 0.0) for x in xs])
        opt = min(oracle.oracle_phi(net, float(v), 0.0) for v in net.positions)
        assert res.max_regret <= phi.min() - opt + 1e-9 * (1 + abs(opt))
        assert res.max_regret == pytest.approx(oracle.oracle_phi(net, res.coordinate, 0.0) - opt, abs=1e-9)


def test_solver_beats_global_grid(models):
    for m in models:
        net = m.net
        res = solve(net, m)
        xs = np.linspace(0, net.total_length, 400)
        grid = m.mr(xs)
        assert np.all(grid >= -1e-9)
        assert res.max_regret <= grid.min() + 1e-9 * (1 + abs(res.max_regret))
        assert m.mr([res.coordinate])[0] == pytest.approx(res.max_regret, rel=1e-9, abs=1e-12)


def test_diagnostics_shape(models):
    m = models[0]
    d = solve(m.net, m).diagnostics
    assert d["n"] == m.net.n
    assert len(d["edges"]) == m.net.n - 1
    assert set(d["seconds"]) == {"side_functions", "opt", "vertices", "edges"}


def test_table_nonnegative_regret(models, rng):
    for m in models:
        net = m.net
        xs = rng.uniform(0, net.total_length, 100)
        ts = rng.uniform(net.t_lo, net.t_hi, 100)
        for x, t in zip(xs, ts):
            assert m.phi(float(x), t) - float(m.opt(t)) >= -1e-9
        assert PieceTable(m.pieces(0)).mr(xs[:3]).shape == (3,)
