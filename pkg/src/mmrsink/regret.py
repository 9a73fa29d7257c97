"""Maximum regret and the minmax-regret sink.

On edge ``i`` the regret ``R(x, t) = Phi(x, t) - Opt(t)`` is, piece by piece
in t, ``b1 t^2 + b2 x t + b3 t + b4 x + b5``.  Maximizing each piece over its
t-range gives a function of x with at most three pieces, and the upper
envelope of those is ``MR`` on the edge.  Vertex regret is maximized directly
over the piecewise quadratic ``Phi(v, t) - Opt(t)``.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .evac import SinkLocation
from .network import EPS_REL, ParametricPathNetwork
from .parametric import NumericBreakdown, compute_F, compute_opt, phi_at_vertex
from .pwpoly import PiecewisePoly, QuadFn, maximize_on, minimize_on, pw_add, upper_envelope


@dataclass(frozen=True)
class RegretPiece:
    """``R(x, t) = b1 t^2 + b2 x t + b3 t + b4 x + b5`` for x on ``edge`` and t in ``[t_lo, t_hi]``."""

    edge: int
    t_lo: float
    t_hi: float
    beta: tuple

    def __call__(self, x, t):
        b1, b2, b3, b4, b5 = self.beta
        return b1 * t * t + b2 * x * t + b3 * t + b4 * x + b5

    def at_t(self, t) -> QuadFn:
        """``R(., t)`` as a (linear) function of x."""
        b1, b2, b3, b4, b5 = self.beta
        return QuadFn(0.0, b2 * t + b4, b1 * t * t + b3 * t + b5)

    def at_x(self, x) -> QuadFn:
        """``R(x, .)`` as a quadratic in t."""
        b1, b2, b3, b4, b5 = self.beta
        return QuadFn(b1, b2 * x + b3, b4 * x + b5)


def regret_pieces(net: ParametricPathNetwork, edge: int, F_L, F_R, opt) -> list:
    """Regret pieces of ``edge`` from its two side functions and ``Opt``."""
    tau = net.tau
    diff = net.prefix_weight(0, edge) - net.prefix_weight(edge + 1, net.n - 1)
    b2, b4 = tau * diff.slope, tau * diff.intercept
    q = pw_add(pw_add(F_L, F_R), -opt)
    out = []
    for k in range(q.n_pieces):
        a2, a1, a0 = (float(c) for c in q.coefs[k])
        out.append(RegretPiece(edge, float(q.breaks[k]), float(q.breaks[k + 1]), (a2, b2, a1, b4, a0)))
    return out


def g_leaves(piece: RegretPiece, x_lo: float, x_hi: float) -> list:
    """``max over t of R(x, t)`` on the piece as at most three ``(QuadFn, (lo, hi))`` parts.

    For a convex (or linear) piece in t the maximum sits at an end of the
    t-range, and both end lines are returned over the whole extent (their
    upper envelope is the answer).  For a concave piece the vertex
    ``t*(x) = -(b2 x + b3) / (2 b1)`` is clamped into the range.
    """
    b1, b2, b3, b4, b5 = piece.beta
    t0, t1 = piece.t_lo, piece.t_hi
    left, right = piece.at_t(t0), piece.at_t(t1)
    if b1 >= 0:
        return [(left, (x_lo, x_hi)), (right, (x_lo, x_hi))]
    middle = QuadFn(-b2 * b2 / (4 * b1), b4 - b2 * b3 / (2 * b1), b5 - b3 * b3 / (4 * b1))
    if b2 == 0.0:
        ts = -b3 / (2 * b1)
        q = left if ts <= t0 else right if ts >= t1 else middle
        return [(q, (x_lo, x_hi))]
    # t*(x) = t  <=>  x = (-2 b1 t - b3) / b2
    xa = (-2 * b1 * t0 - b3) / b2
    xb = (-2 * b1 * t1 - b3) / b2
    # t* increases with x when b2 > 0 (b1 < 0)
    if b2 > 0:
        regions = [(left, x_lo, xa), (middle, xa, xb), (right, xb, x_hi)]
    else:
        regions = [(right, x_lo, xb), (middle, xb, xa), (left, xa, x_hi)]
    out = []
    for q, lo, hi in regions:
        lo, hi = max(lo, x_lo), min(hi, x_hi)
        if hi > lo:
            out.append((q, (lo, hi)))
    if not out:
        # the extent is a single point or all regions degenerate
        x = x_lo
        t = min(max(-(b2 * x + b3) / (2 * b1), t0), t1)
        out.append((QuadFn(0.0, 0.0, float(piece(x, t))), (x_lo, x_hi)))
    return out


def g_of_x(piece: RegretPiece, extent) -> PiecewisePoly:
    """``G(x) = max over the piece's t-range of R(x, t)`` on the closed ``extent``."""
    lo, hi = extent
    return upper_envelope(g_leaves(piece, lo, hi), domain=(lo, hi))


class PieceTable:
    """The regret pieces of one edge as arrays, for vectorized evaluation."""

    def __init__(self, pieces: list):
        self.pieces = pieces
        self.beta = np.array([p.beta for p in pieces], dtype=float).reshape(-1, 5)
        self.t0 = np.array([p.t_lo for p in pieces])
        self.t1 = np.array([p.t_hi for p in pieces])

    def max_over_t(self, xs) -> np.ndarray:
        """``(len(xs), pieces)`` array of per-piece maxima over t."""
        x = np.asarray(xs, dtype=float)[:, None]
        b1, b2, b3, b4, b5 = (self.beta[:, k][None, :] for k in range(5))
        lin = b2 * x + b3
        base = b4 * x + b5

        def val(t):
            return b1 * t * t + lin * t + base

        best = np.maximum(val(self.t0[None, :]), val(self.t1[None, :]))
        with np.errstate(divide="ignore", invalid="ignore"):
            ts = np.clip(-lin / (2 * b1), self.t0[None, :], self.t1[None, :])
        inner = np.where(b1 < 0, val(ts), -np.inf)
        return np.maximum(best, inner)

    def mr(self, xs) -> np.ndarray:
        return self.max_over_t(xs).max(axis=1)


@dataclass
class EdgeResult:
    edge: int
    x: float
    value: float
    envelope_pieces: int
    kept_pieces: int


def minimize_mr_on_edge(net: ParametricPathNetwork, edge: int, pieces: list) -> EdgeResult:
    """Minimize ``MR`` over the closed extent of ``edge``.

    Pieces whose maximum over the edge falls below a certified lower bound
    on ``MR`` cannot touch the envelope and are skipped before it is built.
    """
    x_lo = float(net.positions[edge])
    x_hi = float(net.positions[edge + 1])
    table = PieceTable(pieces)
    ends = table.max_over_t([x_lo, x_hi])  # G_j is convex in x: its max is at an end
    top = ends.max(axis=0)
    # every R(., t) lies below MR, so min over x of R(x, t) bounds min MR from below
    b = table.beta
    lows = []
    for t in (table.t0, table.t1):
        at_lo = b[:, 0] * t * t + (b[:, 1] * x_lo + b[:, 2]) * t + b[:, 3] * x_lo + b[:, 4]
        at_hi = b[:, 0] * t * t + (b[:, 1] * x_hi + b[:, 2]) * t + b[:, 3] * x_hi + b[:, 4]
        lows.append(np.minimum(at_lo, at_hi))
    bound = float(np.max(lows))
    keep = np.flatnonzero(top >= bound - 1e-7 * (1.0 + abs(bound)))
    leaves = []
    for k in keep:
        leaves.extend(g_leaves(pieces[k], x_lo, x_hi))
    env = upper_envelope(leaves, domain=(x_lo, x_hi))
    x, value = minimize_on(env, (x_lo, x_hi))
    return EdgeResult(edge, x, value, env.n_pieces, len(keep))


def mr_at_vertex(net: ParametricPathNetwork, k: int, F_Lprev, F_Rnext, opt) -> float:
    """``MR(v_k)``; ``F_Lprev`` (``F_Rnext``) is ignored at the left (right) end."""
    v = float(net.positions[k])
    diff = net.prefix_weight(0, k - 1) if k > 0 else None
    lin = QuadFn()
    if diff is not None:
        lin = lin + QuadFn(0.0, net.tau * v * diff.slope, net.tau * v * diff.intercept)
    if k < net.n - 1:
        w = net.prefix_weight(k + 1, net.n - 1)
        lin = lin - QuadFn(0.0, net.tau * v * w.slope, net.tau * v * w.intercept)
    r = (-opt).add_quad(lin)
    if k > 0:
        r = pw_add(r, F_Lprev)
    if k < net.n - 1:
        r = pw_add(r, F_Rnext)
    return maximize_on(r, (net.t_lo, net.t_hi))[1]


class RegretModel:
    """All symbolic pieces of an instance: side functions, vertex aggregate times, ``Opt``."""

    def __init__(self, net: ParametricPathNetwork):
        self.net = net
        self.timings = {}
        clock = time.perf_counter()
        mirror = net.mirrored()
        self.F_L, self.F_R = [], []
        for i in range(net.n - 1):
            for side, store in (("L", self.F_L), ("R", self.F_R)):
                try:
                    store.append(compute_F(net, i, side, mirror))
                except NumericBreakdown as exc:
                    raise NumericBreakdown(
                        f"building F_{side} of edge {i}: {exc}", exc.lo, exc.hi
                    ) from exc
        self.timings["side_functions"] = time.perf_counter() - clock
        clock = time.perf_counter()
        self.phis = [phi_at_vertex(net, k, (self.F_L, self.F_R)) for k in range(net.n)]
        self.opt = compute_opt(net, self.phis)
        self.timings["opt"] = time.perf_counter() - clock
        self._tables = {}

    def pieces(self, edge: int) -> list:
        return self.table(edge).pieces

    def table(self, edge: int) -> PieceTable:
        if edge not in self._tables:
            self._tables[edge] = PieceTable(
                regret_pieces(self.net, edge, self.F_L[edge], self.F_R[edge], self.opt)
            )
        return self._tables[edge]

    def phi(self, x: float, t):
        """``Phi(x, t)`` from the symbolic pieces (``t`` may be an array)."""
        loc = SinkLocation.at(self.net, x)
        if loc.kind == "vertex":
            return self.phis[loc.index](t)
        i = loc.index
        net = self.net
        diff = net.prefix_weight(0, i) - net.prefix_weight(i + 1, net.n - 1)
        return diff(np.asarray(t)) * net.tau * x + self.F_L[i](t) + self.F_R[i](t)

    def mr_vertex(self, k: int) -> float:
        r = self.phis[k] - self.opt
        return maximize_on(r, (self.net.t_lo, self.net.t_hi))[1]

    def mr(self, xs) -> np.ndarray:
        """``MR`` at each coordinate (vertex coordinates use the vertex sink)."""
        xs = np.atleast_1d(np.asarray(xs, dtype=float))
        out = np.empty(len(xs))
        by_edge = {}
        for k, x in enumerate(xs):
            loc = SinkLocation.at(self.net, float(x))
            if loc.kind == "vertex":
                out[k] = self.mr_vertex(loc.index)
            else:
                by_edge.setdefault(loc.index, []).append(k)
        for i, members in by_edge.items():
            out[members] = self.table(i).mr(xs[members])
        return out


@dataclass
class SolveResult:
    sink: SinkLocation
    max_regret: float
    coordinate: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self, net: ParametricPathNetwork) -> dict:
        return {
            "sink": self.sink.to_dict(net),
            "max_regret": self.max_regret,
            "diagnostics": self.diagnostics,
        }


def solve(net: ParametricPathNetwork, model: RegretModel | None = None) -> SolveResult:
    """The minmax-regret sink; near-ties (1e-9 relative) go to the smaller coordinate."""
    model = RegretModel(net) if model is None else model
    clock = time.perf_counter()
    candidates = []
    vertex_mr = []
    for k in range(net.n):
        F_prev = model.F_L[k - 1] if k > 0 else None
        F_next = model.F_R[k] if k < net.n - 1 else None
        value = mr_at_vertex(net, k, F_prev, F_next, model.opt)
        vertex_mr.append(value)
        candidates.append((value, float(net.positions[k]), SinkLocation.vertex(k)))
    model.timings["vertices"] = time.perf_counter() - clock
    clock = time.perf_counter()
    edge_rows = []
    for i in range(net.n - 1):
        pieces = model.pieces(i)
        res = minimize_mr_on_edge(net, i, pieces)
        offset = res.x - float(net.positions[i])
        interior = EPS_REL * max(1.0, abs(res.x)) < offset < net.lengths[i] - EPS_REL * max(1.0, abs(res.x))
        edge_rows.append(
            {
                "edge": i,
                "coordinate": res.x,
                "max_regret": res.value,
                "interior": bool(interior),
                "regret_pieces": len(pieces),
                "kept_pieces": res.kept_pieces,
                "envelope_pieces": res.envelope_pieces,
            }
        )
        # an end-point minimum is dominated by the vertex itself
        if interior:
            candidates.append((res.value, res.x, SinkLocation.edge(i, offset)))
    model.timings["edges"] = time.perf_counter() - clock
    best = min(c[0] for c in candidates)
    near = [c for c in candidates if c[0] <= best + EPS_REL * max(1.0, abs(best))]
    value, x, sink = min(near, key=lambda c: c[1])
    diagnostics = {
        "n": net.n,
        "pieces_F_L": [f.n_pieces for f in model.F_L],
        "pieces_F_R": [f.n_pieces for f in model.F_R],
        "pieces_opt": model.opt.n_pieces,
        "mr_vertex": vertex_mr,
        "edges": edge_rows,
        "seconds": dict(model.timings),
    }
    return SolveResult(sink, float(value) + 0.0, float(x), diagnostics)
