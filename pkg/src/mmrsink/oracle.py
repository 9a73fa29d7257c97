"""Brute-force validators.

Nothing here touches the envelope engine or the parametric construction;
only the instance data of :mod:`mmrsink.network` is used.

* :func:`oracle_phi` integrates arrival times exactly by enumerating every
  point where the maximizing vertex can change (all domain starts and all
  pairwise crossings) and applying the midpoint rule between them, which is
  exact for piecewise linear integrands.
* :func:`oracle_mr` maximizes regret over a uniform t-grid and polishes the
  best grid cell with golden-section search.
* :func:`simulate_completion` runs the discrete-time fluid model of the
  evacuation itself (FIFO queues, capacity-limited edges, transit delays).
"""
from __future__ import annotations

import math

import numpy as np

from .network import EPS_REL, ParametricPathNetwork

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


class ConvergenceError(RuntimeError):
    """The time-step refinement did not settle."""


# -- exact aggregate time by enumeration -----------------------------------


def _naive_min(caps, lo, hi):
    return min(caps[lo : hi + 1])


def _classify(net: ParametricPathNetwork, x: float):
    """``("vertex", k)`` or ``("edge", i)`` for a coordinate."""
    pos = net.positions
    scale = max(1.0, abs(x))
    for k in range(net.n):
        if abs(x - pos[k]) <= EPS_REL * scale:
            return "vertex", k
    if x < pos[0] or x > pos[-1]:
        raise ValueError(f"coordinate {x} is off the path")
    i = int(np.searchsorted(pos, x, side="right")) - 1
    return "edge", i


def _sides(net: ParametricPathNetwork, kind: str, idx: int, x: float):
    """Per side: vertex indices nearest-first, their distances to ``x`` and bottleneck capacities."""
    caps = net.capacities
    pos = net.positions
    if kind == "vertex":
        left_last, left_edge = idx - 1, idx - 1
        right_first, right_edge = idx + 1, idx
    else:
        left_last, left_edge = idx, idx
        right_first, right_edge = idx + 1, idx
    left = [
        (h, x - pos[h], _naive_min(caps, h, left_edge)) for h in range(left_last, -1, -1)
    ]
    right = [
        (h, pos[h] - x, _naive_min(caps, right_edge, h - 1)) for h in range(right_first, net.n)
    ]
    return left, right


def side_phi(tau: float, dist, caps, weights) -> np.ndarray:
    """Exact integral of arrival times for one side, vectorized over scenarios.

    ``weights`` has shape ``(T, H)`` with vertices ordered nearest first;
    ``dist`` and ``caps`` have shape ``(H,)``.  Vertex ``h`` contributes the
    arrival line ``tau * dist[h] + (z - P_h) / caps[h]`` for ``z > P_h``,
    where ``P_h`` is the supply of the vertices nearer than ``h``.
    """
    w = np.atleast_2d(np.asarray(weights, dtype=float))
    n_t, n_h = w.shape
    if n_h == 0:
        return np.zeros(n_t)
    dist = np.asarray(dist, dtype=float)
    inv = 1.0 / np.asarray(caps, dtype=float)
    prior = np.cumsum(w, axis=1) - w
    total = w.sum(axis=1)
    icpt = tau * dist[None, :] - prior * inv[None, :]  # (T, H)
    cands = [np.zeros((n_t, 1)), total[:, None], prior]
    hh, gg = np.triu_indices(n_h, k=1)
    diff = inv[hh] - inv[gg]
    ok = diff != 0.0
    if np.any(ok):
        hh, gg, diff = hh[ok], gg[ok], diff[ok]
        cands.append((icpt[:, gg] - icpt[:, hh]) / diff[None, :])
    pts = np.concatenate(cands, axis=1)
    pts = np.clip(pts, 0.0, total[:, None])
    pts.sort(axis=1)
    mid = 0.5 * (pts[:, 1:] + pts[:, :-1])
    width = pts[:, 1:] - pts[:, :-1]
    vals = icpt[:, None, :] + mid[:, :, None] * inv[None, None, :]
    active = mid[:, :, None] > prior[:, None, :]
    vals = np.where(active, vals, -np.inf).max(axis=2)
    vals = np.where(width > 0, vals, 0.0)
    return (vals * width).sum(axis=1)


def _weights_matrix(net: ParametricPathNetwork, idx, ts) -> np.ndarray:
    a = np.asarray(net.a)[idx]
    b = np.asarray(net.b)[idx]
    return a[None, :] + np.asarray(ts, dtype=float)[:, None] * b[None, :]


def oracle_phi_many(net: ParametricPathNetwork, x: float, ts) -> np.ndarray:
    """Aggregate evacuation time to sink coordinate ``x`` at each t in ``ts``."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    kind, idx = _classify(net, x)
    if kind == "vertex":
        x = float(net.positions[idx])
    out = np.zeros(len(ts))
    for side in _sides(net, kind, idx, x):
        if not side:
            continue
        verts = [s[0] for s in side]
        out += side_phi(
            net.tau,
            [s[1] for s in side],
            [s[2] for s in side],
            _weights_matrix(net, verts, ts),
        )
    return out


def oracle_phi(net: ParametricPathNetwork, x: float, t: float) -> float:
    """Aggregate evacuation time to sink coordinate ``x`` under scenario ``t``."""
    return float(oracle_phi_many(net, x, [t])[0])


def oracle_F(net: ParametricPathNetwork, edge: int, side: str, ts) -> np.ndarray:
    """One side's integral of arrival times at edge ``edge`` without the ``tau x`` sink term."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    pos, caps = net.positions, net.capacities
    if side == "L":
        verts = list(range(edge, -1, -1))
        dist = [-pos[h] for h in verts]
        bott = [_naive_min(caps, h, edge) for h in verts]
    elif side == "R":
        verts = list(range(edge + 1, net.n))
        dist = [pos[h] for h in verts]
        bott = [_naive_min(caps, edge, h - 1) for h in verts]
    else:
        raise ValueError(f"side must be 'L' or 'R', got {side!r}")
    return side_phi(net.tau, dist, bott, _weights_matrix(net, verts, ts))


def oracle_opt_many(net: ParametricPathNetwork, ts) -> np.ndarray:
    """Minimum over vertex sinks of the aggregate time, for each t."""
    ts = np.atleast_1d(np.asarray(ts, dtype=float))
    return np.min([oracle_phi_many(net, float(p), ts) for p in net.positions], axis=0)


def _edge_base(net, i, ts):
    """Aggregate time at the left end of edge ``i`` using that edge's routing, and its x-slope."""
    x0 = float(net.positions[i])
    left, right = _sides(net, "edge", i, x0)
    base = np.zeros(len(ts))
    for side in (left, right):
        verts = [s[0] for s in side]
        base += side_phi(net.tau, [s[1] for s in side], [s[2] for s in side], _weights_matrix(net, verts, ts))
    w = _weights_matrix(net, list(range(net.n)), ts)
    slope = net.tau * (w[:, : i + 1].sum(axis=1) - w[:, i + 1 :].sum(axis=1))
    return x0, base, slope


def _phi_fn(net, xs):
    """``phi(ts)`` evaluating the aggregate time at ``xs[k]`` and ``ts[k]`` pairwise."""
    xs = np.asarray(xs, dtype=float)
    kinds = [_classify(net, float(x)) for x in xs]

    def phi(ts):
        ts = np.asarray(ts, dtype=float)
        out = np.empty(len(xs))
        groups: dict = {}
        for k, key in enumerate(kinds):
            groups.setdefault(key, []).append(k)
        for (kind, idx), members in groups.items():
            members = np.asarray(members)
            if kind == "vertex":
                out[members] = oracle_phi_many(net, float(net.positions[idx]), ts[members])
            else:
                x0, base, slope = _edge_base(net, idx, ts[members])
                out[members] = base + slope * (xs[members] - x0)
        return out

    return phi, kinds


def oracle_mr_many(
    net: ParametricPathNetwork,
    xs,
    t_grid_size: int = 10_000,
    refine_iters: int = 40,
    refine_below: float = math.inf,
    chunk: int = 256,
) -> np.ndarray:
    """Maximum regret at each coordinate in ``xs`` (a lower bound that tightens with the grid).

    The best grid cell of every ``x`` whose grid value is below
    ``refine_below`` is polished by ``refine_iters`` golden-section steps.
    """
    if t_grid_size < 2:
        raise ValueError("t_grid_size must be at least 2")
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    grid = np.linspace(net.t_lo, net.t_hi, t_grid_size)
    opt = oracle_opt_many(net, grid)
    phi_grid = np.empty((len(xs), t_grid_size))
    kinds = [_classify(net, float(x)) for x in xs]
    cache: dict = {}
    for k, key in enumerate(kinds):
        if key not in cache:
            kind, idx = key
            if kind == "vertex":
                cache[key] = ("v", oracle_phi_many(net, float(net.positions[idx]), grid))
            else:
                cache[key] = ("e", _edge_base(net, idx, grid))
        tag, data = cache[key]
        if tag == "v":
            phi_grid[k] = data
        else:
            x0, base, slope = data
            phi_grid[k] = base + slope * (xs[k] - x0)
    regret = phi_grid - opt[None, :]
    best_k = regret.argmax(axis=1)
    best = regret[np.arange(len(xs)), best_k]
    if refine_iters <= 0:
        return best
    todo = np.flatnonzero(best < refine_below)
    for start in range(0, len(todo), chunk):
        sel = todo[start : start + chunk]
        phi, _ = _phi_fn(net, xs[sel])

        def regret_at(ts, phi=phi):
            return phi(ts) - oracle_opt_many(net, ts)

        lo = grid[np.maximum(best_k[sel] - 1, 0)]
        hi = grid[np.minimum(best_k[sel] + 1, t_grid_size - 1)]
        c = hi - GOLDEN * (hi - lo)
        d = lo + GOLDEN * (hi - lo)
        fc, fd = regret_at(c), regret_at(d)
        top = np.maximum(best[sel], np.maximum(fc, fd))
        for _ in range(refine_iters - 1):
            left = fc >= fd  # maximum lies in [lo, d]
            hi = np.where(left, d, hi)
            lo = np.where(left, lo, c)
            probe = np.where(left, hi - GOLDEN * (hi - lo), lo + GOLDEN * (hi - lo))
            fp = regret_at(probe)
            c, d = np.where(left, probe, d), np.where(left, c, probe)
            fc, fd = np.where(left, fp, fd), np.where(left, fc, fp)
            top = np.maximum(top, fp)
        best[sel] = top
    return best


def oracle_mr(net: ParametricPathNetwork, x: float, t_grid_size: int = 10_000, refine_iters: int = 40) -> float:
    """Maximum regret of sink coordinate ``x`` by grid search plus golden-section polishing."""
    return float(oracle_mr_many(net, [x], t_grid_size, refine_iters)[0])


# -- discrete-time fluid simulation -----------------------------------------
#
# Cumulative flow curves live on the lattice of multiples of dt and are stored
# sparsely as breakpoints (k, value), linear in between and constant after the
# last one.  Each vertex queue releases at most capacity * dt per step; edge
# transit times are rounded to whole steps.  This is the usual time-stepped
# fluid model, but its cost grows with the number of events rather than 1/dt.


def _release(curve, supply, per_step):
    """Cumulative departures of a FIFO queue holding ``supply`` at time 0 and fed by ``curve``."""
    total = supply + curve[-1][1]
    out = [(0, 0.0)]
    m = 0.0  # running minimum of supply + arrivals(k) - per_step * k, floored at 0
    bounds = list(curve) + [(math.inf, curve[-1][1])]
    for (ka, va), (kb, vb) in zip(bounds[:-1], bounds[1:]):
        ga = supply + va - per_step * ka
        final = math.isinf(kb)
        slope = -per_step if final else (vb - va) / (kb - ka) - per_step
        if ga < m:
            if ka > out[-1][0]:
                out.append((ka, per_step * ka + ga))
            m = ga
        if slope >= 0:
            continue
        # first lattice step in (ka, kb] where g drops below the running minimum
        k_star = ka + math.floor((ga - m) / -slope) + 1
        if not final and k_star > kb:
            continue
        if k_star - 1 > out[-1][0]:
            out.append((k_star - 1, per_step * (k_star - 1) + m))
        if final:
            out.append((k_star, total))
            break
        out.append((k_star, per_step * k_star + ga + slope * (k_star - ka)))
        gb = ga + slope * (kb - ka)
        if kb > k_star:
            out.append((kb, per_step * kb + gb))
        m = gb
    return out


def _side_chain(net: ParametricPathNetwork, kind: str, idx: int, x: float):
    """Stages from the far end toward the sink: ``(vertex, link length, link capacity)``."""
    pos, caps = net.positions, net.capacities
    left, right = [], []
    last_left = idx - 1 if kind == "vertex" else idx
    for h in range(0, last_left + 1):
        nxt = pos[h + 1] if h < last_left else x
        left.append((h, nxt - pos[h], caps[h]))
    first_right = idx + 1
    for h in range(net.n - 1, first_right - 1, -1):
        nxt = pos[h - 1] if h > first_right else x
        edge = h - 1
        right.append((h, pos[h] - nxt, caps[edge]))
    return left, right


def _arrivals(net, chain, w, dt):
    curve = [(0, 0.0)]
    for h, length, cap in chain:
        dep = _release(curve, float(w[h]), cap * dt)
        shift = int(round(net.tau * length / dt))
        curve = [(0, 0.0)] + [(k + shift, v) for k, v in dep if k + shift > 0 or v == 0.0]
        curve = _dedupe(curve)
    return curve


def _dedupe(curve):
    out = [curve[0]]
    for k, v in curve[1:]:
        if k == out[-1][0]:
            out[-1] = (k, max(v, out[-1][1]))
        else:
            out.append((k, v))
    return out


def _finish_time(curve, total, dt):
    if total <= 0.0:
        return 0.0
    target = total * (1.0 - 1e-13)
    for (k0, v0), (k1, v1) in zip(curve[:-1], curve[1:]):
        if v1 >= target:
            if v1 == v0:
                return k0 * dt
            return (k0 + (target - v0) / (v1 - v0) * (k1 - k0)) * dt
    return curve[-1][0] * dt


def _area_above(curve, total, dt):
    """Integral over time of ``total - curve``, i.e. the summed arrival times."""
    acc = 0.0
    for (k0, v0), (k1, v1) in zip(curve[:-1], curve[1:]):
        acc += ((total - v0) + (total - v1)) * 0.5 * (k1 - k0)
    return acc * dt


def _sink_coords(net, sink):
    if hasattr(sink, "coordinate"):
        x = sink.coordinate(net)
    else:
        x = float(sink)
    kind, idx = _classify(net, x)
    if kind == "vertex":
        x = float(net.positions[idx])
    return kind, idx, x


def simulate_completion(net: ParametricPathNetwork, sink, t: float, dt: float) -> float:
    """Completion time of the time-stepped fluid evacuation to ``sink`` with step ``dt``.

    ``sink`` is a :class:`~mmrsink.evac.SinkLocation` or a coordinate.
    Returns 0 when there is no supply outside the sink.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    kind, idx, x = _sink_coords(net, sink)
    w = net.weights_at(t)
    best = 0.0
    for chain in _side_chain(net, kind, idx, x):
        if not chain:
            continue
        total = float(sum(w[h] for h, _, _ in chain))
        best = max(best, _finish_time(_arrivals(net, chain, w, dt), total, dt))
    return best


def simulate_aggregate(net: ParametricPathNetwork, sink, t: float, dt: float) -> float:
    """Summed arrival times of the time-stepped fluid evacuation (the aggregate time)."""
    if not dt > 0:
        raise ValueError("dt must be positive")
    kind, idx, x = _sink_coords(net, sink)
    w = net.weights_at(t)
    acc = 0.0
    for chain in _side_chain(net, kind, idx, x):
        if chain:
            total = float(sum(w[h] for h, _, _ in chain))
            acc += _area_above(_arrivals(net, chain, w, dt), total, dt)
    return acc


def _horizon_bound(net, t):
    w = net.weights_at(t)
    return net.tau * net.total_length + float(w.sum()) / min(net.capacities) + 1.0


def refine(simulate, net, sink, t, tol=1e-6, dt=None, max_halvings=24, settle=3):
    """Halve ``dt`` until ``settle`` successive results each differ by less than ``tol``.

    Rounding to whole steps makes the sequence move in plateaus, so a small
    difference alone is not trusted: each queue stage is off by at most about
    two steps, and refinement also continues until ``2 * n * dt`` is below
    ``tol`` relative to the result.
    """
    if dt is None:
        dt = _horizon_bound(net, t) / 1024.0
    prev = simulate(net, sink, t, dt)
    calm = 0
    change = math.inf
    for _ in range(max_halvings):
        dt *= 0.5
        cur = simulate(net, sink, t, dt)
        change = abs(cur - prev)
        calm = calm + 1 if change < tol else 0
        if calm >= settle and 2 * net.n * dt <= tol * max(1.0, abs(cur)):
            return cur
        prev = cur
    raise ConvergenceError(f"no convergence after {max_halvings} halvings (last change {change:.3g})")


def simulate_completion_refined(net, sink, t, tol=1e-6, dt=None, max_halvings=24) -> float:
    """Completion time with the step refined until it stops changing."""
    return refine(simulate_completion, net, sink, t, tol, dt, max_halvings)
