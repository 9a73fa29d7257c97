"""Aggregate evacuation times as piecewise quadratic functions of t.

On the left side of edge ``i`` vertex ``j`` (``0 <= j <= i``) contributes the
partially defined function

    f_j(t, z) = -tau v_j + (z - s_j(t)) / C_j,   s_j = W(j+1, i),  C_j = C(j, i),

for ``s_j(t) < z <= W(0, i)(t)``.  A farther vertex has a steeper line, so
vertex ``j`` beats every nearer one exactly for ``z > z_j(t)``, where ``z_j``
is the largest of its pairwise takeover points (clamped to the total supply).
The envelope realizer at ``z`` is then the smallest ``j`` with ``z_j(t) < z``,
and the realizer sequence only changes at breakpoints of some ``z_j``.

``compute_F`` therefore collects the breakpoints of every ``z_j`` as candidate
t-breakpoints, reads the realizers off at each candidate cell's midpoint, and
integrates the resulting trapezoids symbolically.  When two vertices share a
bottleneck capacity the realizers can also change where one ``z_j`` crosses
another without either having a breakpoint; such cells are detected by
comparing realizer status at the cell ends and split at the crossing.  The
right side is the left side of the mirrored network.
"""
from __future__ import annotations

import numpy as np

from .network import EPS_REL, LinearFn, ParametricPathNetwork
from .pwpoly import PiecewisePoly, QuadFn, lower_envelope, pw_add, upper_envelope

# Breakpoints of consecutive realizers may cross by this much (relative to the
# side's total supply) at a cell end before the cell is rejected.
ORDER_TOL = 1e-7


class NumericBreakdown(ArithmeticError):
    """The symbolic reconstruction became inconsistent on some t-subinterval."""

    def __init__(self, message, lo=None, hi=None):
        super().__init__(message)
        self.lo = lo
        self.hi = hi


class ZFunction:
    """A piecewise linear function of t stored as breakpoints plus per-piece lines."""

    def __init__(self, breaks, slopes, intercepts):
        self.breaks = np.asarray(breaks, dtype=float)
        self.slopes = np.asarray(slopes, dtype=float)
        self.intercepts = np.asarray(intercepts, dtype=float)

    def piece(self, t):
        k = np.searchsorted(self.breaks, t, side="right") - 1
        return np.clip(k, 0, len(self.slopes) - 1)

    def __call__(self, t):
        k = self.piece(t)
        return self.slopes[k] * t + self.intercepts[k]

    def line(self, k) -> LinearFn:
        return LinearFn(float(self.slopes[k]), float(self.intercepts[k]))

    def to_pwpoly(self) -> PiecewisePoly:
        coefs = np.column_stack([np.zeros(len(self.slopes)), self.slopes, self.intercepts])
        return PiecewisePoly(self.breaks, coefs)


def _left_data(net: ParametricPathNetwork, edge: int):
    """Per-vertex data of the left side of ``edge``: start lines, capacities, positions, total."""
    if not 0 <= edge < net.n - 1:
        raise IndexError(f"edge {edge} out of range for {net.n - 1} edges")
    m = edge + 1
    a = np.asarray(net.a[:m])
    b = np.asarray(net.b[:m])
    # s_j = W(j+1, edge): suffix sums excluding j
    sa = np.concatenate([np.cumsum(a[::-1])[::-1][1:], [0.0]])
    sb = np.concatenate([np.cumsum(b[::-1])[::-1][1:], [0.0]])
    caps = np.minimum.accumulate(np.asarray(net.capacities[:m])[::-1])[::-1]
    total = LinearFn(float(b.sum()), float(a.sum()))
    return sa, sb, caps, np.asarray(net.positions[:m]), total


def _halfline(slope, icpt, t_lo, t_hi, tol):
    """The part of [t_lo, t_hi] where ``slope * t + icpt <= tol``, as (lo, hi) arrays."""
    lo = np.full(np.shape(slope), t_lo)
    hi = np.full(np.shape(slope), t_hi)
    flat = np.abs(slope) * max(1.0, abs(t_lo), abs(t_hi)) <= tol
    with np.errstate(divide="ignore", invalid="ignore"):
        root = -icpt / slope
    up = ~flat & (slope > 0)
    down = ~flat & (slope < 0)
    hi = np.where(up, np.minimum(hi, root), hi)
    lo = np.where(down, np.maximum(lo, root), lo)
    never = flat & (icpt > tol)
    lo = np.where(never, np.inf, lo)
    hi = np.where(never, -np.inf, hi)
    return lo, hi


def _takeover_lines(net: ParametricPathNetwork, edge: int):
    """Lines in t whose maximum (before clamping) is ``z_j``, plus equal-capacity blockers.

    Returns ``(S, I, valid, G_S, G_I, G_valid, data)`` where row ``j`` of
    ``S, I`` holds the takeover lines of vertex ``j`` (column ``m`` is its own
    domain start ``s_j``) and row ``j`` of ``G`` holds the lines whose
    positivity means an equal-capacity nearer vertex beats ``j`` outright.
    """
    sa, sb, caps, pos, total = _left_data(net, edge)
    tau = net.tau
    m = edge + 1
    jj, kk = np.meshgrid(np.arange(m), np.arange(m), indexing="ij")
    nearer = kk > jj
    cj, ck = caps[jj], caps[kk]
    steeper = nearer & (cj < ck)
    equal = nearer & (cj == ck)
    with np.errstate(divide="ignore", invalid="ignore"):
        denom = 1.0 / cj - 1.0 / ck
        # f_j = f_k at z*: z (1/C_j - 1/C_k) = tau (v_j - v_k) + s_j / C_j - s_k / C_k
        zs = (sb[jj] / cj - sb[kk] / ck) / denom
        zi = (tau * (pos[jj] - pos[kk]) + sa[jj] / cj - sa[kk] / ck) / denom
    S = np.where(steeper, zs, 0.0)
    I = np.where(steeper, zi, 0.0)
    S = np.concatenate([S, sb[:, None]], axis=1)
    I = np.concatenate([I, sa[:, None]], axis=1)
    valid = np.concatenate([steeper, np.ones((m, 1), dtype=bool)], axis=1)
    # nearer k with the same capacity beats j everywhere when
    # W(j+1, k) / C - tau (v_k - v_j) > 0, with W(j+1, k) = s_j - s_k
    GS = np.where(equal, (sb[jj] - sb[kk]) / cj, 0.0)
    GI = np.where(equal, (sa[jj] - sa[kk]) / cj - tau * (pos[kk] - pos[jj]), 0.0)
    return S, I, valid, GS, GI, equal, (sa, sb, caps, pos, total)


def _upper_hull_walk(S, I, valid, lo, hi, tol):
    """Upper envelope of the valid lines of each row over ``[lo[j], hi[j]]``.

    Returns per row a list of ``(t_start, column)``; rows with ``lo > hi``
    get an empty list.
    """
    rows = S.shape[0]
    out = [[] for _ in range(rows)]
    live = lo <= hi
    if not np.any(live):
        return out
    r = np.flatnonzero(live)
    S, I, valid = S[r], I[r], valid[r]
    lo, hi = lo[r], hi[r]
    ninf = -np.inf
    vals = np.where(valid, S * lo[:, None] + I, ninf)
    vmax = vals.max(axis=1)
    near = vals >= vmax[:, None] - tol * np.maximum(1.0, np.abs(vmax))[:, None]
    cur = np.where(near, S, ninf).argmax(axis=1)
    t_cur = lo.copy()
    for k, row in enumerate(r):
        out[row].append((float(lo[k]), int(cur[k])))
    active = np.ones(len(r), dtype=bool)
    idx = np.arange(len(r))
    while np.any(active):
        a = idx[active]
        sc = S[a, cur[a]][:, None]
        ic = I[a, cur[a]][:, None]
        cand = valid[a] & (S[a] > sc)
        with np.errstate(divide="ignore", invalid="ignore"):
            tc = np.where(cand, (ic - I[a]) / (S[a] - sc), np.inf)
        tc = np.maximum(tc, t_cur[a][:, None])
        tmin = tc.min(axis=1)
        done = tmin >= hi[a] - tol * np.maximum(1.0, np.abs(hi[a]))
        step = ~done
        if np.any(step):
            b = a[step]
            tcb = tc[step]
            tie = tcb <= tmin[step][:, None] + tol * np.maximum(1.0, np.abs(tmin[step]))[:, None]
            nxt = np.where(tie, S[b], ninf).argmax(axis=1)
            cur[b] = nxt
            t_cur[b] = tmin[step]
            for k, c in zip(b, nxt):
                out[r[k]].append((float(t_cur[k]), int(c)))
        active[a[done]] = False
    return out


def _z_functions(net: ParametricPathNetwork, edge: int):
    """All ``z_j`` of the left side of ``edge`` as :class:`ZFunction` objects."""
    S, I, valid, GS, GI, gvalid, data = _takeover_lines(net, edge)
    sa, sb, caps, pos, total = data
    t_lo, t_hi = net.t_lo, net.t_hi
    m = edge + 1
    scale_t = max(1.0, abs(t_lo), abs(t_hi))
    tol_z = EPS_REL * max(1.0, abs(total(t_lo)), abs(total(t_hi)))
    # z_j is the total wherever some takeover line exceeds it
    lo = np.full(m, t_lo)
    hi = np.full(m, t_hi)
    for col in range(m + 1):
        dl, dh = _halfline(S[:, col] - total.slope, I[:, col] - total.intercept, t_lo, t_hi, tol_z)
        lo = np.where(valid[:, col], np.maximum(lo, dl), lo)
        hi = np.where(valid[:, col], np.minimum(hi, dh), hi)
    # ... or wherever an equal-capacity nearer vertex dominates
    for col in range(m):
        if not np.any(gvalid[:, col]):
            continue
        gl, gh = _halfline(GS[:, col], GI[:, col], t_lo, t_hi, tol_z / np.min(caps))
        lo = np.where(gvalid[:, col], np.maximum(lo, gl), lo)
        hi = np.where(gvalid[:, col], np.minimum(hi, gh), hi)
    # collapse intervals that are empty or thinner than the tolerance
    thin = hi - lo <= EPS_REL * scale_t
    lo = np.where(thin, np.inf, lo)
    hi = np.where(thin, -np.inf, hi)
    walks = _upper_hull_walk(S, I, valid, lo, hi, EPS_REL)
    zfs = []
    for j in range(m):
        breaks, slopes, icpts = [t_lo], [], []
        walk = walks[j]
        if walk:
            if lo[j] > t_lo:
                slopes.append(total.slope)
                icpts.append(total.intercept)
                breaks.append(lo[j])
            for k, (start, col) in enumerate(walk):
                if k > 0:
                    breaks.append(start)
                slopes.append(S[j, col])
                icpts.append(I[j, col])
            if hi[j] < t_hi:
                breaks.append(hi[j])
                slopes.append(total.slope)
                icpts.append(total.intercept)
        else:
            slopes.append(total.slope)
            icpts.append(total.intercept)
        breaks.append(t_hi)
        zfs.append(ZFunction(breaks, slopes, icpts))
    return zfs, data


def z_breakpoint_envelope(net: ParametricPathNetwork, edge: int, side: str, j: int) -> PiecewisePoly:
    """``z_j(t)``: the supply level beyond which vertex ``j`` realizes the side envelope.

    Built with the generic envelope engine from the pairwise takeover
    segments (useful as a cross-check of the vectorized construction used by
    :func:`compute_F`).  For the right side, ``j`` indexes the mirrored
    network's left side of the mirrored edge.
    """
    if side == "R":
        net, edge, j = net.mirrored(), net.n - 2 - edge, net.n - 1 - j
    elif side != "L":
        raise ValueError(f"side must be 'L' or 'R', got {side!r}")
    if not 0 <= j <= edge:
        raise IndexError(f"vertex {j} not on this side of edge {edge}")
    S, I, valid, GS, GI, gvalid, data = _takeover_lines(net, edge)
    total = data[4]
    t_lo, t_hi = net.t_lo, net.t_hi
    segs = [((0.0, S[j, c], I[j, c]), (t_lo, t_hi)) for c in np.flatnonzero(valid[j])]
    env = upper_envelope(segs, domain=(t_lo, t_hi))
    tot = PiecewisePoly.from_quad(QuadFn(0.0, total.slope, total.intercept), t_lo, t_hi)
    clamped = lower_envelope([env, tot], domain=(t_lo, t_hi))
    # equal-capacity nearer vertices that dominate j push z_j to the total
    blocked = []
    for c in np.flatnonzero(gvalid[j]):
        s, i0 = GS[j, c], GI[j, c]
        if s == 0.0:
            if i0 > 0:
                blocked.append((t_lo, t_hi))
        else:
            root = -i0 / s
            lo, hi = (root, t_hi) if s > 0 else (t_lo, root)
            lo, hi = max(lo, t_lo), min(hi, t_hi)
            if lo < hi:
                blocked.append((lo, hi))
    if not blocked:
        return clamped
    big = 1.0 + abs(total(t_lo)) + abs(total(t_hi))
    fs = [clamped] + [((0.0, total.slope, total.intercept + big), iv) for iv in blocked]
    bumped = upper_envelope(fs, domain=(t_lo, t_hi))
    return lower_envelope([bumped, tot], domain=(t_lo, t_hi))


def _dedupe(ts, t_lo, t_hi):
    ts = np.unique(np.clip(np.asarray(ts, dtype=float), t_lo, t_hi))
    width = EPS_REL * (t_hi - t_lo)
    keep = [t_lo]
    for t in ts:
        if t - keep[-1] > width:
            keep.append(float(t))
    if t_hi - keep[-1] <= width:
        keep[-1] = t_hi
    else:
        keep.append(t_hi)
    return np.asarray(keep)


def _records(z, w, tol):
    """Realizer masks: ``j`` realizes iff ``z_j`` is below the total and below every farther ``z``."""
    K = z.shape[0]
    prefix = np.concatenate([np.full((K, 1), np.inf), np.minimum.accumulate(z, axis=1)[:, :-1]], axis=1)
    bound = np.minimum(prefix, w[:, None])
    return z - bound, prefix


def _competitor(z, prefix, w, ZS, ZI, total):
    """Line of whatever ``z_j`` is compared against: the nearest-to-win farther ``z``, or the total."""
    K, m = z.shape
    # index of the farther vertex attaining the prefix minimum
    arg = np.zeros((K, m), dtype=int)
    best = np.full(K, np.inf)
    where = np.zeros(K, dtype=int)
    for j in range(1, m):
        better = z[:, j - 1] < best
        best = np.where(better, z[:, j - 1], best)
        where = np.where(better, j - 1, where)
        arg[:, j] = where
    rows = np.arange(K)[:, None]
    use_total = prefix >= w[:, None]
    cS = np.where(use_total, total.slope, ZS[rows, arg])
    cI = np.where(use_total, total.intercept, ZI[rows, arg])
    return cS, cI


def _cell_lines(zfs, mids, m):
    K = len(mids)
    ZS = np.empty((K, m))
    ZI = np.empty((K, m))
    for j, z in enumerate(zfs):
        k = z.piece(mids)
        ZS[:, j] = z.slopes[k]
        ZI[:, j] = z.intercepts[k]
    return ZS, ZI


def _split_points(grid, ZS, ZI, rec, total):
    """Times inside cells where a vertex enters or leaves the realizer sequence.

    The candidate breakpoints miss such events when bottleneck capacities
    tie; they show up as a realizer status at a cell end that contradicts
    the status at the midpoint.
    """
    extra = []
    for ends in (grid[:-1], grid[1:]):
        z = ZS * ends[:, None] + ZI
        w = total(ends)
        tol = EPS_REL * np.maximum(1.0, np.abs(w))[:, None]
        margin, prefix = _records(z, w, tol)
        bad = (rec & (margin > tol)) | (~rec & (margin < -tol))
        if not np.any(bad):
            continue
        k, j = np.nonzero(bad)
        cS, cI = _competitor(z, prefix, w, ZS, ZI, total)
        ds = ZS[k, j] - cS[k, j]
        di = ZI[k, j] - cI[k, j]
        with np.errstate(divide="ignore", invalid="ignore"):
            root = -di / ds
        inside = (root > grid[k]) & (root < grid[k + 1])
        extra.append(root[inside])
        # no usable crossing: fall back to halving the cell
        extra.append(0.5 * (grid[k] + grid[k + 1])[~inside])
    return np.concatenate(extra) if extra else np.empty(0)


def _left_F(net: ParametricPathNetwork, edge: int, max_rounds: int = 60) -> PiecewisePoly:
    zfs, (sa, sb, caps, pos, total) = _z_functions(net, edge)
    t_lo, t_hi = net.t_lo, net.t_hi
    m = edge + 1
    grid = _dedupe(np.concatenate([z.breaks for z in zfs]), t_lo, t_hi)
    for _ in range(max_rounds):
        mids = 0.5 * (grid[1:] + grid[:-1])
        ZS, ZI = _cell_lines(zfs, mids, m)
        zmid = ZS * mids[:, None] + ZI
        wmid = total(mids)
        tol = EPS_REL * np.maximum(1.0, np.abs(wmid))[:, None]
        rec = _records(zmid, wmid, tol)[0] < -tol
        extra = _split_points(grid, ZS, ZI, rec, total)
        if len(extra) == 0:
            break
        refined = _dedupe(np.concatenate([grid, extra]), t_lo, t_hi)
        if len(refined) == len(grid):
            break
        grid = refined
    else:
        raise NumericBreakdown(f"realizer sequence did not stabilize on edge {edge}")
    K = len(mids)
    marks = np.where(rec, np.arange(m)[None, :], -1)
    upto = np.maximum.accumulate(marks, axis=1)
    first = upto[:, -1]
    nxt = np.concatenate([np.full((K, 1), -1), upto[:, :-1]], axis=1)
    rows = np.arange(K)[:, None]
    # nearest realizer starts at z = 0
    is_first = np.arange(m)[None, :] == first[:, None]
    aS = np.where(is_first, 0.0, ZS)
    aI = np.where(is_first, 0.0, ZI)
    has_next = nxt >= 0
    nidx = np.maximum(nxt, 0)
    bS = np.where(has_next, ZS[rows, nidx], total.slope)
    bI = np.where(has_next, ZI[rows, nidx], total.intercept)
    # consecutive breakpoints must stay ordered up to both cell ends
    for ends in (grid[:-1], grid[1:]):
        A = aS * ends[:, None] + aI
        B = bS * ends[:, None] + bI
        gap = np.where(rec, A - B, -np.inf).max(axis=1)
        scale = np.maximum(1.0, np.abs(total(ends)))
        bad = np.flatnonzero(gap > ORDER_TOL * scale)
        if len(bad):
            k = int(bad[0])
            raise NumericBreakdown(
                f"realizer breakpoints out of order on edge {edge} for t in "
                f"[{float(grid[k])!r}, {float(grid[k + 1])!r}] (overlap {gap[k]:.3g})",
                float(grid[k]),
                float(grid[k + 1]),
            )
    inv = 1.0 / caps[None, :]
    kS = -sb[None, :] * inv
    kI = -net.tau * pos[None, :] - sa[None, :] * inv
    # integral over [A, B] of z / C + kappa(t): (B^2 - A^2) / (2C) + kappa (B - A)
    q2 = 0.5 * inv * (bS * bS - aS * aS) + kS * (bS - aS)
    q1 = inv * (bS * bI - aS * aI) + kS * (bI - aI) + kI * (bS - aS)
    q0 = 0.5 * inv * (bI * bI - aI * aI) + kI * (bI - aI)
    coefs = np.stack([np.where(rec, q, 0.0).sum(axis=1) for q in (q2, q1, q0)], axis=1)
    return PiecewisePoly(grid, coefs)


def compute_F(net: ParametricPathNetwork, edge: int, side: str, mirror=None) -> PiecewisePoly:
    """``F`` of one side of ``edge``: the integral over supply of arrival times minus the sink term.

    ``mirror`` may pass a precomputed ``net.mirrored()`` for the right side.
    """
    if not 0 <= edge < net.n - 1:
        raise IndexError(f"edge {edge} out of range for {net.n - 1} edges")
    if side == "L":
        return _left_F(net, edge)
    if side != "R":
        raise ValueError(f"side must be 'L' or 'R', got {side!r}")
    mirror = net.mirrored() if mirror is None else mirror
    f = _left_F(mirror, net.n - 2 - edge)
    # the mirrored coordinate is v_{n-1} - v, which shifts every line by tau v_{n-1}
    w = net.prefix_weight(edge + 1, net.n - 1)
    shift = net.tau * net.total_length
    return f.add_quad(QuadFn(0.0, shift * w.slope, shift * w.intercept))


def compute_all_F(net: ParametricPathNetwork):
    """``(F_L, F_R)`` lists indexed by edge."""
    mirror = net.mirrored()
    left = [_left_F(net, i) for i in range(net.n - 1)]
    right = [compute_F(net, i, "R", mirror) for i in range(net.n - 1)]
    return left, right


def _linear_piece(net, fn: LinearFn) -> PiecewisePoly:
    return PiecewisePoly.from_quad(QuadFn(0.0, fn.slope, fn.intercept), net.t_lo, net.t_hi)


def phi_at_vertex(net: ParametricPathNetwork, k: int, F=None) -> PiecewisePoly:
    """``Phi(v_k, t)`` as a piecewise quadratic in t; ``F`` may pass ``compute_all_F(net)``."""
    if not 0 <= k < net.n:
        raise IndexError(f"vertex {k} out of range")
    v = float(net.positions[k])
    diff = LinearFn()
    if k > 0:
        diff = diff + net.prefix_weight(0, k - 1)
    if k < net.n - 1:
        diff = diff - net.prefix_weight(k + 1, net.n - 1)
    out = _linear_piece(net, diff.scale(net.tau * v))
    if k > 0:
        out = pw_add(out, F[0][k - 1] if F else compute_F(net, k - 1, "L"))
    if k < net.n - 1:
        out = pw_add(out, F[1][k] if F else compute_F(net, k, "R"))
    return out


def compute_opt(net: ParametricPathNetwork, phis=None) -> PiecewisePoly:
    """``Opt(t) = min_k Phi(v_k, t)``; piece tags name the minimizing vertex."""
    if phis is None:
        F = compute_all_F(net)
        phis = [phi_at_vertex(net, k, F) for k in range(net.n)]
    return lower_envelope(phis, domain=(net.t_lo, net.t_hi))
