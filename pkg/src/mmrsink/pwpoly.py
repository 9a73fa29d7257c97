"""Piecewise polynomials of degree at most two, and envelopes of partial ones.

A :class:`PiecewisePoly` stores ``m + 1`` increasing breakpoints and an
``(m, 3)`` coefficient array ``[a2, a1, a0]`` per piece, plus optional piece
tags naming the source function of each piece (the envelope sequence).

Envelopes are built by divide and conquer: the family is merged pairwise,
and each merge sweeps the union of both breakpoint sets, splitting every
shared cell at the real roots of the difference of the two active pieces.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence

import numpy as np

from .network import EPS_REL


@dataclass(frozen=True)
class QuadFn:
    """``a2 * y**2 + a1 * y + a0``."""

    a2: float = 0.0
    a1: float = 0.0
    a0: float = 0.0

    def __call__(self, y):
        return (self.a2 * y + self.a1) * y + self.a0

    @property
    def coefs(self) -> tuple:
        return (self.a2, self.a1, self.a0)

    def __add__(self, other: "QuadFn") -> "QuadFn":
        return QuadFn(self.a2 + other.a2, self.a1 + other.a1, self.a0 + other.a0)

    def __sub__(self, other: "QuadFn") -> "QuadFn":
        return QuadFn(self.a2 - other.a2, self.a1 - other.a1, self.a0 - other.a0)

    def __neg__(self) -> "QuadFn":
        return QuadFn(-self.a2, -self.a1, -self.a0)

    def scale(self, k: float) -> "QuadFn":
        return QuadFn(k * self.a2, k * self.a1, k * self.a0)

    @property
    def degree(self) -> int:
        if self.a2 != 0.0:
            return 2
        return 1 if self.a1 != 0.0 else 0


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float
    lo_closed: bool = True
    hi_closed: bool = True

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"interval with lo={self.lo} > hi={self.hi}")

    @property
    def is_empty(self) -> bool:
        if self.lo < self.hi:
            return False
        return not (self.lo_closed and self.hi_closed)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def __contains__(self, y: float) -> bool:
        above = y >= self.lo if self.lo_closed else y > self.lo
        below = y <= self.hi if self.hi_closed else y < self.hi
        return above and below


def _tol(*ys: float) -> float:
    return EPS_REL * max(1.0, *(abs(y) for y in ys))


def _eval(c, y):
    return (c[0] * y + c[1]) * y + c[2]


def quad_roots(a2: float, a1: float, a0: float) -> list:
    """Real roots of ``a2 y^2 + a1 y + a0``, using the cancellation-free pairing."""
    if a2 == 0.0:
        if a1 == 0.0:
            return []
        return [-a0 / a1]
    disc = a1 * a1 - 4.0 * a2 * a0
    if disc < 0.0:
        # treat a slightly negative discriminant as a tangency
        if disc > -1e-12 * (a1 * a1 + abs(4.0 * a2 * a0)):
            return [-a1 / (2.0 * a2)]
        return []
    sq = math.sqrt(disc)
    q = -0.5 * (a1 + math.copysign(sq, a1))
    if q == 0.0:
        return [0.0]
    r1, r2 = q / a2, a0 / q
    return [r1, r2] if r1 <= r2 else [r2, r1]


class PiecewisePoly:
    """A maximal piecewise polynomial of degree at most two on a closed interval."""

    __slots__ = ("breaks", "coefs", "tags")

    def __init__(self, breaks, coefs, tags=None, maximalize=True):
        breaks = np.asarray(breaks, dtype=float)
        coefs = np.asarray(coefs, dtype=float).reshape(-1, 3)
        if len(breaks) != len(coefs) + 1 or len(coefs) == 0:
            raise ValueError("need m+1 breakpoints for m >= 1 pieces")
        if np.any(np.diff(breaks) < 0):
            raise ValueError("breakpoints must be nondecreasing")
        self.breaks = breaks
        self.coefs = coefs
        self.tags = None if tags is None else tuple(tags)
        if maximalize:
            self._maximalize()

    # -- construction -------------------------------------------------
    @classmethod
    def constant(cls, value: float, lo: float, hi: float) -> "PiecewisePoly":
        return cls([lo, hi], [[0.0, 0.0, value]])

    @classmethod
    def from_quad(cls, q: QuadFn, lo: float, hi: float, tag=None) -> "PiecewisePoly":
        return cls([lo, hi], [q.coefs], None if tag is None else [tag])

    @classmethod
    def from_pieces(cls, pieces: Sequence, tags=None) -> "PiecewisePoly":
        """From ``[(coefs, lo, hi), ...]`` ordered and contiguous."""
        breaks = [pieces[0][1]] + [p[2] for p in pieces]
        return cls(breaks, [p[0] for p in pieces], tags)

    def _maximalize(self) -> None:
        m = len(self.coefs)
        if m == 1:
            return
        keep_b = [self.breaks[0]]
        keep_c = [self.coefs[0]]
        keep_t = [self.tags[0]] if self.tags is not None else None
        for k in range(1, m):
            lo = keep_b[-1]
            hi = self.breaks[k + 1]
            if same_poly(keep_c[-1], self.coefs[k], lo, hi):
                continue
            keep_b.append(self.breaks[k])
            keep_c.append(self.coefs[k])
            if keep_t is not None:
                keep_t.append(self.tags[k])
        keep_b.append(self.breaks[-1])
        if len(keep_c) != m:
            self.breaks = np.asarray(keep_b)
            self.coefs = np.asarray(keep_c)
            self.tags = None if keep_t is None else tuple(keep_t)

    # -- queries -------------------------------------------------------
    @property
    def domain(self) -> Interval:
        return Interval(float(self.breaks[0]), float(self.breaks[-1]))

    @property
    def n_pieces(self) -> int:
        return len(self.coefs)

    def __len__(self) -> int:
        return len(self.coefs)

    def piece_index(self, y):
        idx = np.searchsorted(self.breaks, y, side="right") - 1
        return np.clip(idx, 0, len(self.coefs) - 1)

    def __call__(self, y):
        y_arr = np.asarray(y, dtype=float)
        c = self.coefs[self.piece_index(y_arr)]
        out = (c[..., 0] * y_arr + c[..., 1]) * y_arr + c[..., 2]
        return float(out) if out.ndim == 0 else out

    def pieces(self) -> Iterator[tuple]:
        """Yield ``(QuadFn, Interval, tag)`` left to right."""
        for k, c in enumerate(self.coefs):
            tag = self.tags[k] if self.tags is not None else None
            yield (
                QuadFn(*map(float, c)),
                Interval(float(self.breaks[k]), float(self.breaks[k + 1])),
                tag,
            )

    def interior_breakpoints(self) -> np.ndarray:
        return self.breaks[1:-1]

    # -- algebra -------------------------------------------------------
    def __neg__(self) -> "PiecewisePoly":
        return PiecewisePoly(self.breaks, -self.coefs, self.tags, maximalize=False)

    def scale(self, k: float) -> "PiecewisePoly":
        if k == 0:
            return PiecewisePoly.constant(0.0, self.breaks[0], self.breaks[-1])
        return PiecewisePoly(self.breaks, k * self.coefs, self.tags, maximalize=False)

    def add_quad(self, q: QuadFn) -> "PiecewisePoly":
        """Add one polynomial to every piece."""
        return PiecewisePoly(self.breaks, self.coefs + np.asarray(q.coefs), self.tags)

    def __add__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return pw_add(self, other)

    def __sub__(self, other: "PiecewisePoly") -> "PiecewisePoly":
        return pw_add(self, -other)

    def restrict(self, lo: float, hi: float) -> "PiecewisePoly":
        if lo < self.breaks[0] - _tol(lo) or hi > self.breaks[-1] + _tol(hi) or lo > hi:
            raise ValueError(f"[{lo}, {hi}] not inside domain {self.domain}")
        k0 = int(self.piece_index(lo))
        k1 = int(np.searchsorted(self.breaks, hi, side="left")) - 1
        k1 = min(max(k1, k0), len(self.coefs) - 1)
        breaks = np.concatenate([[lo], self.breaks[k0 + 1 : k1 + 1], [hi]])
        tags = None if self.tags is None else self.tags[k0 : k1 + 1]
        return PiecewisePoly(breaks, self.coefs[k0 : k1 + 1], tags, maximalize=False)

    def __repr__(self) -> str:
        return f"PiecewisePoly({self.n_pieces} pieces on [{self.breaks[0]:g}, {self.breaks[-1]:g}])"


def same_poly(c1, c2, lo: float, hi: float) -> bool:
    """Whether two quadratics agree on ``[lo, hi]`` within tolerance.

    Three samples determine a quadratic, so agreement at both ends and the
    midpoint bounds the difference on the whole cell.
    """
    if c1[0] == c2[0] and c1[1] == c2[1] and c1[2] == c2[2]:
        return True
    mid = 0.5 * (lo + hi)
    for y in (lo, mid, hi):
        u, v = _eval(c1, y), _eval(c2, y)
        if abs(u - v) > EPS_REL * (1.0 + max(abs(u), abs(v))):
            return False
    return True


# Instrumentation for the piece-count bound of pointwise sums.
class AddCounter:
    """Records ``(m, m', result)`` for every :func:`pw_add` call while active."""

    def __init__(self):
        self.calls = 0
        self.violations = []

    def record(self, m: int, mp: int, res: int) -> None:
        self.calls += 1
        if res > m + mp:
            self.violations.append((m, mp, res))


_add_counters: list = []


class track_additions:
    """Context manager yielding an :class:`AddCounter`."""

    def __enter__(self) -> AddCounter:
        self.counter = AddCounter()
        _add_counters.append(self.counter)
        return self.counter

    def __exit__(self, *exc) -> None:
        _add_counters.remove(self.counter)


def pw_add(f: PiecewisePoly, g: PiecewisePoly) -> PiecewisePoly:
    """Pointwise sum over the common refinement, in time linear in the piece counts."""
    f_lo, f_hi = f.breaks[0], f.breaks[-1]
    g_lo, g_hi = g.breaks[0], g.breaks[-1]
    if abs(f_lo - g_lo) > _tol(f_lo, g_lo) or abs(f_hi - g_hi) > _tol(f_hi, g_hi):
        raise ValueError(f"domains differ: {f.domain} vs {g.domain}")
    fb, gb = f.breaks, g.breaks
    breaks = [f_lo]
    coefs = []
    i = j = 0
    mf, mg = len(f.coefs), len(g.coefs)
    while i < mf and j < mg:
        end_f = fb[i + 1] if i + 1 < mf else f_hi
        end_g = gb[j + 1] if j + 1 < mg else f_hi
        end = min(end_f, end_g)
        coefs.append(f.coefs[i] + g.coefs[j])
        breaks.append(end)
        tol = _tol(end)
        if end_f <= end + tol:
            i += 1
        if end_g <= end + tol:
            j += 1
    breaks[-1] = f_hi
    # drop slivers left by near-coincident breakpoints
    b_out, c_out = [breaks[0]], []
    for k, c in enumerate(coefs):
        if breaks[k + 1] - b_out[-1] <= _tol(breaks[k + 1]) and k + 1 < len(coefs):
            continue
        c_out.append(c)
        b_out.append(breaks[k + 1])
    h = PiecewisePoly(b_out, c_out)
    for counter in _add_counters:
        counter.record(mf, mg, h.n_pieces)
    return h


# -- envelopes -------------------------------------------------------------
# Internal piece representation: (lo, hi, a2, a1, a0, tag), sorted, disjoint.


def _merge_upper(A: list, B: list) -> list:
    pts = sorted({p[0] for p in A} | {p[1] for p in A} | {p[0] for p in B} | {p[1] for p in B})
    kept = [pts[0]]
    for p in pts[1:]:
        if p - kept[-1] > _tol(p):
            kept.append(p)
        elif p == pts[-1]:
            kept[-1] = p
    out: list = []
    ia = ib = 0
    na, nb = len(A), len(B)
    for k in range(len(kept) - 1):
        x0, x1 = kept[k], kept[k + 1]
        t0, t1 = _tol(x0), _tol(x1)
        while ia < na and A[ia][1] < x1 - t1:
            ia += 1
        while ib < nb and B[ib][1] < x1 - t1:
            ib += 1
        pa = A[ia] if ia < na and A[ia][0] <= x0 + t0 else None
        pb = B[ib] if ib < nb and B[ib][0] <= x0 + t0 else None
        if pa is None and pb is None:
            continue
        if pb is None:
            _emit(out, x0, x1, pa)
            continue
        if pa is None:
            _emit(out, x0, x1, pb)
            continue
        d2, d1, d0 = pa[2] - pb[2], pa[3] - pb[3], pa[4] - pb[4]
        cuts = [x0]
        for r in quad_roots(d2, d1, d0):
            if x0 + t0 < r < x1 - t1 and r - cuts[-1] > _tol(r):
                cuts.append(r)
        cuts.append(x1)
        for s0, s1 in zip(cuts[:-1], cuts[1:]):
            _emit(out, s0, s1, _winner(pa, pb, s0, s1))
    return out


def _winner(pa, pb, s0, s1):
    mid = 0.5 * (s0 + s1)
    tie = True
    for y in (s0, mid, s1):
        u = (pa[2] * y + pa[3]) * y + pa[4]
        v = (pb[2] * y + pb[3]) * y + pb[4]
        if abs(u - v) > EPS_REL * (1.0 + max(abs(u), abs(v))):
            tie = False
            break
    if tie:
        return pa if pa[5] <= pb[5] else pb
    u = (pa[2] * mid + pa[3]) * mid + pa[4]
    v = (pb[2] * mid + pb[3]) * mid + pb[4]
    return pa if u >= v else pb


def _emit(out: list, x0: float, x1: float, p) -> None:
    if out:
        last = out[-1]
        if last[5] == p[5] and last[2:5] == p[2:5] and abs(last[1] - x0) <= _tol(x0):
            out[-1] = (last[0], x1) + last[2:]
            return
    out.append((x0, x1) + tuple(p[2:]))


def _as_leaves(fs) -> list:
    leaves = []
    for tag, item in enumerate(fs):
        if isinstance(item, PiecewisePoly):
            pieces = [
                (float(item.breaks[k]), float(item.breaks[k + 1]), *map(float, item.coefs[k]), tag)
                for k in range(item.n_pieces)
                if item.breaks[k + 1] > item.breaks[k]
            ]
            if pieces:
                leaves.append(pieces)
            continue
        q, dom = item
        if isinstance(dom, Interval):
            lo, hi = dom.lo, dom.hi
        else:
            lo, hi = dom
        if not hi > lo:
            continue  # empty or single-point domain
        if not isinstance(q, QuadFn):
            q = QuadFn(*q)
        leaves.append([(float(lo), float(hi), q.a2, q.a1, q.a0, tag)])
    return leaves


def _envelope(fs, upper: bool, domain=None) -> PiecewisePoly:
    fs = list(fs)
    if not fs:
        raise ValueError("envelope of an empty family")
    leaves = _as_leaves(fs)
    if not leaves:
        raise ValueError("every function in the family has an empty domain")
    if not upper:
        leaves = [[(p[0], p[1], -p[2], -p[3], -p[4], p[5]) for p in leaf] for leaf in leaves]
    while len(leaves) > 1:
        merged = [_merge_upper(leaves[k], leaves[k + 1]) for k in range(0, len(leaves) - 1, 2)]
        if len(leaves) % 2:
            merged.append(leaves[-1])
        leaves = merged
    pieces = leaves[0]
    lo = pieces[0][0] if domain is None else domain[0]
    hi = pieces[-1][1] if domain is None else domain[1]
    if pieces[0][0] > lo + _tol(lo) or pieces[-1][1] < hi - _tol(hi):
        raise ValueError(f"domain [{lo}, {hi}] is not covered by the family")
    breaks = [lo]
    coefs, tags = [], []
    for p in pieces:
        if p[1] <= lo or p[0] >= hi:
            continue
        if p[0] > breaks[-1] + _tol(p[0]):
            raise ValueError(f"no function is defined on ({breaks[-1]}, {p[0]})")
        breaks.append(min(p[1], hi))
        coefs.append(p[2:5])
        tags.append(p[5])
    breaks[-1] = hi
    coefs = np.asarray(coefs)
    if not upper:
        coefs = -coefs
    return PiecewisePoly(breaks, coefs, tags)


def upper_envelope(fs: Iterable, domain=None) -> PiecewisePoly:
    """Pointwise maximum of partially defined quadratics.

    ``fs`` holds ``(QuadFn | (a2, a1, a0), Interval | (lo, hi))`` pairs or whole
    :class:`PiecewisePoly` objects; piece tags of the result are positions in
    ``fs``.  Functions with empty domains are dropped.  The result covers
    ``domain`` (default: the union of the input domains), which must have no
    gaps.
    """
    return _envelope(fs, True, domain)


def lower_envelope(fs: Iterable, domain=None) -> PiecewisePoly:
    """Pointwise minimum; see :func:`upper_envelope`."""
    return _envelope(fs, False, domain)


def _extremum(f: PiecewisePoly, over, sign: float):
    lo, hi = (over.lo, over.hi) if isinstance(over, Interval) else over
    if lo < f.breaks[0] - _tol(lo) or hi > f.breaks[-1] + _tol(hi) or lo > hi:
        raise ValueError(f"[{lo}, {hi}] is outside the domain {f.domain}")
    best_y, best_v = math.nan, -math.inf
    k0 = int(f.piece_index(lo))
    for k in range(k0, f.n_pieces):
        a = max(float(f.breaks[k]), lo)
        b = min(float(f.breaks[k + 1]), hi)
        if a > b:
            break
        c = f.coefs[k]
        cands = [a, b]
        # interior vertex when the curvature favours it
        if sign * c[0] < 0:
            y = -c[1] / (2.0 * c[0])
            if a < y < b:
                cands = [a, y, b]
        for y in cands:
            v = sign * _eval(c, y)
            # scanning left to right, so near-ties keep the smaller point
            if v > best_v + EPS_REL * (1.0 + abs(v)):
                best_y, best_v = float(y), float(v)
        if b >= hi:
            break
    return float(best_y), float(sign * best_v)


def maximize_on(f: PiecewisePoly, over) -> tuple:
    """``(argmax, max)`` of ``f`` over a closed interval; ties go to the smaller point."""
    return _extremum(f, over, 1.0)


def minimize_on(f: PiecewisePoly, over) -> tuple:
    """``(argmin, min)`` of ``f`` over a closed interval; ties go to the smaller point."""
    return _extremum(f, over, -1.0)
