"""Evacuation times at a fixed scenario t.

For a sink on edge ``i`` the supply at vertices ``0..i`` flows right and the
supply at ``i+1..n-1`` flows left.  Supply on each side is laid out along
``z`` from the nearest vertex outward; the arrival time of the ``z``-th unit
is the maximum of one linear function per vertex already reached.  Integrating
those arrival times over ``z`` gives the aggregate evacuation time.
"""
from __future__ import annotations

import bisect
import math
from dataclasses import dataclass

from .network import EPS_REL, ParametricPathNetwork
from .pwpoly import upper_envelope


@dataclass(frozen=True)
class SinkLocation:
    """A vertex ``index``, or a point ``offset`` into edge ``index`` (``0 < offset < length``)."""

    kind: str
    index: int
    offset: float = 0.0

    @classmethod
    def vertex(cls, i: int) -> "SinkLocation":
        return cls("vertex", i)

    @classmethod
    def edge(cls, i: int, offset: float) -> "SinkLocation":
        return cls("edge", i, float(offset))

    @classmethod
    def at(cls, net: ParametricPathNetwork, x: float) -> "SinkLocation":
        """The location with coordinate ``x``; coordinates within tolerance of a vertex snap to it."""
        pos = net.positions
        if x < -EPS_REL * (1 + pos[-1]) or x > pos[-1] * (1 + EPS_REL) + EPS_REL:
            raise ValueError(f"coordinate {x} is off the path [0, {pos[-1]}]")
        k = int(min(max(bisect.bisect_right(pos.tolist(), x) - 1, 0), net.n - 1))
        for v in (k, k + 1):
            if v < net.n and abs(x - pos[v]) <= EPS_REL * max(1.0, abs(x)):
                return cls.vertex(v)
        return cls.edge(k, x - pos[k])

    def coordinate(self, net: ParametricPathNetwork) -> float:
        return float(net.positions[self.index] + self.offset)

    def check(self, net: ParametricPathNetwork) -> "SinkLocation":
        if self.kind == "vertex":
            if not 0 <= self.index < net.n:
                raise IndexError(f"vertex {self.index} out of range")
        elif self.kind == "edge":
            if not 0 <= self.index < net.n - 1:
                raise IndexError(f"edge {self.index} out of range")
            if not 0 < self.offset < net.lengths[self.index]:
                raise ValueError(f"offset {self.offset} not strictly inside edge {self.index}")
        else:
            raise ValueError(f"unknown sink kind {self.kind!r}")
        return self

    def to_dict(self, net: ParametricPathNetwork) -> dict:
        out = {"kind": self.kind, "index": self.index}
        if self.kind == "edge":
            out["offset"] = self.offset
        out["coordinate"] = self.coordinate(net)
        return out


def _check_t(net: ParametricPathNetwork, t: float) -> None:
    tol = EPS_REL * max(1.0, abs(net.t_lo), abs(net.t_hi))
    if not net.t_lo - tol <= t <= net.t_hi + tol:
        raise ValueError(f"t={t} outside the horizon [{net.t_lo}, {net.t_hi}]")


def completion_time_to_v1(net: ParametricPathNetwork, t: float) -> float:
    """Evacuation completion time with the sink at the leftmost vertex."""
    _check_t(net, t)
    pos = net.positions
    best = -math.inf
    for k in range(1, net.n):
        cap = net.range_min_capacity(0, k - 1)
        best = max(best, net.tau * pos[k] + net.range_weight(k, net.n - 1, t) / cap)
    return float(best)


def side_lines(net: ParametricPathNetwork, edge: int, side: str, t: float) -> list:
    """The arrival-time lines of one side of edge ``edge`` with the sink term removed.

    Returns ``(start, slope, intercept)`` per contributing vertex, nearest vertex
    first; the line is defined for ``start < z <= total`` where ``total`` is the
    side's whole supply.  Left side: ``-tau v_j + (z - W(j+1, i)) / C(j, i)``;
    right side: ``tau v_j + (z - W(i+1, j-1)) / C(i, j-1)``.
    """
    tau, pos = net.tau, net.positions
    lines = []
    if side == "L":
        for j in range(edge, -1, -1):
            start = net.range_weight(j + 1, edge, t)
            cap = net.range_min_capacity(j, edge)
            lines.append((start, 1.0 / cap, -tau * pos[j] - start / cap))
    elif side == "R":
        for j in range(edge + 1, net.n):
            start = net.range_weight(edge + 1, j - 1, t)
            cap = net.range_min_capacity(edge, j - 1)
            lines.append((start, 1.0 / cap, tau * pos[j] - start / cap))
    else:
        raise ValueError(f"side must be 'L' or 'R', got {side!r}")
    return lines


def side_total(net: ParametricPathNetwork, edge: int, side: str, t: float) -> float:
    if side == "L":
        return net.range_weight(0, edge, t)
    return net.range_weight(edge + 1, net.n - 1, t)


def _check_edge_point(net, edge, x):
    if not 0 <= edge < net.n - 1:
        raise IndexError(f"edge {edge} out of range")
    lo, hi = net.positions[edge], net.positions[edge + 1]
    tol = EPS_REL * max(1.0, abs(hi))
    if not lo - tol <= x <= hi + tol:
        raise ValueError(f"x={x} is not on the closure of edge {edge} [{lo}, {hi}]")


def _theta(net, edge, side, x, t, z):
    _check_t(net, t)
    _check_edge_point(net, edge, x)
    total = side_total(net, edge, side, t)
    if not 0 < z <= total * (1 + EPS_REL) + EPS_REL * EPS_REL:
        raise ValueError(f"z={z} outside (0, {total}]")
    lines = side_lines(net, edge, side, t)
    starts = [s for s, _, _ in lines]
    # starts are nondecreasing; the bucket of z is the last line starting below z
    k = bisect.bisect_left(starts, z) - 1
    best = max(slope * z + icpt for _, slope, icpt in lines[: k + 1])
    shift = net.tau * x if side == "L" else -net.tau * x
    return float(best + shift)


def theta_L(net: ParametricPathNetwork, edge: int, x: float, t: float, z: float) -> float:
    """Time at which the first ``z`` units from the left of ``x`` (on edge ``edge``) reach ``x``."""
    return _theta(net, edge, "L", x, t, z)


def theta_R(net: ParametricPathNetwork, edge: int, x: float, t: float, z: float) -> float:
    """Time at which the first ``z`` units from the right of ``x`` (on edge ``edge``) reach ``x``."""
    return _theta(net, edge, "R", x, t, z)


def side_integral(net: ParametricPathNetwork, edge: int, side: str, t: float) -> float:
    """Integral over ``z`` of the upper envelope of :func:`side_lines` (sink term excluded)."""
    total = side_total(net, edge, side, t)
    if total <= 0.0:
        return 0.0
    fs = [((0.0, slope, icpt), (start, total)) for start, slope, icpt in side_lines(net, edge, side, t)]
    env = upper_envelope(fs, domain=(0.0, total))
    acc = 0.0
    for (_, a1, a0), lo, hi in zip(env.coefs, env.breaks[:-1], env.breaks[1:]):
        acc += 0.5 * a1 * (hi * hi - lo * lo) + a0 * (hi - lo)
    return float(acc)


def aggregate_time(net: ParametricPathNetwork, sink: SinkLocation, t: float) -> float:
    """Aggregate evacuation time of all supply to ``sink`` under scenario ``t``."""
    _check_t(net, t)
    sink.check(net)
    x = sink.coordinate(net)
    tau = net.tau
    if sink.kind == "edge":
        i = sink.index
        w_left = net.range_weight(0, i, t)
        w_right = net.range_weight(i + 1, net.n - 1, t)
        return (w_left - w_right) * tau * x + side_integral(net, i, "L", t) + side_integral(net, i, "R", t)
    k = sink.index
    acc = 0.0
    if k > 0:
        acc += net.range_weight(0, k - 1, t) * tau * x + side_integral(net, k - 1, "L", t)
    if k < net.n - 1:
        acc += -net.range_weight(k + 1, net.n - 1, t) * tau * x + side_integral(net, k, "R", t)
    return float(acc)


def aggregate_time_at(net: ParametricPathNetwork, x: float, t: float) -> float:
    """:func:`aggregate_time` for a raw coordinate."""
    return aggregate_time(net, SinkLocation.at(net, x), t)
