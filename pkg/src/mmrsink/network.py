"""Path networks whose vertex supplies are linear in a scenario parameter t.

Vertices are indexed ``0 .. n-1`` and edge ``i`` joins vertex ``i`` to
vertex ``i + 1``.  Prefix weight sums and bottleneck capacities are answered
in constant time after preprocessing.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

# Global relative tolerance for geometric comparisons.
EPS_REL = 1e-9


class InstanceError(ValueError):
    """An instance violates one of the network invariants."""


@dataclass(frozen=True)
class LinearFn:
    """``slope * t + intercept``."""

    slope: float = 0.0
    intercept: float = 0.0

    def __call__(self, t):
        return self.slope * t + self.intercept

    def __add__(self, other: "LinearFn") -> "LinearFn":
        return LinearFn(self.slope + other.slope, self.intercept + other.intercept)

    def __sub__(self, other: "LinearFn") -> "LinearFn":
        return LinearFn(self.slope - other.slope, self.intercept - other.intercept)

    def __neg__(self) -> "LinearFn":
        return LinearFn(-self.slope, -self.intercept)

    def scale(self, k: float) -> "LinearFn":
        return LinearFn(k * self.slope, k * self.intercept)

    def root(self) -> float:
        """The t where the function vanishes (``nan`` for a constant)."""
        if self.slope == 0.0:
            return math.nan
        return -self.intercept / self.slope


class SparseTable:
    """Range-minimum queries over a fixed sequence in O(1) after O(n log n) build."""

    def __init__(self, data: Sequence[float]):
        row = np.asarray(data, dtype=float)
        self._levels = [row]
        width = 1
        while 2 * width <= len(data):
            row = np.minimum(row[:-width], row[width:])
            self._levels.append(row)
            width *= 2
        self.size = len(data)

    def query(self, lo: int, hi: int) -> float:
        """Minimum over ``data[lo..hi]`` (both inclusive)."""
        if not (0 <= lo <= hi < self.size):
            raise IndexError(f"bad range [{lo}, {hi}] for size {self.size}")
        depth = (hi - lo + 1).bit_length() - 1
        level = self._levels[depth]
        return float(min(level[lo], level[hi - (1 << depth) + 1]))


@dataclass(frozen=True)
class ParametricPathNetwork:
    """A dynamic flow path network with weights ``a_i + b_i t`` on ``T = [t_lo, t_hi]``.

    Construct through :meth:`build` (or :func:`validate`) to get the checked,
    preprocessed instance.
    """

    a: tuple
    b: tuple
    lengths: tuple
    capacities: tuple
    tau: float
    horizon: tuple
    positions: np.ndarray = field(repr=False, compare=False, default=None)
    _prefix_a: np.ndarray = field(repr=False, compare=False, default=None)
    _prefix_b: np.ndarray = field(repr=False, compare=False, default=None)
    _rmq: SparseTable = field(repr=False, compare=False, default=None)

    @classmethod
    def build(cls, a, b, lengths, capacities, tau=1.0, horizon=(0.0, 1.0)):
        net = cls(
            a=tuple(float(v) for v in a),
            b=tuple(float(v) for v in b),
            lengths=tuple(float(v) for v in lengths),
            capacities=tuple(float(v) for v in capacities),
            tau=float(tau),
            horizon=(float(horizon[0]), float(horizon[1])),
        )
        return validate(net)

    @property
    def n(self) -> int:
        return len(self.a)

    @property
    def t_lo(self) -> float:
        return self.horizon[0]

    @property
    def t_hi(self) -> float:
        return self.horizon[1]

    @property
    def total_length(self) -> float:
        return float(self.positions[-1])

    def weight(self, i: int) -> LinearFn:
        return LinearFn(self.b[i], self.a[i])

    def weights_at(self, t: float) -> np.ndarray:
        return np.asarray(self.a) + np.asarray(self.b) * t

    def prefix_weight(self, i: int, j: int) -> LinearFn:
        """``W(i, j) = w_i + ... + w_j`` as a linear function of t; zero when ``i > j``."""
        n = self.n
        if not (0 <= i < n and 0 <= j < n):
            raise IndexError(f"vertex index out of range: ({i}, {j}) with n={n}")
        if i > j:
            return LinearFn()
        return LinearFn(
            self._prefix_b[j + 1] - self._prefix_b[i],
            self._prefix_a[j + 1] - self._prefix_a[i],
        )

    def range_weight(self, i: int, j: int, t: float) -> float:
        """``W(i, j)`` evaluated at t; indices may run past the ends (clipped)."""
        i = max(i, 0)
        j = min(j, self.n - 1)
        if i > j:
            return 0.0
        return (self._prefix_a[j + 1] - self._prefix_a[i]) + (
            self._prefix_b[j + 1] - self._prefix_b[i]
        ) * t

    def range_min_capacity(self, i: int, j: int) -> float:
        """Minimum capacity over edges ``i..j`` (inclusive)."""
        if not (0 <= i <= j < self.n - 1):
            raise IndexError(f"edge range [{i}, {j}] invalid for {self.n - 1} edges")
        return self._rmq.query(i, j)

    def mirrored(self) -> "ParametricPathNetwork":
        """The same network read from the other end (vertex i becomes n-1-i)."""
        return ParametricPathNetwork.build(
            self.a[::-1],
            self.b[::-1],
            self.lengths[::-1],
            self.capacities[::-1],
            self.tau,
            self.horizon,
        )

    def scaled_weights(self, k: float) -> "ParametricPathNetwork":
        return ParametricPathNetwork.build(
            [k * v for v in self.a],
            [k * v for v in self.b],
            self.lengths,
            self.capacities,
            self.tau,
            self.horizon,
        )

    def shifted(self, delta: float) -> "ParametricPathNetwork":
        """Reparametrize so that the new ``w(t)`` equals the old ``w(t + delta)``."""
        return ParametricPathNetwork.build(
            [a + b * delta for a, b in zip(self.a, self.b)],
            self.b,
            self.lengths,
            self.capacities,
            self.tau,
            (self.t_lo - delta, self.t_hi - delta),
        )

    def to_dict(self) -> dict:
        return {
            "tau": self.tau,
            "horizon": list(self.horizon),
            "vertices": [{"a": a, "b": b} for a, b in zip(self.a, self.b)],
            "edges": [
                {"length": l, "capacity": c}
                for l, c in zip(self.lengths, self.capacities)
            ],
        }


def validate(net: ParametricPathNetwork) -> ParametricPathNetwork:
    """Check the instance invariants and attach the query structures.

    Raises :class:`InstanceError` naming the first violated check.
    """
    n = len(net.a)
    if n < 2:
        raise InstanceError(f"need at least 2 vertices, got {n}")
    if len(net.b) != n:
        raise InstanceError("weight slope and intercept lists differ in length")
    if len(net.lengths) != n - 1 or len(net.capacities) != n - 1:
        raise InstanceError(f"need exactly {n - 1} edges for {n} vertices")
    t_lo, t_hi = net.horizon
    values = [t_lo, t_hi, net.tau, *net.a, *net.b, *net.lengths, *net.capacities]
    if not all(math.isfinite(v) for v in values):
        raise InstanceError("non-finite number in instance")
    if not t_lo < t_hi:
        raise InstanceError(f"empty horizon: t_lo={t_lo} must be < t_hi={t_hi}")
    if not net.tau > 0:
        raise InstanceError(f"nonpositive tau: {net.tau}")
    for i, length in enumerate(net.lengths):
        if not length > 0:
            raise InstanceError(f"nonpositive edge length at edge {i}: {length}")
    for i, cap in enumerate(net.capacities):
        if not cap > 0:
            raise InstanceError(f"nonpositive edge capacity at edge {i}: {cap}")
    for i, (a, b) in enumerate(zip(net.a, net.b)):
        for t in (t_lo, t_hi):
            if a + b * t < 0:
                raise InstanceError(f"negative weight at vertex {i} at t={t}")

    positions = np.concatenate([[0.0], np.cumsum(net.lengths)])
    if np.any(np.diff(positions) <= 0):
        raise InstanceError("vertex positions are not strictly increasing")
    object.__setattr__(net, "positions", positions)
    object.__setattr__(net, "_prefix_a", np.concatenate([[0.0], np.cumsum(net.a)]))
    object.__setattr__(net, "_prefix_b", np.concatenate([[0.0], np.cumsum(net.b)]))
    object.__setattr__(net, "_rmq", SparseTable(net.capacities))
    return net


def from_dict(doc: dict) -> ParametricPathNetwork:
    try:
        vertices = doc["vertices"]
        edges = doc["edges"]
        return ParametricPathNetwork.build(
            a=[v["a"] for v in vertices],
            b=[v.get("b", 0.0) for v in vertices],
            lengths=[e["length"] for e in edges],
            capacities=[e["capacity"] for e in edges],
            tau=doc.get("tau", 1.0),
            horizon=doc["horizon"],
        )
    except (KeyError, TypeError, IndexError) as exc:
        raise InstanceError(f"malformed instance document: {exc!r}") from exc


def load(path) -> ParametricPathNetwork:
    """Read an instance from a JSON file (``json.JSONDecodeError`` on bad syntax)."""
    with open(path) as fh:
        return from_dict(json.load(fh))


def random_instance(
    n: int,
    rng: np.random.Generator,
    capacity_mode: str = "random",
    horizon=(0.0, 1.0),
    tau: float = 1.0,
) -> ParametricPathNetwork:
    """Random instance used by tests and benchmarks.

    Intercepts ``a ~ U[0, 10]``, slopes ``b ~ U[-a / t_hi, 10]`` clipped so the
    weight stays nonnegative on the horizon; lengths and capacities are
    log-uniform on ``[0.1, 10]`` (capacities all 1 in ``uniform`` mode).
    """
    t_lo, t_hi = horizon
    a = rng.uniform(0.0, 10.0, n)
    lower = -a / t_hi if t_hi > 0 else np.zeros(n)
    b = rng.uniform(lower, 10.0)
    # keep w(t) >= 0 at both ends of the horizon
    for t in (t_lo, t_hi):
        neg = a + b * t < 0
        if np.any(neg):
            b[neg] = -a[neg] / t
    lengths = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n - 1))
    if capacity_mode == "uniform":
        caps = np.ones(n - 1)
    elif capacity_mode == "random":
        caps = np.exp(rng.uniform(np.log(0.1), np.log(10.0), n - 1))
    else:
        raise ValueError(f"unknown capacity mode {capacity_mode!r}")
    return ParametricPathNetwork.build(a, b, lengths, caps, tau, horizon)
