"""One-dimensional grids with quadrature weights.

A Grid1D is a strictly ascending array of nodes together with positive
quadrature weights, labelled by the coordinate it discretizes: the
physical coordinate x or the logarithmic coordinate y (y ~ ln x near a
degeneracy, so uniform-in-y grids are geometric-in-x).

Weights come from composite Simpson built on local quadratic fits, which
works on nonuniform nodes and keeps fourth-order accuracy for smooth
integrands (the refinement tests check order >= 3).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import GridTooCoarse


def simpson_weights(nodes):
    """Quadrature weights on (possibly nonuniform) ascending nodes.

    Each consecutive node triple carries the exact integral of the
    quadratic interpolant over its two intervals; an odd last interval is
    closed with the quadratic through the final triple.  Raises
    ValueError if the resulting weights are not all positive (wildly
    skewed spacing), since downstream norms assume a positive measure.
    """
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if n < 2:
        raise GridTooCoarse("need at least 2 nodes, got %d" % n)
    w = np.zeros(n)
    if n == 2:
        h = x[1] - x[0]
        w[:] = h / 2.0
        return w
    # full Simpson pairs
    i = 0
    while i + 2 <= n - 1:
        h0 = x[i + 1] - x[i]
        h1 = x[i + 2] - x[i + 1]
        H = h0 + h1
        w[i] += H * (2.0 * h0 - h1) / (6.0 * h0)
        w[i + 1] += H ** 3 / (6.0 * h0 * h1)
        w[i + 2] += H * (2.0 * h1 - h0) / (6.0 * h1)
        i += 2
    if i == n - 2:
        # one interval left: integrate the quadratic through the last
        # three nodes over the final interval only
        h0 = x[n - 2] - x[n - 3]
        h1 = x[n - 1] - x[n - 2]
        H = h0 + h1
        w[n - 3] += -(h1 ** 3) / (6.0 * h0 * H)
        w[n - 2] += h1 * (h1 + 3.0 * h0) / (6.0 * h0)
        w[n - 1] += h1 * (2.0 * h1 + 3.0 * h0) / (6.0 * H)
    if np.any(w <= 0.0):
        raise ValueError("quadrature weights not positive; node spacing "
                         "too skewed for the local-quadratic rule")
    return w


@dataclass
class Grid1D:
    """Ascending nodes, positive quadrature weights, coordinate label."""

    nodes: np.ndarray
    weights: np.ndarray
    coordinate_kind: str = "x"   # "x" or "y"

    def __post_init__(self):
        self.nodes = np.asarray(self.nodes, dtype=float)
        self.weights = np.asarray(self.weights, dtype=float)
        if self.nodes.ndim != 1 or self.nodes.size < 2:
            raise GridTooCoarse("grid needs at least 2 nodes")
        if np.any(np.diff(self.nodes) <= 0.0):
            raise ValueError("grid nodes must be strictly ascending")
        if self.weights.shape != self.nodes.shape:
            raise ValueError("weights shape mismatch")
        if np.any(self.weights <= 0.0):
            raise ValueError("quadrature weights must be positive")
        if self.coordinate_kind not in ("x", "y"):
            raise ValueError("coordinate_kind must be 'x' or 'y'")

    @property
    def n(self):
        return self.nodes.size

    @property
    def spacing(self):
        """Node spacing; scalar if uniform, else the full diff array."""
        d = np.diff(self.nodes)
        if np.allclose(d, d[0], rtol=1e-12, atol=0.0):
            return float(d[0])
        return d

    def integrate(self, values):
        """Quadrature of sampled values (complex allowed)."""
        v = np.asarray(values)
        if v.shape != self.nodes.shape:
            raise ValueError("field shape mismatch")
        return np.sum(self.weights * v)

    @classmethod
    def uniform(cls, a, b, n, coordinate_kind="x"):
        nodes = np.linspace(float(a), float(b), int(n))
        return cls(nodes, simpson_weights(nodes), coordinate_kind)

    @classmethod
    def geometric(cls, a, b, n):
        """Log-spaced x-grid on [a, b], 0 < a < b (degeneracy-refined)."""
        if not (0.0 < a < b):
            raise ValueError("geometric grid needs 0 < a < b")
        nodes = np.geomspace(float(a), float(b), int(n))
        return cls(nodes, simpson_weights(nodes), "x")

    @classmethod
    def from_nodes(cls, nodes, coordinate_kind="x"):
        nodes = np.asarray(nodes, dtype=float)
        return cls(nodes, simpson_weights(nodes), coordinate_kind)


@dataclass
class GridField:
    """Complex samples of a field on a grid, with free-form metadata."""

    grid: Grid1D
    values: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=complex)
        if self.values.shape != self.grid.nodes.shape:
            raise ValueError("values shape does not match grid")

    def map(self, fn, **meta):
        out = GridField(self.grid, fn(self.values), dict(self.meta))
        out.meta.update(meta)
        return out
