"""Finite-difference weights and grid derivatives.

Fornberg's recursion gives exact interpolation-derivative weights for
arbitrary node placement, so the same code serves uniform interiors,
one-sided boundaries, and nonuniform ladders.  Interior stencils are
centered and of even order; near the edges the stencil slides one-sided
keeping the same width (and hence at least the same order).
"""

import numpy as np

from .errors import GridTooCoarse


def fornberg_weights(z, x, m):
    """Weights for derivatives 0..m at point z from nodes x.

    Returns an array c of shape (len(x), m+1): sum_j c[j, k] f(x_j)
    approximates f^(k)(z).  Classic Fornberg recursion.
    """
    x = np.asarray(x, dtype=float)
    n = x.size
    c = np.zeros((n, m + 1))
    c1 = 1.0
    c4 = x[0] - z
    c[0, 0] = 1.0
    for i in range(1, n):
        mn = min(i, m)
        c2 = 1.0
        c5 = c4
        c4 = x[i] - z
        for j in range(i):
            c3 = x[i] - x[j]
            c2 *= c3
            if j == i - 1:
                for k in range(mn, 0, -1):
                    c[i, k] = c1 * (k * c[i - 1, k - 1]
                                    - c5 * c[i - 1, k]) / c2
                c[i, 0] = -c1 * c5 * c[i - 1, 0] / c2
            for k in range(mn, 0, -1):
                c[j, k] = (c4 * c[j, k] - k * c[j, k - 1]) / c3
            c[j, 0] = c4 * c[j, 0] / c3
        c1 = c2
    return c


def derivative(values, nodes, order, acc=4):
    """order-th derivative of sampled values on ascending nodes.

    acc is the target accuracy order on a uniform interior (stencil
    width order + acc, adjusted to keep centered stencils symmetric).
    Works on complex data.  Raises GridTooCoarse if the grid cannot
    carry the stencil.
    """
    v = np.asarray(values)
    x = np.asarray(nodes, dtype=float)
    n = x.size
    if order == 0:
        return v.copy()
    width = order + acc
    if width % 2 == 0:
        width += 1          # odd width -> symmetric interior stencil
    if n < width:
        raise GridTooCoarse("need %d nodes for order-%d derivative "
                            "at accuracy %d, got %d" % (width, order, acc, n))
    half = width // 2
    dx = np.diff(x)
    uniform = np.allclose(dx, dx[0], rtol=1e-12, atol=0.0)
    out = np.empty_like(v, dtype=complex if np.iscomplexobj(v) else float)

    if uniform:
        h = dx[0]
        offs = np.arange(-half, half + 1) * h
        w_int = fornberg_weights(0.0, offs, order)[:, order]
        core = np.zeros(n - width + 1, dtype=out.dtype)
        for j in range(width):
            core += w_int[j] * v[j:n - width + 1 + j]
        out[half:n - half] = core
        for i in range(half):
            w = fornberg_weights(x[i], x[:width], order)[:, order]
            out[i] = np.dot(w, v[:width])
            w = fornberg_weights(x[n - 1 - i], x[n - width:], order)[:, order]
            out[n - 1 - i] = np.dot(w, v[n - width:])
        return out

    for i in range(n):
        lo = max(0, min(i - half, n - width))
        w = fornberg_weights(x[i], x[lo:lo + width], order)[:, order]
        out[i] = np.dot(w, v[lo:lo + width])
    return out
