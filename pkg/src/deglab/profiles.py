"""Compactly supported bump profiles with analytic derivatives.

The standard mollifier b(z) = exp(-1/(1-z^2)) on |z| < 1 (zero outside)
is the envelope for every packet in the laboratory.  Its derivatives are
rational multiples of itself,

    b^(k)(z) = R_k(z) b(z),
    R1 = -2z/(1-z^2)^2
    R2 = (6z^4 - 2)/(1-z^2)^4
    R3 = -4z(6z^6 + 3z^4 - 10z^2 + 3)/(1-z^2)^6
    R4 = (120z^10 + 180z^8 - 528z^6 + 232z^4 + 24z^2 - 12)/(1-z^2)^8

(hand-differentiated via R_{k+1} = R_k' + R_k R_1; pinned against finite
differences in the tests), so packets built from bumps have exact
derivatives up to fourth order.
"""

from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad


def _bump_raw(z):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    out[inside] = np.exp(-1.0 / (1.0 - zi * zi))
    return out


def _bump_deriv_raw(z, order):
    z = np.asarray(z, dtype=float)
    out = np.zeros_like(z)
    inside = np.abs(z) < 1.0
    zi = z[inside]
    om = 1.0 - zi * zi
    b = np.exp(-1.0 / om)
    if order == 0:
        r = 1.0
    elif order == 1:
        r = -2.0 * zi / om ** 2
    elif order == 2:
        r = (6.0 * zi ** 4 - 2.0) / om ** 4
    elif order == 3:
        r = -4.0 * zi * (6.0 * zi ** 6 + 3.0 * zi ** 4
                         - 10.0 * zi ** 2 + 3.0) / om ** 6
    elif order == 4:
        r = (120.0 * zi ** 10 + 180.0 * zi ** 8 - 528.0 * zi ** 6
             + 232.0 * zi ** 4 + 24.0 * zi ** 2 - 12.0) / om ** 8
    else:
        raise ValueError("bump derivatives implemented up to order 4")
    out[inside] = r * b
    return out


# int_{-1}^{1} b(z)^2 dz, computed once (the integrand is analytic inside
# and identically zero at the endpoints, so quad is comfortable)
_BUMP_L2SQ = quad(lambda z: float(_bump_raw(z)) ** 2, -1.0, 1.0,
                  epsabs=1e-14, epsrel=1e-14)[0]
_BUMP_INT = quad(lambda z: float(_bump_raw(z)), -1.0, 1.0,
                 epsabs=1e-14, epsrel=1e-14)[0]


_SPHERE_AREA = {1: 2.0, 2: 2.0 * np.pi, 3: 4.0 * np.pi}


class RadialBump:
    """L²(ℝ^d)-normalized radial bump c_d b(|z|), supported in |z| < 1.

    Gradient and Laplacian use the limits b'(r)/r -> b''(0) at the
    origin, so the evaluators are finite everywhere.
    """

    def __init__(self, d):
        if d not in _SPHERE_AREA:
            raise ValueError("radial bumps implemented for d in {1,2,3}")
        self.d = d
        mass = quad(lambda r: float(_bump_raw(r)) ** 2 * r ** (d - 1),
                    0.0, 1.0, epsabs=1e-14, epsrel=1e-14)[0]
        self.c_d = 1.0 / np.sqrt(_SPHERE_AREA[d] * mass)

    def _radii(self, z):
        z = np.asarray(z, dtype=float)
        if z.shape[-1] != self.d:
            raise ValueError("points must have %d components" % self.d)
        return z, np.sqrt(np.sum(z * z, axis=-1))

    def value(self, z):
        z, r = self._radii(z)
        return self.c_d * _bump_raw(r)

    def gradient(self, z):
        z, r = self._radii(z)
        b1 = _bump_deriv_raw(r, 1)
        # b'(r)/r is smooth through r = 0 with limit b''(0)
        safe = np.where(r > 1e-12, r, 1.0)
        factor = np.where(r > 1e-12, b1 / safe, _bump_deriv_raw(0.0, 2))
        return self.c_d * factor[..., None] * z

    def laplacian(self, z):
        z, r = self._radii(z)
        b1 = _bump_deriv_raw(r, 1)
        b2 = _bump_deriv_raw(r, 2)
        safe = np.where(r > 1e-12, r, 1.0)
        over_r = np.where(r > 1e-12, b1 / safe, _bump_deriv_raw(0.0, 2))
        return self.c_d * (b2 + (self.d - 1) * over_r)


@dataclass(frozen=True)
class BumpProfile:
    """amp * b((x - center)/halfwidth), supported on |x-center| < halfwidth."""

    center: float = 0.0
    halfwidth: float = 1.0
    amp: float = 1.0

    def __post_init__(self):
        if self.halfwidth <= 0.0:
            raise ValueError("halfwidth must be positive")

    @property
    def support(self):
        return (self.center - self.halfwidth, self.center + self.halfwidth)

    def __call__(self, x):
        z = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        return self.amp * _bump_raw(z)

    def derivative(self, x, order=1):
        z = (np.asarray(x, dtype=float) - self.center) / self.halfwidth
        return self.amp * _bump_deriv_raw(z, order) / self.halfwidth ** order

    def l2_norm(self):
        return abs(self.amp) * np.sqrt(self.halfwidth * _BUMP_L2SQ)

    def integral(self):
        return self.amp * self.halfwidth * _BUMP_INT

    @classmethod
    def on_interval(cls, a, b, normalize=None):
        """Bump supported exactly on (a, b); normalize in {'l2','int',None}."""
        if not b > a:
            raise ValueError("need a < b")
        c = 0.5 * (a + b)
        w = 0.5 * (b - a)
        p = cls(center=c, halfwidth=w, amp=1.0)
        if normalize == "l2":
            p = cls(center=c, halfwidth=w, amp=1.0 / p.l2_norm())
        elif normalize == "int":
            p = cls(center=c, halfwidth=w, amp=1.0 / p.integral())
        elif normalize is not None:
            raise ValueError("normalize must be 'l2', 'int', or None")
        return p
