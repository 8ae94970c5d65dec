"""Equation families and their critical exponents.

Two quasilinear families on the line, both degenerate where the unknown
vanishes:

  Schrödinger family:
      i u_t + |u|^2 u_xx + alpha1 u |u_x|^2 + beta1 conj(u) (u_x)^2
            + mu1 |u|^2 u = 0

  KdV family (m-th power flux):
      u_t + u u_xxx + alpha1 u_x u_xx + (mu1/m) (u^m)_x = 0

Scaling around the vanishing point singles out one weight exponent
sigma_c per family; the commutator coefficient in the linearized
operator changes sign there.  The Sobolev index s_c is the smallest
integer strictly above sigma_c - 1/2 that is still large enough for the
energy method (>= 2 for Schrödinger, >= 5 for KdV).
"""

import math
from dataclasses import dataclass

import numpy as np


def schrodinger_exponents(alpha1, beta1):
    """(sigma_c, s_c) for the Schrödinger family."""
    sigma_c = -(alpha1 / 2.0 + beta1 - 1.0)
    s_c = max(2, math.floor(sigma_c - 0.5) + 1)
    return sigma_c, s_c


def kdv_exponents(alpha1):
    """(sigma_c, s_c) for the KdV family."""
    sigma_c = -(alpha1 - 1.5)
    s_c = max(5, math.floor(sigma_c - 0.5) + 1)
    return sigma_c, s_c


@dataclass(frozen=True)
class SchrodingerSpec:
    """Coefficients (alpha1, beta1, mu1) of the Schrödinger family.

    mu1 may be complex; alpha1, beta1 are real.
    """

    alpha1: float
    beta1: float
    mu1: complex = 0.0

    def __post_init__(self):
        for name in ("alpha1", "beta1"):
            v = getattr(self, name)
            if not isinstance(v, (int, float)):
                raise ValueError("%s must be real, got %r" % (name, v))

    @property
    def sigma_c(self):
        return schrodinger_exponents(self.alpha1, self.beta1)[0]

    @property
    def s_c(self):
        return schrodinger_exponents(self.alpha1, self.beta1)[1]


@dataclass(frozen=True)
class KdvSpec:
    """Coefficients (alpha1, mu1, m) of the KdV family; m >= 2 integer."""

    alpha1: float
    mu1: float = 0.0
    m: int = 2

    def __post_init__(self):
        if not isinstance(self.m, int) or self.m < 2:
            raise ValueError("flux power m must be an integer >= 2")

    @property
    def sigma_c(self):
        return kdv_exponents(self.alpha1)[0]

    @property
    def s_c(self):
        return kdv_exponents(self.alpha1)[1]


@dataclass(frozen=True)
class WeightSpec:
    """Weight for norms near the degeneracy.

    kind:
      'none'           -- weight 1
      'power_of_abs_x' -- |x|^gamma
      'power_of_abs_f' -- |f(t, x)|^gamma for a background f
    """

    kind: str = "none"
    gamma: float = 0.0

    _KINDS = ("none", "power_of_abs_x", "power_of_abs_f")

    def __post_init__(self):
        if self.kind not in self._KINDS:
            raise ValueError("unknown weight kind %r" % (self.kind,))

    def evaluate(self, x, background=None, t=0.0):
        """Weight values at nodes x.  May return inf at a degeneracy with
        gamma < 0; norm code decides whether that is fatal."""
        x = np.asarray(x, dtype=float)
        if self.kind == "none":
            return np.ones_like(x)
        if self.kind == "power_of_abs_x":
            base = np.abs(x)
        else:
            if background is None:
                raise ValueError("power_of_abs_f weight needs a background")
            base = np.abs(background.value(t, x))
        with np.errstate(divide="ignore"):
            return base ** self.gamma
