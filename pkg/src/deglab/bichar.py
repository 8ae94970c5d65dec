"""Bicharacteristic flow of the degenerate principal symbol.

For p(x, xi) = -A x^n xi^m the Hamiltonian flow is

    dX/dt  = -A m X^n  Xi^(m-1)
    dXi/dt =  A n X^(n-1) Xi^m

with X^n Xi^m conserved.  Eliminating X through the conserved quantity
integrates the Xi-equation in closed form (time rescaled so A = 1;
callers pass A*t for other amplitudes):

    m == n:  Xi(s) = Xi0 * exp(m (X0 Xi0)^(m-1) s)
    m != n:  Xi(s) = Xi0 * [1 + (n-m) X0^(n-1) Xi0^(m-1) s]^(n/(n-m))

(the exponent n/(n-m) is what substitution back into the ODE system
confirms; see tests).  Frequencies double, in real time, at

    m == n:  tau2 = ln 2 / (A m X0^(m-1) Xi0^(m-1))
    m != n:  tau2 = (2^((n-m)/n) - 1) / (A (n-m) X0^(n-1) Xi0^(m-1))

whenever the growth direction A X0^(n-1) Xi0^(m-1) is positive.
"""

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import (NonrealPower, NoDoubling, OutsideDomainOfValidity)

BLOWUP_GUARD = 1e12


@dataclass(frozen=True)
class DegenerateSymbol:
    """p(x, xi) = -A x^n xi^m with A != 0, n > 0, integer m >= 2."""

    A: float = 1.0
    n: float = 1.0
    m: int = 2

    def __post_init__(self):
        if self.A == 0.0:
            raise ValueError("amplitude A must be nonzero")
        if self.n <= 0.0:
            raise ValueError("spatial power n must be positive")
        if not isinstance(self.m, int) or self.m < 2:
            raise ValueError("frequency power m must be an integer >= 2")

    @property
    def n_is_integer(self):
        return float(self.n).is_integer()


def _real_power(base, expo, n_is_integer):
    """base**expo, raising NonrealPower instead of returning nan."""
    if base < 0.0 and not float(expo).is_integer():
        raise NonrealPower("negative base %g with non-integer exponent %g"
                           % (base, expo))
    if base < 0.0:
        return float((-1.0) ** int(expo)) * (-base) ** expo
    return base ** expo


def bichar_rhs(symbol, state):
    """(dX/dt, dXi/dt) at state = (X, Xi)."""
    X, Xi = float(state[0]), float(state[1])
    if X < 0.0 and not symbol.n_is_integer:
        raise NonrealPower("X = %g < 0 with non-integer n = %g"
                           % (X, symbol.n))
    xn = _real_power(X, symbol.n, symbol.n_is_integer)
    xnm1 = _real_power(X, symbol.n - 1.0, symbol.n_is_integer)
    dX = -symbol.A * symbol.m * xn * Xi ** (symbol.m - 1)
    dXi = symbol.A * symbol.n * xnm1 * Xi ** symbol.m
    return dX, dXi


@dataclass
class BicharTrajectory:
    t: np.ndarray
    X: np.ndarray
    Xi: np.ndarray
    symbol: DegenerateSymbol
    blowup: bool = False
    t_blowup: float = None
    meta: dict = field(default_factory=dict)

    def conserved(self):
        """X^n Xi^m along the trajectory (drift diagnostic)."""
        n, m = self.symbol.n, self.symbol.m
        if self.symbol.n_is_integer:
            xn = np.sign(self.X) ** int(n) * np.abs(self.X) ** n
        else:
            xn = self.X ** n
        return xn * self.Xi ** m

    def conservation_drift(self):
        c = self.conserved()
        c0 = c[0]
        if c0 == 0.0:
            return float(np.max(np.abs(c)))
        return float(np.max(np.abs(c - c0) / np.abs(c0)))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "X", "Xi"])
            for row in zip(self.t, self.X, self.Xi):
                writer.writerow([repr(float(v)) for v in row])


def integrate_bichar(symbol, X0, Xi0, t_end, rel_tol=1e-10, t_eval=None,
                     n_samples=201):
    """Adaptive integration of the flow on [0, t_end].

    Uses an embedded Runge-Kutta pair (DOP853) with rtol=rel_tol.  If
    |Xi| crosses the blowup guard (1e12) the trajectory is cut there and
    returned with blowup=True rather than raising.
    """
    if not (1e-14 < rel_tol < 1e-2):
        raise ValueError("rel_tol must lie in (1e-14, 1e-2)")
    # fail fast on symbols that would need complex powers
    bichar_rhs(symbol, (X0, Xi0))
    if t_end == 0.0:
        one = np.array([0.0])
        return BicharTrajectory(t=one, X=np.array([float(X0)]),
                                Xi=np.array([float(Xi0)]), symbol=symbol)

    def rhs(t, s):
        return bichar_rhs(symbol, s)

    def guard(t, s):
        return abs(s[1]) - BLOWUP_GUARD

    guard.terminal = True
    guard.direction = 1.0

    if t_eval is None:
        t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(rhs, (0.0, t_end), [float(X0), float(Xi0)],
                    method="DOP853", rtol=rel_tol, atol=1e-14,
                    t_eval=np.asarray(t_eval, dtype=float),
                    events=guard, dense_output=False)
    if not sol.success and sol.status != 1:
        raise RuntimeError("integration failed: %s" % sol.message)
    blowup = sol.status == 1
    t_blow = float(sol.t_events[0][0]) if blowup and len(sol.t_events[0]) \
        else None
    return BicharTrajectory(t=sol.t, X=sol.y[0], Xi=sol.y[1],
                            symbol=symbol, blowup=blowup, t_blowup=t_blow)


def _growth_coefficient(symbol, X0, Xi0):
    """A * X0^(n-1) * Xi0^(m-1); positive iff |Xi| grows initially."""
    xnm1 = _real_power(float(X0), symbol.n - 1.0, symbol.n_is_integer)
    return symbol.A * xnm1 * float(Xi0) ** (symbol.m - 1)


def xi_closed_form(symbol, X0, Xi0, t):
    """Closed-form Xi at rescaled time t (A = 1 units; pass A*t for
    other amplitudes -- doubling_time does this internally).

    Scalar or array t.  Raises OutsideDomainOfValidity when the m != n
    bracket is not strictly positive somewhere in t.
    """
    t = np.asarray(t, dtype=float)
    m, n = symbol.m, symbol.n
    if X0 < 0.0 and not symbol.n_is_integer:
        raise NonrealPower("X0 < 0 with non-integer n")
    if float(m) == float(n):
        rate = m * _real_power(float(X0), m - 1.0, True) \
            * float(Xi0) ** (m - 1)
        return Xi0 * np.exp(rate * t)
    r = (n - m) * _real_power(float(X0), n - 1.0, symbol.n_is_integer) \
        * float(Xi0) ** (m - 1)
    bracket = 1.0 + r * t
    if np.any(bracket <= 0.0):
        raise OutsideDomainOfValidity(
            "closed form valid only while 1 + %g t > 0" % r)
    return Xi0 * bracket ** (n / (n - m))


def doubling_time(symbol, X0, Xi0):
    """First time |Xi| reaches 2|Xi0| along the flow, in closed form.

    Raises NoDoubling when the initial growth direction points the
    wrong way (or the flow is frozen at X0 = 0 / Xi0 = 0).
    """
    g = _growth_coefficient(symbol, X0, Xi0)
    if g <= 0.0 or Xi0 == 0.0:
        raise NoDoubling("A X0^(n-1) Xi0^(m-1) = %g does not grow" % g)
    m, n = float(symbol.m), float(symbol.n)
    if m == n:
        return math.log(2.0) / (symbol.m * g)
    r = (n - m) * g
    return (2.0 ** ((n - m) / n) - 1.0) / r
