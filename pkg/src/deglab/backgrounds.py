"""Exact and semi-exact degenerate background solutions.

A background is a slowly varying solution f of one of the two families,
vanishing at x = 0, around which the packets are built.  The protocol is

    value(t, x)              complex (Schrödinger) or real (KdV)
    derivative(t, x, order)  x-derivatives, order 1..3
    dt_value(t, x)           time derivative
    family                   'schrodinger' | 'kdv'
    amplitude                the degeneracy strength A
    exact_region             interval where the background solves its
                             equation exactly (None = everywhere)

Backgrounds here are exact only for mu1 = 0; constructors refuse
mu1 != 0 rather than hand back a non-solution.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad, solve_ivp
from scipy.interpolate import CubicSpline

from .errors import (BetaBlowup, DegenerateOnPath, NonpositiveField,
                     X1ConditionViolated)
from .models import KdvSpec, SchrodingerSpec


# ---------------------------------------------------------------------------
# Schrödinger-family linear-profile background  f(t, x) = x e^{i omega t}
# ---------------------------------------------------------------------------

@dataclass
class DsLinearBackground:
    """f(t, x) = x exp(i (alpha1 + beta1) t): exact for mu1 = 0.

    The phase rotation is forced by the coefficient ODE at the vanishing
    point: i d/dt f_x(t,0) = -(alpha1+beta1) |f_x|^2 f_x with |f_x| = 1.
    """

    spec: SchrodingerSpec
    x1: float = 1.0

    family = "schrodinger"
    exact_region = None

    def __post_init__(self):
        if self.spec.mu1 != 0:
            raise ValueError("linear-profile background solves the family "
                             "exactly only for mu1 = 0")
        if self.x1 <= 0.0:
            raise ValueError("x1 must be positive")
        self.omega = self.spec.alpha1 + self.spec.beta1

    @property
    def amplitude(self):
        return 1.0     # f_x(0, 0)

    def value(self, t, x):
        return np.asarray(x, dtype=complex) * np.exp(1j * self.omega * t)

    def derivative(self, t, x, order=1):
        x = np.asarray(x, dtype=float)
        if order == 1:
            return np.full(x.shape, np.exp(1j * self.omega * t),
                           dtype=complex)
        return np.zeros(x.shape, dtype=complex)

    def dt_value(self, t, x):
        return 1j * self.omega * self.value(t, x)

    def dt_abs2(self, t, x):
        """d/dt |f|^2 (identically zero: the modulus never moves)."""
        return np.zeros(np.shape(x), dtype=float)


def gds_residual(spec, background, t, x):
    """Pointwise residual of the Schrödinger family on a (t, x) lattice:

        i f_t + |f|^2 f_xx + alpha1 f |f_x|^2 + beta1 conj(f) (f_x)^2
              + mu1 |f|^2 f
    """
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    worst = 0.0
    for tv in t:
        f = background.value(tv, x)
        fx = background.derivative(tv, x, 1)
        fxx = background.derivative(tv, x, 2)
        ft = background.dt_value(tv, x)
        res = (1j * ft + np.abs(f) ** 2 * fxx
               + spec.alpha1 * f * np.abs(fx) ** 2
               + spec.beta1 * np.conjugate(f) * fx ** 2
               + spec.mu1 * np.abs(f) ** 2 * f)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


# ---------------------------------------------------------------------------
# Taylor-coefficient ODE at the vanishing point (Schrödinger family)
# ---------------------------------------------------------------------------

_TAYLOR_MAX_ORDER = 6


def _series_mul(a, b):
    """Truncated product of Taylor-coefficient arrays (same length)."""
    n = a.shape[0]
    out = np.zeros(n, dtype=complex)
    for k in range(n):
        out[k] = np.dot(a[:k + 1], b[k::-1])
    return out


def _gds_nonlinearity_coeffs(c, spec):
    """Taylor coefficients of |f|^2 f_xx + alpha1 f |f_x|^2
    + beta1 conj(f) (f_x)^2 + mu1 |f|^2 f  from coefficients c of f.

    For real x the conjugate series has coefficients conj(c_k).
    """
    n = c.shape[0]
    cbar = np.conjugate(c)
    # f_x and f_xx as series (shift down with factorial factors)
    k = np.arange(n)
    cx = np.zeros(n, dtype=complex)
    cx[:n - 1] = c[1:] * k[1:]
    cxx = np.zeros(n, dtype=complex)
    if n >= 2:
        cxx[:n - 2] = c[2:] * (k[2:] * (k[2:] - 1))
    cxbar = np.conjugate(cx)
    ff = _series_mul(c, cbar)                      # |f|^2
    term1 = _series_mul(ff, cxx)
    term2 = spec.alpha1 * _series_mul(c, _series_mul(cx, cxbar))
    term3 = spec.beta1 * _series_mul(cbar, _series_mul(cx, cx))
    term4 = spec.mu1 * _series_mul(ff, c)
    return term1 + term2 + term3 + term4


def taylor_ode_schrodinger(spec, derivs0, t_end, rel_tol=1e-10,
                           n_samples=101):
    """Evolve the Taylor data of f at the vanishing point.

    derivs0[k] = d^k f/dx^k (0, 0) for k = 0..s (s <= 6).  The family
    equation restricted to each Taylor order gives the closed ODE system
    i c_k' + N_k(c) = 0 for the scaled coefficients c_k = derivs[k]/k!.
    Returns (times, derivs) with derivs of shape (n_samples, s+1),
    matching the derivative normalization of the input.
    """
    d0 = np.asarray(derivs0, dtype=complex)
    s = d0.shape[0] - 1
    if s > _TAYLOR_MAX_ORDER:
        raise ValueError("Taylor system hard-coded up to order %d"
                         % _TAYLOR_MAX_ORDER)
    if s < 0:
        raise ValueError("need at least the value at the origin")
    fact = np.array([math.factorial(k) for k in range(s + 1)], dtype=float)
    c0 = d0 / fact

    def rhs(t, state):
        c = state[:s + 1] + 1j * state[s + 1:]
        dc = 1j * _gds_nonlinearity_coeffs(c, spec)
        return np.concatenate([dc.real, dc.imag])

    y0 = np.concatenate([c0.real, c0.imag])
    t_eval = np.linspace(0.0, t_end, n_samples)
    sol = solve_ivp(rhs, (0.0, t_end), y0, method="DOP853",
                    rtol=rel_tol, atol=1e-13, t_eval=t_eval)
    if not sol.success:
        raise RuntimeError("Taylor ODE integration failed: %s" % sol.message)
    c = (sol.y[:s + 1] + 1j * sol.y[s + 1:]).T
    return sol.t, c * fact[None, :]


# ---------------------------------------------------------------------------
# KdV-family cubic background  f(t, x) = beta(t)^3 x^3
# ---------------------------------------------------------------------------

def kdv_beta_rhs(alpha1, beta):
    """Raw amplitude ODE  beta' = -(2 + 6 alpha1) beta^4."""
    return -(2.0 + 6.0 * alpha1) * float(beta) ** 4


def kdv_beta(alpha1, beta0, t):
    """Closed-form amplitude  beta(t) = beta0 (1 + 3(2+6 alpha1)
    beta0^3 t)^(-1/3); raises BetaBlowup past the existence time."""
    t = np.asarray(t, dtype=float)
    bracket = 1.0 + 3.0 * (2.0 + 6.0 * alpha1) * beta0 ** 3 * t
    if np.any(bracket <= 0.0):
        raise BetaBlowup("amplitude ODE leaves its existence interval "
                         "(bracket min %.3e)" % float(np.min(bracket)))
    return beta0 * bracket ** (-1.0 / 3.0)


def _smooth_step_c3(u):
    """Septic smoothstep: 0 -> 1 on [0, 1] with zero 1st-3rd derivatives
    at both ends.  Returns (S, S', S'', S''')."""
    u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
    s = 35 * u ** 4 - 84 * u ** 5 + 70 * u ** 6 - 20 * u ** 7
    s1 = 140 * u ** 3 - 420 * u ** 4 + 420 * u ** 5 - 140 * u ** 6
    s2 = 420 * u ** 2 - 1680 * u ** 3 + 2100 * u ** 4 - 840 * u ** 5
    s3 = 840 * u - 5040 * u ** 2 + 8400 * u ** 3 - 4200 * u ** 4
    return s, s1, s2, s3


@dataclass
class KdvCubicBackground:
    """f(t, x) = beta(t)^3 x^3 on (0, x_cut]; frozen t=0 cubic beyond.

    The blend  f = beta0^3 x^3 + s(x) (beta(t)^3 - beta0^3) x^3  uses a
    C^3 smoothstep s falling from 1 at x_cut to 0 at x_glue, so the
    profile is exactly the evolving cubic on the core, exactly the t=0
    cubic on [x_glue, x1], and C^3 in between.  The family equation
    (mu1 = 0) holds exactly on the core only; exact_region records it.
    """

    spec: KdvSpec
    beta0: float = 1.0
    x1: float = 1.0
    x_cut: float = None

    family = "kdv"

    def __post_init__(self):
        if self.spec.mu1 != 0.0:
            raise ValueError("cubic background solves the family exactly "
                             "only for mu1 = 0")
        if self.beta0 <= 0.0:
            raise ValueError("beta0 must be positive")
        if self.x_cut is None:
            self.x_cut = 0.8 * self.x1
        if not (0.0 < self.x_cut <= self.x1):
            raise ValueError("need 0 < x_cut <= x1")
        self.x_glue = self.x_cut + 0.5 * (self.x1 - self.x_cut)
        self.exact_region = (0.0, self.x_cut)

    @property
    def amplitude(self):
        """A = f0_xxx(0)/6 = beta0^3."""
        return self.beta0 ** 3

    def beta(self, t):
        return kdv_beta(self.spec.alpha1, self.beta0, t)

    def _blend(self, x):
        x = np.asarray(x, dtype=float)
        if self.x_cut >= self.x_glue:
            s = np.where(x <= self.x_cut, 1.0, 0.0)
            z = np.zeros_like(x)
            return s, z, z, z
        u = (x - self.x_cut) / (self.x_glue - self.x_cut)
        s, s1, s2, s3 = _smooth_step_c3(u)
        h = self.x_glue - self.x_cut
        inside = (x > self.x_cut) & (x < self.x_glue)
        sv = np.where(x <= self.x_cut, 1.0, np.where(inside, 1.0 - s, 0.0))
        s1v = np.where(inside, -s1 / h, 0.0)
        s2v = np.where(inside, -s2 / h ** 2, 0.0)
        s3v = np.where(inside, -s3 / h ** 3, 0.0)
        return sv, s1v, s2v, s3v

    def value(self, t, x):
        x = np.asarray(x, dtype=float)
        b3 = self.beta(t) ** 3
        b03 = self.beta0 ** 3
        s, _, _, _ = self._blend(x)
        return (b03 + s * (b3 - b03)) * x ** 3

    def derivative(self, t, x, order=1):
        x = np.asarray(x, dtype=float)
        db = float(self.beta(t) ** 3 - self.beta0 ** 3)
        b03 = self.beta0 ** 3
        s, s1, s2, s3 = self._blend(x)
        # f = (b03 + db s) x^3; Leibniz on s(x) * x^3
        if order == 1:
            return (b03 * 3 * x ** 2
                    + db * (s1 * x ** 3 + s * 3 * x ** 2))
        if order == 2:
            return (b03 * 6 * x
                    + db * (s2 * x ** 3 + 2 * s1 * 3 * x ** 2 + s * 6 * x))
        if order == 3:
            return (b03 * 6.0 * np.ones_like(x)
                    + db * (s3 * x ** 3 + 3 * s2 * 3 * x ** 2
                            + 3 * s1 * 6 * x + s * 6.0))
        raise ValueError("derivatives implemented up to order 3")

    def dt_value(self, t, x):
        x = np.asarray(x, dtype=float)
        b = float(self.beta(t))
        dbdt = kdv_beta_rhs(self.spec.alpha1, b)
        s, _, _, _ = self._blend(x)
        return s * 3.0 * b ** 2 * dbdt * x ** 3

    def existence_time(self):
        """Upper end of the beta-ODE existence interval (inf if global)."""
        k = 3.0 * (2.0 + 6.0 * self.spec.alpha1) * self.beta0 ** 3
        if k >= 0.0:
            return np.inf
        return -1.0 / k


def gkdv_residual(spec, background, t, x):
    """Pointwise residual  f_t + f f_xxx + alpha1 f_x f_xx
    + (mu1/m)(f^m)_x  on a (t, x) lattice (max abs)."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    x = np.atleast_1d(np.asarray(x, dtype=float))
    worst = 0.0
    for tv in t:
        f = np.real(background.value(tv, x))
        fx = np.real(background.derivative(tv, x, 1))
        fxx = np.real(background.derivative(tv, x, 2))
        fxxx = np.real(background.derivative(tv, x, 3))
        ft = np.real(background.dt_value(tv, x))
        res = (ft + f * fxxx + spec.alpha1 * fx * fxx
               + spec.mu1 * f ** (spec.m - 1) * fx)
        worst = max(worst, float(np.max(np.abs(res))))
    return worst


# ---------------------------------------------------------------------------
# Sampled background (spline interpolation hook)
# ---------------------------------------------------------------------------

@dataclass
class SampledBackground:
    """Static profile from samples; spline-differentiated, frozen in t."""

    x: np.ndarray
    values: np.ndarray
    family: str = "kdv"
    amplitude: float = 1.0
    spec: object = None

    exact_region = None

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=float)
        if self.family == "kdv":
            vals = np.asarray(self.values, dtype=float)
            if np.any(vals[self.x > 0] <= 0.0):
                raise NonpositiveField("KdV profile must be positive "
                                       "for x > 0")
            self._spline = CubicSpline(self.x, vals)
            self._spline_im = None
        else:
            vals = np.asarray(self.values, dtype=complex)
            self._spline = CubicSpline(self.x, vals.real)
            self._spline_im = CubicSpline(self.x, vals.imag)
        self.values = vals

    def value(self, t, x):
        if self._spline_im is None:
            return self._spline(x)
        return self._spline(x) + 1j * self._spline_im(x)

    def derivative(self, t, x, order=1):
        if self._spline_im is None:
            return self._spline(x, order)
        return self._spline(x, order) + 1j * self._spline_im(x, order)

    def dt_value(self, t, x):
        return np.zeros(np.shape(x), dtype=complex if self._spline_im
                        else float)

    def dt_abs2(self, t, x):
        return np.zeros(np.shape(x), dtype=float)


# ---------------------------------------------------------------------------
# Degenerate coordinate  y(t, x)  and its time derivative
# ---------------------------------------------------------------------------

def _y_integrand(background, t):
    if background.family == "schrodinger":
        def g(u):
            val = float(np.abs(background.value(t, u)))
            if val <= 0.0:
                raise DegenerateOnPath("profile vanishes at x = %g" % u)
            return 1.0 / val
    else:
        A = background.amplitude
        def g(u):
            val = float(np.real(background.value(t, u))) / A
            if val <= 0.0:
                raise DegenerateOnPath("profile not positive at x = %g" % u)
            return val ** (-1.0 / 3.0)
    return g


def y_transform(background, t, x, x1):
    """y(t, x) = -int_x^{x1} dcoord;  dcoord = du/|f| (Schrödinger) or
    du/ftilde^(1/3) (KdV, ftilde = f/A).  Scalar x or array.

    Raises DegenerateOnPath if the profile is not strictly nonzero on
    [x, x1] (in particular for x <= 0).
    """
    g = _y_integrand(background, t)
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs):
        if xv <= 0.0:
            raise DegenerateOnPath("coordinate integral reaches the "
                                   "degeneracy (x = %g)" % xv)
        val, _ = quad(g, xv, x1, epsabs=1e-12, epsrel=1e-12, limit=200)
        out[i] = -val
    return out[0] if np.isscalar(x) else out


def y_inverse(background, t, y, x1, x_floor=None):
    """Invert y_transform by bracketing + Newton, |residual| < 1e-12.

    x_floor bounds the bisection from below (default x1 * 1e-12).
    """
    ys = np.atleast_1d(np.asarray(y, dtype=float))
    if np.any(ys > 0.0):
        raise ValueError("y must be <= 0 (y(x1) = 0)")
    if x_floor is None:
        x_floor = x1 * 1e-12
    g = _y_integrand(background, t)
    out = np.empty(ys.shape)
    for i, yv in enumerate(ys):
        if yv == 0.0:
            out[i] = x1
            continue
        lo, hi = x_floor, x1
        if y_transform(background, t, lo, x1) > yv:
            raise DegenerateOnPath("target y below the reachable range")
        for _ in range(30):
            mid = 0.5 * (lo + hi)
            if y_transform(background, t, mid, x1) < yv:
                lo = mid
            else:
                hi = mid
        xv = 0.5 * (lo + hi)
        for _ in range(6):
            resid = float(y_transform(background, t, xv, x1)) - yv
            if abs(resid) < 1e-12:
                break
            xv_new = xv - resid / g(xv)       # dy/dx = g
            if not (x_floor <= xv_new <= x1):
                break
            xv = xv_new
        out[i] = xv
    return out[0] if np.isscalar(y) else out


def dt_y(background, t, x, x1):
    """Time derivative of the degenerate coordinate at fixed x.

    Schrödinger:  h = -int_x^{x1} d/dt (1/|f|) du
                    = int_x^{x1} d/dt(|f|^2) / (2 |f|^3) du
    KdV:          q = (A/3) int_x^{x1} ( -ft ft_xxx - alpha1 ft_x ft_xx
                       - (mu1/m) (f^{m-2} ft^2)_x ) / ft^{4/3} du,
                  ft = f/A.
    """
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if background.family == "schrodinger":
        def integrand(u):
            dabs2 = float(np.real(background.dt_abs2(t, u)))
            mod = float(np.abs(background.value(t, u)))
            return dabs2 / (2.0 * mod ** 3)
        scale = 1.0
    else:
        A = background.amplitude
        spec = getattr(background, "spec", None)
        if spec is None:
            raise ValueError("KdV coordinate drift needs the family "
                             "coefficients on the background (spec)")
        def integrand(u):
            ft = float(np.real(background.value(t, u))) / A
            ft1 = float(np.real(background.derivative(t, u, 1))) / A
            ft2 = float(np.real(background.derivative(t, u, 2))) / A
            ft3 = float(np.real(background.derivative(t, u, 3))) / A
            num = -ft * ft3 - spec.alpha1 * ft1 * ft2
            if spec.mu1 != 0.0:
                f = ft * A
                fm2 = f ** (spec.m - 2)
                fm2x = (spec.m - 2) * f ** (spec.m - 3) * ft1 * A \
                    if spec.m > 2 else 0.0
                num -= (spec.mu1 / spec.m) * (fm2x * ft ** 2
                                              + fm2 * 2.0 * ft * ft1)
            return num / ft ** (4.0 / 3.0)
        scale = A / 3.0
    out = np.empty(xs.shape)
    for i, xv in enumerate(xs):
        if xv <= 0.0:
            raise DegenerateOnPath("x must be positive")
        val, _ = quad(integrand, xv, x1, epsabs=1e-12, epsrel=1e-12,
                      limit=200)
        out[i] = scale * val
    return out[0] if np.isscalar(x) else out


# ---------------------------------------------------------------------------
# Flatness conditions at the degeneracy
# ---------------------------------------------------------------------------

def check_x1_condition(background, x1, t=0.0, n_probe=401):
    """Raise X1ConditionViolated unless the profile is flat enough on
    (0, x1] for the packet construction.

    Schrödinger: sup_{|x|<=x1} |f_xx(0, x)| * x1 < f_x(0, 0)/2.
    KdV:         (1/2) f_xxx(0, x) < f_xxx(0, 0) < 2 f_xxx(0, x)
                 on [0, x1].
    """
    if background.family == "schrodinger":
        xs = np.linspace(-x1, x1, n_probe)
        fxx = np.max(np.abs(background.derivative(t, xs, 2)))
        fx0 = np.abs(background.derivative(t, np.array([0.0]), 1))[0]
        if not fxx * x1 < 0.5 * fx0:
            raise X1ConditionViolated(
                "sup|f_xx| x1 = %.3e not below f_x(0)/2 = %.3e"
                % (fxx * x1, 0.5 * fx0))
    else:
        xs = np.linspace(0.0, x1, n_probe)
        f3 = np.real(background.derivative(t, xs, 3))
        f30 = float(np.real(background.derivative(t, np.array([0.0]), 3)[0]))
        if not (np.all(0.5 * f3 < f30) and np.all(f30 < 2.0 * f3)):
            raise X1ConditionViolated("third derivative leaves the "
                                      "two-sided band around its origin "
                                      "value")
