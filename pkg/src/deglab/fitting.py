"""Least-squares rate fits used by the measurement layer.

Everything that reports a growth/decay rate funnels through
fit_exponential_rate so the diagnostics (residual of the fit, predicted
values) come out uniformly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateFit


@dataclass
class RateFit:
    """Result of a log-linear fit  log(values) ~ rate * t + offset."""

    rate: float
    offset: float
    residual: float          # rms of log-residuals
    times: np.ndarray
    values: np.ndarray

    def predicted(self, t=None):
        t = self.times if t is None else np.asarray(t, dtype=float)
        return np.exp(self.offset + self.rate * t)

    def relative_errors(self):
        pred = self.predicted()
        return np.abs(self.values - pred) / np.abs(pred)


def fit_exponential_rate(times, values, min_samples=8):
    """Fit values ~ C * exp(rate * t) by least squares on log(values).

    Requires min_samples points, all strictly positive; raises
    DegenerateFit if the values have no usable variation (all equal to
    within 1e-14 relative) or any are nonpositive.
    """
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if t.size != v.size:
        raise ValueError("times/values length mismatch")
    if t.size < min_samples:
        raise DegenerateFit("need at least %d samples, got %d"
                            % (min_samples, t.size))
    if np.any(v <= 0.0) or not np.all(np.isfinite(v)):
        raise DegenerateFit("values must be finite and positive for a "
                            "log-linear fit")
    spread = np.max(v) - np.min(v)
    if spread <= 1e-14 * np.max(v):
        raise DegenerateFit("values are constant to 1e-14; no rate")
    logv = np.log(v)
    A = np.vstack([t, np.ones_like(t)]).T
    (rate, offset), *_ = np.linalg.lstsq(A, logv, rcond=None)
    resid = float(np.sqrt(np.mean((logv - (rate * t + offset)) ** 2)))
    return RateFit(float(rate), float(offset), resid, t, v)


def fit_log_slope(xs, ys):
    """Slope of log(ys) against log(xs) (power-law exponent)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if np.any(x <= 0) or np.any(y <= 0):
        raise DegenerateFit("power-law fit needs positive data")
    fit = fit_exponential_rate(np.log(x), y, min_samples=2)
    return fit.rate
