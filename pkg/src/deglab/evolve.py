"""Crank-Nicolson evolution of the linear model problems.

Four problem kinds share one implicit-midpoint stepper:

  model_linear_y      i u_t + u_yy + u_y + 2 d_y Re(u) = 0   (y-grid)
  tm_schrodinger_1d   i u_t + u_xx + b u_x = 0, b a node field
  free_schrodinger    i u_t + u_xx = 0
  free_airy           u_t + u_xxx = 0

The Re(.) coupling of the model kind is not complex-linear, so stepping
happens on the stacked real state (Re u, Im u), interleaved per node to
keep the system matrix banded.  Spatial derivatives are 4th-order
centered stencils; dirichlet_zero extends by zero outside the domain
(which keeps the second-derivative block symmetric, hence the free
propagators unitary under the trapezoidal step), periodic wraps.  The
left-hand matrix is factorized once per run and the factors are reused
for every step.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .errors import DegenerateFit, UnderResolved
from .grids import Grid1D, GridField
from .models import WeightSpec

_KINDS = ("model_linear_y", "tm_schrodinger_1d", "free_schrodinger",
          "free_airy")
_GROWTH_CAP = 1e12
_TOP_OCTAVE_CAP = 0.05

# classic centered coefficients, 4th-order accurate
_D1_OFFSETS = (-2, -1, 1, 2)
_D1_COEFFS = (1.0, -8.0, 8.0, -1.0)          # / (12 dy)
_D2_OFFSETS = (-2, -1, 0, 1, 2)
_D2_COEFFS = (-1.0, 16.0, -30.0, 16.0, -1.0)  # / (12 dy^2)
_D3_OFFSETS = (-3, -2, -1, 1, 2, 3)
_D3_COEFFS = (1.0, -8.0, 13.0, -13.0, 8.0, -1.0)  # / (8 dy^3)


@dataclass
class EvolutionProblem:
    """One linear evolution on a fixed grid with a fixed step."""

    kind: str
    grid: Grid1D
    dt: float
    bc: str = "dirichlet_zero"
    b: np.ndarray = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ValueError("unknown problem kind %r" % (self.kind,))
        if self.bc not in ("dirichlet_zero", "periodic"):
            raise ValueError("unknown boundary condition %r" % (self.bc,))
        if not self.dt > 0.0:
            raise ValueError("dt must be positive")
        if self.kind in ("model_linear_y", "tm_schrodinger_1d"):
            if np.ndim(self.grid.spacing) != 0:
                raise ValueError("%s needs a uniform grid" % self.kind)
        if self.kind == "tm_schrodinger_1d":
            if self.b is None:
                raise ValueError("tm_schrodinger_1d needs the b field")
            self.b = np.asarray(self.b, dtype=complex)
            if self.b.shape != self.grid.nodes.shape:
                raise ValueError("b field must live on the grid nodes")
        elif self.b is not None:
            raise ValueError("only tm_schrodinger_1d takes a b field")


@dataclass
class Trajectory:
    """Recorded snapshots and norm history of one evolution."""

    problem: EvolutionProblem
    times: np.ndarray
    snapshots: list = field(repr=False)
    norm_log: dict = field(repr=False)
    flag: str = None

    def __post_init__(self):
        if np.any(np.diff(self.times) <= 0.0):
            raise ValueError("times must be strictly increasing")
        if len(self.snapshots) != self.times.size:
            raise ValueError("snapshots must align with times")


def _stencil_matrix(n, offsets, coeffs, scale, bc):
    idx = np.arange(n)
    rows, cols, vals = [], [], []
    for off, c in zip(offsets, coeffs):
        if bc == "periodic":
            rows.append(idx)
            cols.append((idx + off) % n)
            vals.append(np.full(n, c * scale))
        else:
            keep = (idx + off >= 0) & (idx + off < n)
            rows.append(idx[keep])
            cols.append(idx[keep] + off)
            vals.append(np.full(int(keep.sum()), c * scale))
    return sparse.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, n))


def _generator(problem):
    """Sparse d/dt matrix on the interleaved real state."""
    n = problem.grid.n
    dy = float(problem.grid.spacing)
    bc = problem.bc
    d1 = _stencil_matrix(n, _D1_OFFSETS, _D1_COEFFS, 1.0 / (12 * dy), bc)
    d2 = _stencil_matrix(n, _D2_OFFSETS, _D2_COEFFS, 1.0 / (12 * dy ** 2),
                         bc)
    e01 = sparse.csr_matrix(np.array([[0.0, 1.0], [0.0, 0.0]]))
    e10 = sparse.csr_matrix(np.array([[0.0, 0.0], [1.0, 0.0]]))
    eye2 = sparse.identity(2, format="csr")
    if problem.kind == "model_linear_y":
        # p_t = -(q_yy + q_y), q_t = p_yy + 3 p_y
        return (sparse.kron(-(d2 + d1), e01)
                + sparse.kron(d2 + 3.0 * d1, e10)).tocsr()
    if problem.kind == "free_schrodinger":
        return (sparse.kron(-d2, e01) + sparse.kron(d2, e10)).tocsr()
    if problem.kind == "free_airy":
        d3 = _stencil_matrix(n, _D3_OFFSETS, _D3_COEFFS,
                             1.0 / (8 * dy ** 3), bc)
        return sparse.kron(-d3, eye2).tocsr()
    # tm_schrodinger_1d: p_t = -q_xx - Re(b) q_x - Im(b) p_x,
    #                    q_t =  p_xx + Re(b) p_x - Im(b) q_x
    br = sparse.diags(np.real(problem.b))
    bi = sparse.diags(np.imag(problem.b))
    drift = d2 + br @ d1
    return (sparse.kron(-drift, e01) + sparse.kron(drift, e10)
            + sparse.kron(-(bi @ d1), eye2)).tocsr()


def _norm_weights(problem):
    """Named quadrature densities logged along a run."""
    if problem.kind == "model_linear_y":
        y = problem.grid.nodes
        return (("L2_y", np.ones_like(y)), ("L2_dx", np.exp(y)),
                ("L2_w", np.exp(2.0 * y)))
    return (("L2", np.ones_like(problem.grid.nodes)),)


def top_octave_fraction(values):
    """Spectral mass fraction in the top octave of resolvable modes."""
    vals = np.asarray(values, dtype=complex)
    power = np.abs(np.fft.fft(vals)) ** 2
    modes = np.abs(np.fft.fftfreq(vals.size, d=1.0 / vals.size))
    top = modes > vals.size / 4.0
    return float(np.sum(power[top]) / np.sum(power))


def _check_initial_data(problem, u0):
    nodes = problem.grid.nodes
    vals = np.asarray(u0.values, dtype=complex)
    mx = float(np.max(np.abs(vals)))
    if mx == 0.0:
        raise ValueError("initial data is identically zero")
    supp = nodes[np.abs(vals) > 1e-13 * mx]
    if problem.bc == "dirichlet_zero":
        # the deep (low) end absorbs; demand real clearance there and a
        # few stencil widths at the top
        span = nodes[-1] - nodes[0]
        if np.min(supp) - nodes[0] < 0.1 * span:
            raise ValueError("initial support too close to the lower "
                             "boundary (< 10%% of the domain)")
        if nodes[-1] - np.max(supp) < 4.0 * float(problem.grid.spacing):
            raise ValueError("initial support touches the upper boundary")
    if problem.kind == "model_linear_y" and np.max(supp) >= -1.0:
        raise ValueError("model initial data must be supported in y < -1")
    frac = top_octave_fraction(vals)
    if frac > _TOP_OCTAVE_CAP:
        raise UnderResolved("%.1f%% of the initial spectral mass sits in "
                            "the top octave (cap %.0f%%)"
                            % (100 * frac, 100 * _TOP_OCTAVE_CAP))


def evolve(problem, u0, t_end, record_every=1):
    """Run the trapezoidal stepper to t_end, recording every k-th step.

    Returns a Trajectory; if any logged norm passes 1e12 the run stops
    and the partial trajectory carries flag="UnstableGrowth".
    """
    if not np.array_equal(u0.grid.nodes, problem.grid.nodes):
        raise ValueError("initial data lives on a different grid")
    if not t_end > 0.0:
        raise ValueError("t_end must be positive")
    record_every = int(record_every)
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    _check_initial_data(problem, u0)

    n_steps = int(math.ceil(t_end / problem.dt - 1e-12))
    dt = t_end / n_steps
    a = _generator(problem)
    eye = sparse.identity(2 * problem.grid.n, format="csr")
    lu = splu((eye - 0.5 * dt * a).tocsc())
    right = (eye + 0.5 * dt * a).tocsr()

    vals = np.asarray(u0.values, dtype=complex)
    state = np.empty(2 * problem.grid.n)
    state[0::2] = vals.real
    state[1::2] = vals.imag

    weights = _norm_weights(problem)
    times, snaps, logs = [], [], {name: [] for name, _ in weights}
    flag = None

    def record(t, state):
        u = state[0::2] + 1j * state[1::2]
        times.append(t)
        snaps.append(GridField(problem.grid, u))
        blown = False
        for name, w in weights:
            nrm = math.sqrt(float(problem.grid.integrate(
                np.abs(u) ** 2 * w)))
            logs[name].append(nrm)
            blown = blown or nrm > _GROWTH_CAP
        return blown

    record(0.0, state)
    for k in range(1, n_steps + 1):
        state = lu.solve(right @ state)
        if k % record_every == 0 or k == n_steps:
            if record(k * dt, state):
                flag = "UnstableGrowth"
                break

    norm_log = {"t": np.asarray(times)}
    for name, _ in weights:
        norm_log[name] = np.asarray(logs[name])
    return Trajectory(problem=problem, times=np.asarray(times),
                      snapshots=snaps, norm_log=norm_log, flag=flag)


def fit_exponential_rate(norm_log, norm_name, window):
    """Least-squares exponential rate of a logged norm over a window.

    Returns (rate, r_squared); a norm constant across the window fits
    rate 0 with r_squared = nan (undefined on zero variance).
    """
    t = np.asarray(norm_log["t"], dtype=float)
    vals = np.asarray(norm_log[norm_name], dtype=float)
    t_a, t_b = float(window[0]), float(window[1])
    keep = (t >= t_a - 1e-12) & (t <= t_b + 1e-12)
    if int(keep.sum()) < 8:
        raise DegenerateFit("%d samples in window [%g, %g]; need 8"
                            % (int(keep.sum()), t_a, t_b))
    t, vals = t[keep], vals[keep]
    if np.any(vals < 1e-14):
        raise DegenerateFit("norm below 1e-14 inside the fit window")
    ln = np.log(vals)
    if np.max(ln) - np.min(ln) < 1e-13:
        return 0.0, float("nan")
    slope, intercept = np.polyfit(t, ln, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((ln - pred) ** 2))
    ss_tot = float(np.sum((ln - np.mean(ln)) ** 2))
    return float(slope), 1.0 - ss_res / ss_tot


def _weight_density(weight, grid):
    """Quadrature density for ||w u||^2_{L2(dx)} on this grid.

    A WeightSpec is the field multiplier w (power_of_abs_x on a y-grid
    reads |x| = e^y and folds dx = e^y dy into the density); a callable
    or array is taken as a ready density; None is the plain L2(dx)
    norm.
    """
    jacobian = (np.exp(grid.nodes) if grid.coordinate_kind == "y"
                else np.ones(grid.n))
    if weight is None:
        return jacobian
    if isinstance(weight, WeightSpec):
        if weight.kind == "none":
            return jacobian
        if weight.kind == "power_of_abs_x" and grid.coordinate_kind == "y":
            return np.exp(2.0 * weight.gamma * grid.nodes) * jacobian
        return weight.evaluate(grid.nodes) ** 2 * jacobian
    if callable(weight):
        return np.asarray(weight(grid.nodes), dtype=float)
    return np.asarray(weight, dtype=float)


def weighted_apriori_check(trajectory, weight=None):
    """Max |d/dt log ||w u||^2_{L2(dx)}| along the trajectory.

    An empirical constant for the generalized-energy inequality; finite
    differences are centered inside, one-sided at the ends.
    """
    grid = trajectory.problem.grid
    w = _weight_density(weight, grid)
    t = trajectory.times
    if t.size < 3:
        raise ValueError("need at least 3 recorded times")
    sq = np.array([float(grid.integrate(np.abs(s.values) ** 2 * w))
                   for s in trajectory.snapshots])
    if np.any(sq <= 0.0):
        raise DegenerateFit("weighted norm vanishes along the trajectory")
    ln = np.log(sq)
    deriv = np.empty_like(ln)
    deriv[1:-1] = (ln[2:] - ln[:-2]) / (t[2:] - t[:-2])
    deriv[0] = (ln[1] - ln[0]) / (t[1] - t[0])
    deriv[-1] = (ln[-1] - ln[-2]) / (t[-1] - t[-2])
    return float(np.max(np.abs(deriv)))


def model_time_step(lam, dy):
    """Step small enough that the trapezoidal phase error is negligible
    for carrier frequencies up to |lam| (documented rule: dt <= dy and
    dt <= 0.1 / (|lam| + 1)^2)."""
    return min(float(dy), 0.1 / (abs(float(lam)) + 1.0) ** 2)


def model_problem(lam, nodes_per_wavelength=32, y_min=-40.0, y_max=0.0,
                  dt=None):
    """Model-equation problem on a uniform y-grid resolving the carrier.

    dy = 2 pi / (nodes_per_wavelength |lam|) exactly; y_min is pushed
    down so the span is a whole number of steps.
    """
    lam = float(lam)
    dy = 2.0 * math.pi / (nodes_per_wavelength * abs(lam))
    n = int(math.ceil((y_max - y_min) / dy - 1e-12))
    grid = Grid1D.uniform(y_max - n * dy, y_max, n + 1, coordinate_kind="y")
    if dt is None:
        dt = model_time_step(lam, dy)
    return EvolutionProblem(kind="model_linear_y", grid=grid, dt=dt)
