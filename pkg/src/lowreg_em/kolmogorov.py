"""Heat semigroup on a 1-d grid and the mild solution of the Kolmogorov equation

    d_t v = 1/2 v'' + b v' - lambda v + f,   v(0, .) = 0,

computed as the fixed point of

    (T v)(t) = int_0^t exp(-lambda (t - r)) P_{t-r}[b(r) v'(r) + f(r)] dr.

Fields live on x in [-R, R] and are extended by their edge values outside.
The time integral treats the integrand as constant on each subinterval (value
at the midpoint, drift and forcing replaced by their exact step averages in
time) and integrates the exponential weight exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .drift import DriftSpec, time_integral
from .errors import NonConvergenceError, ResolutionError

KERNEL_WIDTH = 8.0  # kernel truncated at this many standard deviations
RESOLUTION = 4.0  # need dx <= sqrt(t) / RESOLUTION


def heat_kernel_weights(t, dx):
    """Trapezoid weights dx * K(t, m dx) for |m| <= ceil(8 sqrt(t) / dx)."""
    if t <= 0.0:
        raise ValueError("heat time must be positive")
    if dx > math.sqrt(t) / RESOLUTION:
        raise ResolutionError(
            f"dx = {dx:.3g} under-resolves the heat kernel at t = {t:.3g} (need dx <= {math.sqrt(t) / RESOLUTION:.3g})"
        )
    half = int(math.ceil(KERNEL_WIDTH * math.sqrt(t) / dx))
    y = np.arange(-half, half + 1) * dx
    w = dx * np.exp(-(y ** 2) / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)
    w[0] *= 0.5
    w[-1] *= 0.5
    return w


def _spacing(x):
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        raise ValueError("need a uniform grid with at least two points")
    dx = (x[-1] - x[0]) / (x.size - 1)
    if not np.allclose(np.diff(x), dx, rtol=1e-9, atol=0.0):
        raise ValueError("grid must be uniform")
    return dx


def heat_apply(h, t, x, dx=None):
    """P_t h on the points ``x``.

    ``h`` is either an array sampled on the uniform grid ``x`` (extended by its
    edge values) or a callable, which is then sampled wherever the kernel needs it.
    A callable may be applied at arbitrary points if ``dx`` is given.
    """
    x = np.asarray(x, dtype=float)
    if callable(h):
        if dx is None:
            dx = _spacing(x)
        w = heat_kernel_weights(t, dx)
        half = (w.size - 1) // 2
        if x.size >= 2 and np.allclose(np.diff(x), dx, rtol=1e-9, atol=0.0):
            ext = x[0] + np.arange(-half, x.size + half) * dx
            return fftconvolve(np.asarray(h(ext), dtype=float), w, mode="valid")
        pts = x[..., None] + np.arange(-half, half + 1) * dx
        return np.asarray(h(pts), dtype=float) @ w
    dx = _spacing(x) if dx is None else dx
    w = heat_kernel_weights(t, dx)
    half = (w.size - 1) // 2
    ext = np.pad(np.asarray(h, dtype=float), half, mode="edge")
    return fftconvolve(ext, w, mode="valid")


def _gradient(values, dx):
    return np.gradient(values, dx, axis=-1)


def _interior_sup_gradient(values, dx):
    g = np.abs(_gradient(values, dx))
    return float(g[..., 2:-2].max()) if g.shape[-1] > 4 else 0.0


@dataclass(frozen=True)
class KernelBoundReport:
    times: tuple
    grad_sups: tuple
    constants: tuple
    spread: float
    passed: bool


def kernel_bound_check(h, alpha, t_list, x, seminorm=None, max_spread=2.0):
    """Implied constant of ||grad P_t h||_0 <= C [h]_alpha t^((alpha-1)/2) over ``t_list``.

    ``seminorm`` defaults to ``h.holder_seminorm(alpha)`` for a SpaceProfile. The
    check passes when max/min of the implied constants is at most ``max_spread``.
    """
    if seminorm is None:
        seminorm = h.holder_seminorm(alpha)
    dx = _spacing(x)
    sups, consts = [], []
    flat = callable(getattr(h, "is_state_independent", None)) and h.is_state_independent()
    for t in t_list:
        # a constant profile stays constant; skip the convolution round-off
        sup = 0.0 if flat else _interior_sup_gradient(heat_apply(h, t, x), dx)
        sups.append(sup)
        consts.append(0.0 if seminorm == 0.0 else sup * t ** ((1.0 - alpha) / 2.0) / seminorm)
    cmax, cmin = max(consts), min(consts)
    if cmax == 0.0:
        spread, passed = 1.0, True
    else:
        spread = cmax / cmin if cmin > 0.0 else math.inf
        passed = spread <= max_spread
    return KernelBoundReport(tuple(t_list), tuple(sups), tuple(consts), spread, passed)


@dataclass(frozen=True)
class FieldGrid:
    """Space-time grid: M uniform time steps on [0, T] and N points on [-R, R]."""

    horizon: float = 1.0
    time_steps: int = 64
    radius: float = 8.0
    points: int = 513

    def __post_init__(self):
        if self.time_steps < 8:
            raise ValueError("need at least 8 time steps")
        if self.points < 8 or self.radius <= 0.0 or self.horizon <= 0.0:
            raise ValueError("invalid field grid")

    @property
    def dt(self):
        return self.horizon / self.time_steps

    @property
    def dx(self):
        return 2.0 * self.radius / (self.points - 1)

    def times(self):
        return np.arange(self.time_steps + 1) * self.dt

    def x(self):
        return np.linspace(-self.radius, self.radius, self.points)

    @staticmethod
    def min_radius(horizon, displacement):
        """R >= 4 (1 + displacement + sqrt(T)); displacement bounds |int_0^T b dt|."""
        return 4.0 * (1.0 + displacement + math.sqrt(horizon))

    @classmethod
    def auto(cls, horizon=1.0, time_steps=64, displacement=0.0, radius=None, points=None):
        """Smallest admissible grid: radius from the leakage rule, dx from the kernel rule."""
        if radius is None:
            radius = cls.min_radius(horizon, displacement)
        if points is None:
            dx_max = math.sqrt(horizon / time_steps / 2.0) / RESOLUTION
            points = int(math.ceil(2.0 * radius / dx_max)) + 1
        return cls(horizon, time_steps, radius, points)


@dataclass(frozen=True, eq=False)
class ScalarField1D:
    grid: FieldGrid
    values: np.ndarray
    iterations: int = 0
    residual: float = 0.0

    def times(self):
        return self.grid.times()

    def x(self):
        return self.grid.x()

    def gradient(self):
        return _gradient(self.values, self.grid.dx)


@dataclass(frozen=True)
class PdeParams:
    lam: float = 1.0
    tol: float = 1e-10
    max_iterations: int = 200

    def __post_init__(self):
        if self.lam <= 0.0:
            raise ValueError("lambda must be positive")
        if self.tol <= 0.0:
            raise ValueError("tolerance must be positive")


def drift_displacement(spec):
    """A sup|h| int_0^T g: a bound on the drift's total displacement."""
    if spec is None or spec.is_zero():
        return 0.0
    return abs(spec.amplitude) * spec.space.sup_bound() * time_integral(spec.time, 1.0, 0.0, spec.horizon)


def _step_average_g(spec, times, reverse):
    dt = np.diff(times)
    if reverse:
        T = times[-1]
        return time_integral(spec.time, 1.0, np.maximum(T - times[1:], 0.0), T - times[:-1]) / dt
    return spec.step_integrals(times) / dt


class _Separable:
    """A(t) * h(x) sampled on the extended grid, with step-averaged A(t)."""

    def __init__(self, field, grid, x_ext, reverse):
        times = grid.times()
        if field is None:
            self.zero = True
            return
        if isinstance(field, DriftSpec):
            if field.dimension != 1:
                raise ValueError("the Kolmogorov solver is one-dimensional")
            if abs(field.horizon - grid.horizon) > 1e-12 * grid.horizon:
                raise ValueError("drift horizon and field grid horizon differ")
            self.zero = field.is_zero()
            if self.zero:
                return
            self.amp = field.amplitude * _step_average_g(field, times, reverse)
            self.h = np.asarray(field.space(x_ext), dtype=float)
        else:
            # f(t, x): generic callable, sampled at subinterval midpoints.
            self.zero = False
            mid = 0.5 * (times[:-1] + times[1:])
            if reverse:
                mid = times[-1] - mid
            self.amp = np.ones(mid.size)
            self.h = None
            self.rows = np.stack([np.asarray(field(t, x_ext), dtype=float) for t in mid])

    def rows_on(self, n_rows):
        if self.h is None:
            return self.rows[:n_rows]
        return self.amp[:n_rows, None] * self.h[None, :]


def mild_fixed_point(b, f, params, grid, reverse_time=False, v_init=None):
    """Fixed point of the mild map; returns v with v(0, .) = 0.

    ``b`` and ``f`` are one-dimensional DriftSpecs (or None for zero); ``f`` may
    also be a callable f(t, x). With ``reverse_time`` both are read at T - t,
    which turns the backward terminal-value problem into this forward one.
    Iterates from v = 0 until sup|T v - v| < tol and returns that v.
    """
    M, dt, dx = grid.time_steps, grid.dt, grid.dx
    x = grid.x()
    kernels = [heat_kernel_weights((lag - 0.5) * dt, dx) for lag in range(1, M + 1)]
    half = (kernels[-1].size - 1) // 2
    x_ext = x[0] + np.arange(-half, x.size + half) * dx
    drift = _Separable(b, grid, x_ext, reverse_time)
    forcing = _Separable(f, grid, x_ext, reverse_time)
    lam = params.lam
    # int over one subinterval of exp(-lam (t_i - r)) for lag = i - k.
    lags = np.arange(1, M + 1)
    c = np.exp(-lam * (lags - 1) * dt) * (-np.expm1(-lam * dt)) / lam

    base = forcing.rows_on(M) if not forcing.zero else np.zeros((M, x_ext.size))
    drift_rows = drift.rows_on(M) if not drift.zero else None

    def apply(v):
        if drift_rows is None:
            src = base
        else:
            grad = _gradient(v, dx)
            gmid = 0.5 * (grad[:-1] + grad[1:])
            src = base + drift_rows * np.pad(gmid, ((0, 0), (half, half)), mode="edge")
        out = np.zeros((M + 1, x.size))
        for lag in range(1, M + 1):
            w = kernels[lag - 1]
            h_l = (w.size - 1) // 2
            rows = src[: M - lag + 1, half - h_l : src.shape[1] - (half - h_l)]
            conv = fftconvolve(rows, w[None, :], mode="valid", axes=1)
            out[lag:] += c[lag - 1] * conv
        return out

    v = np.zeros((M + 1, x.size)) if v_init is None else np.array(v_init, dtype=float)
    residual = math.inf
    for it in range(1, params.max_iterations + 1):
        tv = apply(v)
        residual = float(np.abs(tv - v).max())
        if residual < params.tol:
            return ScalarField1D(grid, v, it, residual)
        if not np.isfinite(residual):
            break
        v = tv
    raise NonConvergenceError(
        f"mild fixed point did not converge in {params.max_iterations} iterations "
        f"(last residual {residual:.3g}); increase lambda or refine the grid",
        residual=residual,
        iterations=params.max_iterations,
    )


def gradient_sup(field):
    """sup over the grid of |dv/dx| (central differences), outer two columns excluded."""
    return _interior_sup_gradient(field.values, field.grid.dx)


@dataclass(frozen=True)
class SweepRow:
    lam: float
    sup_grad: float
    iterations: int
    residual: float


def lambda_sweep(b, lambda_list, grid, f="b", tol=1e-10, max_iterations=200, reverse_time=True):
    """sup_t ||grad V(t)||_0 for each lambda, with forcing f = b by default.

    ``reverse_time`` maps the backward problem with terminal value 0 onto the
    forward solver (the time-reversed field has the same gradient sup).
    """
    lams = [float(l) for l in lambda_list]
    if any(b2 <= a2 for a2, b2 in zip(lams, lams[1:])):
        raise ValueError("lambda values must be strictly increasing")
    forcing = b if isinstance(f, str) and f == "b" else f
    rows = []
    for lam in lams:
        field = mild_fixed_point(b, forcing, PdeParams(lam, tol, max_iterations), grid, reverse_time)
        rows.append(SweepRow(lam, gradient_sup(field), field.iterations, field.residual))
    return rows
