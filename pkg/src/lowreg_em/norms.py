"""Path norms, weighted Hölder seminorms, Monte Carlo L^p statistics and rate fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import DegenerateFitError, DegenerateWeightError, EmptySampleError

BATCHES = 16
FULL_PAIR_LIMIT = 2 ** 10


class Estimate(NamedTuple):
    value: float
    stderr: float


@dataclass(frozen=True, eq=False)
class PairedSample:
    """Differences D = X - X^n on the coarse nodes, one row per Monte Carlo path."""

    diff: np.ndarray
    times: np.ndarray
    n: int | None = None
    level: int | None = None
    streams: tuple = ()

    def __post_init__(self):
        diff = np.asarray(self.diff, dtype=float)
        if diff.ndim == 2:
            diff = diff[..., None]
        if diff.ndim != 3 or diff.shape[0] == 0 or diff.shape[1] == 0:
            raise EmptySampleError("a paired sample needs at least one path and one node")
        times = np.asarray(self.times, dtype=float)
        if times.shape != (diff.shape[1],):
            raise ValueError("times must match the node axis of diff")
        object.__setattr__(self, "diff", diff)
        object.__setattr__(self, "times", times)

    @property
    def paths(self):
        return self.diff.shape[0]


def _check_p(p):
    if p < 1.0:
        raise ValueError("p must be >= 1")


def lp_mean(values, p, batches=BATCHES):
    """(mean |v|^p)^(1/p) with a batch-means standard error (delta method)."""
    _check_p(p)
    v = np.abs(np.asarray(values, dtype=float)).ravel()
    if v.size == 0:
        raise EmptySampleError("no values")
    vp = v ** p
    m = float(vp.mean())
    if m == 0.0:
        return Estimate(0.0, 0.0)
    nb = min(batches, v.size)
    if nb < 2:
        return Estimate(m ** (1.0 / p), math.nan)
    means = np.array([b.mean() for b in np.array_split(vp, nb)])
    se_m = float(means.std(ddof=1) / math.sqrt(nb))
    return Estimate(m ** (1.0 / p), se_m * m ** (1.0 / p - 1.0) / p)


def path_sups(sample):
    """max over nodes of |D_t| for every path."""
    return np.linalg.norm(sample.diff, axis=-1).max(axis=1)


def sup_lp_norm(sample, p=2.0):
    """|| sup_t |D_t| ||_{L^p(Omega)} with its standard error."""
    return lp_mean(path_sups(sample), p)


def lp_sup_norm(sample, p=2.0):
    """sup_t || D_t ||_{L^p(Omega)}."""
    _check_p(p)
    mags = np.linalg.norm(sample.diff, axis=-1)
    return float(((mags ** p).mean(axis=0) ** (1.0 / p)).max())


def _weight_fn(weight):
    if callable(getattr(weight, "control_weight", None)):
        return weight.control_weight
    if callable(weight):
        return weight
    raise TypeError("weight must be a DriftSpec or a callable (s, t) -> w(s, t)^(1/q)")


def _lags(n_steps, pairs):
    if pairs == "all" or (pairs == "auto" and n_steps <= FULL_PAIR_LIMIT):
        return range(1, n_steps + 1)
    return [2 ** k for k in range(int(math.log2(n_steps)) + 1) if 2 ** k <= n_steps]


def weighted_holder_seminorms(diff, times, gamma, weight, pairs="auto"):
    """Per-path max over node pairs s < t of |D_t - D_s| / ((t - s)^gamma w(s, t)^(1/q)).

    ``weight`` is a DriftSpec (its ``control_weight``) or any callable giving
    w(s, t)^(1/q) for arrays of s and t. Up to 2^10 steps every pair is scanned;
    beyond that only pairs whose span is a power of two steps (``pairs="dyadic"``).
    Pairs with zero weight are skipped once D is checked to be constant there.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError("gamma must lie in (0, 1)")
    diff = np.asarray(diff, dtype=float)
    if diff.ndim == 2:
        diff = diff[..., None]
    times = np.asarray(times, dtype=float)
    wfn = _weight_fn(weight)
    n_steps = diff.shape[1] - 1
    best = np.zeros(diff.shape[0])
    for lag in _lags(n_steps, pairs):
        s, t = times[:-lag], times[lag:]
        denom = (t - s) ** gamma * np.asarray(wfn(s, t), dtype=float)
        incr = np.linalg.norm(diff[:, lag:] - diff[:, :-lag], axis=-1)
        zero = denom <= 0.0
        if np.any(zero):
            if np.any(incr[:, zero] > 0.0):
                raise DegenerateWeightError("control weight vanishes on a pair where D moves")
            denom = np.where(zero, np.inf, denom)
        best = np.maximum(best, (incr / denom).max(axis=1))
    return best


def weighted_holder_seminorm(diff, times, gamma, weight, pairs="auto"):
    """Single-path weighted Hölder seminorm; ``diff`` has shape (N + 1,) or (N + 1, d)."""
    diff = np.asarray(diff, dtype=float)
    if diff.ndim == 1:
        diff = diff[:, None]
    return float(weighted_holder_seminorms(diff[None], times, gamma, weight, pairs)[0])


@dataclass(frozen=True)
class RateFit:
    """Least squares of ln(error) on ln(n). ``rate`` is the negated slope."""

    points: tuple
    slope: float
    intercept: float
    r_squared: float
    stderr_slope: float
    residuals: tuple = field(default=(), repr=False)

    @property
    def rate(self):
        return -self.slope


def rate_fit(points):
    pts = [(float(n), float(e)) for n, e in points]
    if len(pts) < 3:
        raise DegenerateFitError("a rate fit needs at least three points")
    n = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    if np.any(n <= 0.0) or not np.all(np.isfinite(n)):
        raise DegenerateFitError("step counts must be positive")
    if np.any(err <= 0.0) or not np.all(np.isfinite(err)):
        raise DegenerateFitError("errors must be positive and finite")
    if len(set(n.tolist())) < len(n):
        raise DegenerateFitError("step counts must be distinct")
    x, y = np.log(n), np.log(err)
    xm, ym = x.mean(), y.mean()
    sxx = float(((x - xm) ** 2).sum())
    slope = float(((x - xm) * (y - ym)).sum() / sxx)
    intercept = float(ym - slope * xm)
    resid = y - (intercept + slope * x)
    ssr = float((resid ** 2).sum())
    sst = float(((y - ym) ** 2).sum())
    r2 = 1.0 - ssr / sst if sst > 0.0 else 1.0
    dof = len(x) - 2
    se = math.sqrt(ssr / dof / sxx) if dof > 0 else math.nan
    return RateFit(tuple(pts), slope, intercept, r2, se, tuple(resid.tolist()))
