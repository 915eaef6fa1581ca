"""Monte Carlo checks of the occupation-time germ

    A_{s,t} = int_s^t [b(r, x + B_{kappa_n(r)}) - b(r, x + B_r)] dr

and of its conditional expectation given F_{s_-}, computed through the heat
semigroup. The germ is evaluated on a Brownian grid at least four times finer
than the scheme grid: the frozen term is exact per coarse step, the running
term uses the trapezoid rule in space with exact integrals of g in time.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .brownian import GridSpec, kappa, sample_paths
from .drift import time_integral
from .errors import ResolutionError
from .kolmogorov import heat_apply
from .norms import lp_mean, rate_fit

MIN_REFINEMENT = 4
_GAUSS_NODES = 8


def _node(times, t):
    step = times[1] - times[0]
    k = int(round(t / step))
    if k < 0 or k >= times.size or abs(times[k] - t) > 1e-9 * step:
        raise ResolutionError(f"t = {t!r} is not a node of the evaluation grid")
    return k


def occupation_germs(spec, B, times, n, s, t, x=0.0):
    """Germ values for every path of ``B`` (shape (M, N + 1, d)); returns (M, d)."""
    B = np.asarray(B, dtype=float)
    if B.ndim == 2:
        B = B[None]
    steps = times.size - 1
    if steps % n or steps // n < MIN_REFINEMENT:
        raise ResolutionError(
            f"evaluation grid of {steps} steps must refine n = {n} by a factor >= {MIN_REFINEMENT}"
        )
    i, j = _node(times, s), _node(times, t)
    if j < i:
        raise ValueError("need s <= t")
    out = np.zeros((B.shape[0], B.shape[2]))
    if j == i or spec.is_state_independent():
        return out
    K = steps // n
    w = spec.amplitude * (spec.step_integrals(times) if spec.time.singular else np.diff(times) * 1.0)
    w = w[i:j]
    h = spec.space
    # frozen term: one h evaluation per coarse cell, weighted by the cell's share of [s, t)
    cells = np.arange(i, j) // K
    starts = np.flatnonzero(np.r_[True, cells[1:] != cells[:-1]])
    cell_w = np.add.reduceat(w, starts)
    frozen = np.einsum("c,mcd->md", cell_w, h(x + B[:, cells[starts] * K]))
    hv = h(x + B[:, i : j + 1])
    running = np.einsum("k,mkd->md", w, 0.5 * (hv[:, :-1] + hv[:, 1:]))
    return frozen - running


def occupation_germ(spec, path, n, s, t, x=0.0):
    """Germ on one BrownianPath; the path grid must refine n by at least 4."""
    return occupation_germs(spec, path.values[None], path.times(), n, s, t, x)[0]


def conditional_germ(spec, x_base, n, s_minus, s, t, nodes=_GAUSS_NODES, points_per_sigma=16):
    """E[A_{s,t} | B_{s_-} = x_base] = int_s^t [P_{kappa(r)-s_-} - P_{r-s_-}] b(r, .)(x_base) dr.

    Needs s_minus < kappa_n(s) so both semigroup times are positive. The interval is
    split at grid points of the n-step mesh; on each piece the frozen term is integrated
    exactly in g and the running term by Gauss-Legendre.
    """
    if spec.dimension != 1:
        raise ValueError("conditional_germ is one-dimensional")
    T = spec.horizon
    if not 0.0 <= s_minus < kappa(n, s, T) or not s <= t <= T:
        raise ValueError("need 0 <= s_minus < kappa_n(s) and s <= t <= T")
    if spec.is_state_independent() or t == s:
        return 0.0
    h = spec.space
    x = np.array([float(x_base)])

    def heat(tau):
        return float(heat_apply(h, tau, x, dx=math.sqrt(tau) / points_per_sigma)[0])

    mesh = T / n
    cuts = [s] + [k * mesh for k in range(int(math.floor(s / mesh)) + 1, n) if s < k * mesh < t] + [t]
    gl_x, gl_w = np.polynomial.legendre.leggauss(nodes)
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b <= a:
            continue
        k_a = kappa(n, a, T)
        total += time_integral(spec.time, 1.0, a, b) * heat(k_a - s_minus)
        r = 0.5 * (b - a) * gl_x + 0.5 * (a + b)
        g = spec.time(r)
        total -= 0.5 * (b - a) * sum(wi * gi * heat(ri - s_minus) for wi, gi, ri in zip(gl_w, g, r))
    return spec.amplitude * total


def delta_check(germ, s, u, t):
    """delta A_{s,u,t} = A_{s,t} - A_{s,u} - A_{u,t} for any germ callable (s, t) -> value."""
    return np.asarray(germ(s, t)) - np.asarray(germ(s, u)) - np.asarray(germ(u, t))


@dataclass(frozen=True)
class GermRow:
    kind: str
    n: int
    s: float
    t: float
    p: float
    norm: float
    stderr: float


def default_fine_level(n_list):
    return int(math.log2(max(n_list))) + 5


def germ_norm_table(spec, p, n_list, interval_list, paths, seed=0, fine_level=None, first_stream=0, chunk=1000):
    """Monte Carlo L^p norms of the occupation germ for every (n, interval) pair."""
    n_list = [int(n) for n in n_list]
    if fine_level is None:
        fine_level = default_fine_level(n_list)
    grid = GridSpec(spec.horizon, fine_level, spec.dimension)
    times = grid.times()
    mags = {(n, iv): [] for n in n_list for iv in map(tuple, interval_list)}
    for lo in range(first_stream, first_stream + paths, chunk):
        streams = range(lo, min(lo + chunk, first_stream + paths))
        B = sample_paths(seed, streams, grid)
        for (n, (s, t)) in mags:
            germs = occupation_germs(spec, B, times, n, s, t)
            mags[(n, (s, t))].append(np.linalg.norm(germs, axis=-1))
    rows = []
    for (n, (s, t)), chunks in mags.items():
        est = lp_mean(np.concatenate(chunks), p)
        rows.append(GermRow("occupation", n, float(s), float(t), float(p), est.value, est.stderr))
    return rows


@dataclass(frozen=True)
class GermStudy:
    rows: tuple
    n_fit: object
    interval_fit: object


def germ_scaling_study(spec, p, n_list, interval_list, paths, seed=0, fine_level=None):
    """Norm table plus two log-log fits.

    ``n_fit`` regresses the norm on n at the first interval (rate = decay exponent in n).
    ``interval_fit`` regresses on 1/(t - s) at the first n, so its rate is the growth
    exponent in t - s; it is None with fewer than three intervals.
    Raises DegenerateFitError when the norms vanish (e.g. zero drift).
    """
    intervals = [tuple(iv) for iv in interval_list]
    rows = germ_norm_table(spec, p, n_list, intervals, paths, seed, fine_level)
    first_iv, first_n = intervals[0], int(n_list[0])
    n_pts = [(r.n, r.norm) for r in rows if (r.s, r.t) == first_iv]
    n_fit = rate_fit(n_pts)
    interval_fit = None
    if len(intervals) >= 3:
        iv_pts = [(1.0 / (r.t - r.s), r.norm) for r in rows if r.n == first_n]
        interval_fit = rate_fit(iv_pts)
    return GermStudy(tuple(rows), n_fit, interval_fit)

