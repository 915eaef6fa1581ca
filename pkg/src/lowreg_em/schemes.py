"""Euler-Maruyama schemes and Picard iteration for dX = b(t, X) dt + dB.

All schemes carry the accumulated drift separately from the noise,
X_k = x0 + Y_k + B_k, so a zero drift reproduces x0 + B exactly. The batch
kernels act on arrays of shape (M, n + 1, d) holding M coupled paths.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .brownian import GridSpec, refine_bridge
from .errors import FrozenTimeSingularityError, GridMismatchError

SCHEME_TAGS = ("polygonal", "classical", "reference", "picard")


@dataclass(frozen=True, eq=False)
class DiscretePath:
    grid: GridSpec
    states: np.ndarray
    scheme_tag: str
    x0: np.ndarray
    iteration: int | None = None

    def __post_init__(self):
        states = np.asarray(self.states, dtype=float)
        if states.shape != (self.grid.steps + 1, self.grid.dimension):
            raise ValueError("states must hold one d-vector per grid node")
        if self.scheme_tag not in SCHEME_TAGS:
            raise ValueError(f"unknown scheme tag {self.scheme_tag!r}")
        states.setflags(write=False)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "x0", _as_x0(self.x0, self.grid.dimension))

    def times(self):
        return self.grid.times()

    def restrict(self, level):
        if level > self.grid.level:
            raise GridMismatchError("cannot restrict to a finer grid")
        stride = 2 ** (self.grid.level - level)
        return DiscretePath(self.grid.at_level(level), self.states[::stride], self.scheme_tag, self.x0, self.iteration)


def _as_x0(x0, d):
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        x0 = np.full(d, float(x0))
    if x0.shape != (d,):
        raise ValueError(f"x0 must be a scalar or a vector of length {d}")
    return x0


def _level_of(n):
    level = int(n).bit_length() - 1
    if n < 1 or 2 ** level != n:
        raise ValueError(f"n = {n} is not a power of two")
    return level


def _batch(B):
    B = np.asarray(B, dtype=float)
    return (B[None], True) if B.ndim == 2 else (B, False)


def drift_weights(spec, times, classical=False, first_step_average=False):
    """Per-step multiplier of h(X_k): A int g (polygonal) or A dt g(t_k) (classical)."""
    dt = np.diff(times)
    if not classical or not spec.time.singular:
        # For g = 1 both schemes share the same weights bit for bit.
        weights = spec.step_integrals(times) if spec.time.singular else dt * 1.0
        return spec.amplitude * weights
    if not first_step_average:
        raise FrozenTimeSingularityError(
            "classical Euler-Maruyama freezes g at t = 0 where t^-beta is infinite; "
            "enable first_step_average to use the step mean instead"
        )
    g_left = np.empty_like(dt)
    g_left[1:] = spec.time(times[1:-1])
    g_left[0] = spec.step_integrals(times[:2])[0] / dt[0]
    return spec.amplitude * dt * g_left


def scheme_batch(spec, B, times, x0, classical=False, first_step_average=False):
    """Run the polygonal (or classical) scheme on every path of ``B``."""
    B, squeeze = _batch(B)
    x0 = _as_x0(x0, B.shape[-1])
    if spec.is_zero():
        out = x0 + B
        return out[0] if squeeze else out
    w = drift_weights(spec, times, classical, first_step_average)
    if spec.is_state_independent():
        # h is constant, so the drift sum is a plain cumulative sum.
        y = np.concatenate([[0.0], np.cumsum(w * spec.space.level)])
        out = x0 + y[None, :, None] + B
        return out[0] if squeeze else out
    m, n1, d = B.shape
    h = spec.space
    Y = np.zeros((m, n1, d))
    y = np.zeros((m, d))
    x = x0 + B[:, 0]
    for k in range(n1 - 1):
        y = y + w[k] * h(x)
        Y[:, k + 1] = y
        x = x0 + y + B[:, k + 1]
    out = x0 + Y + B
    return out[0] if squeeze else out


def picard_batch(spec, B, times, prev, x0):
    """One Picard sweep: x0 + sum_{i<j} A int_{t_i}^{t_{i+1}} g * h(prev_i) + B_j."""
    B, squeeze = _batch(B)
    prev = np.asarray(prev, dtype=float)
    if squeeze:
        prev = prev[None]
    if prev.shape != B.shape:
        raise GridMismatchError("previous iterate and Brownian path live on different grids")
    x0 = _as_x0(x0, B.shape[-1])
    if spec.is_zero():
        out = x0 + B
    else:
        w = spec.amplitude * (spec.step_integrals(times) if spec.time.singular else np.diff(times) * 1.0)
        incr = w[None, :, None] * spec.space(prev[:, :-1])
        y = np.concatenate([np.zeros_like(incr[:, :1]), np.cumsum(incr, axis=1)], axis=1)
        out = x0 + y + B
    return out[0] if squeeze else out


def _coarse_values(path, n):
    level = _level_of(n)
    if level > path.level:
        raise GridMismatchError(f"path level {path.level} is coarser than log2(n) = {level}")
    return path.restrict(level)


def em_polygonal(spec, path, n, x0):
    """X_{k+1} = X_k + A (int_{t_k}^{t_{k+1}} g) h(X_k) + (B_{k+1} - B_k)."""
    coarse = _coarse_values(path, n)
    states = scheme_batch(spec, coarse.values, coarse.times(), x0)
    return DiscretePath(coarse.grid, states, "polygonal", x0)


def em_classical(spec, path, n, x0, first_step_average=False):
    """X_{k+1} = X_k + (T/n) b(t_k, X_k) + (B_{k+1} - B_k)."""
    coarse = _coarse_values(path, n)
    states = scheme_batch(spec, coarse.values, coarse.times(), x0, True, first_step_average)
    return DiscretePath(coarse.grid, states, "classical", x0)


def reference_solution(spec, path, ref_level, x0):
    """Polygonal scheme on the bridge-refined level-``ref_level`` path."""
    fine = refine_bridge(path, ref_level)
    states = scheme_batch(spec, fine.values, fine.times(), x0)
    return DiscretePath(fine.grid, states, "reference", x0)


def picard_step(spec, path, prev):
    if path.grid.horizon != prev.grid.horizon or path.level < prev.grid.level:
        raise GridMismatchError("Brownian path does not cover the iterate's grid")
    B = path.restrict(prev.grid.level)
    states = picard_batch(spec, B.values, B.times(), prev.states, prev.x0)
    k = 1 if prev.iteration is None else prev.iteration + 1
    return DiscretePath(prev.grid, states, "picard", prev.x0, k)


def picard_sequence(spec, path, x0, grid, iterations):
    """[X^(0), ..., X^(K)] with X^(0) = x0 + B on ``grid``."""
    if iterations < 0:
        raise ValueError("iterations must be >= 0")
    if grid.horizon != path.grid.horizon or grid.level > path.level:
        raise GridMismatchError("Brownian path does not cover the requested grid")
    B = path.restrict(grid.level)
    x0 = _as_x0(x0, grid.dimension)
    seq = [DiscretePath(grid, x0 + B.values, "picard", x0, 0)]
    for _ in range(iterations):
        seq.append(picard_step(spec, path, seq[-1]))
    return seq
