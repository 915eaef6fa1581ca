"""Seedable Brownian paths on dyadic grids.

Paths are built top-down by midpoint (Lévy) construction: the terminal value
B_T is drawn at level 0 and the midpoints of level l-1 intervals at level l.
Every Gaussian comes from a Philox counter-based generator keyed by
``(seed, stream_id)`` with counter ``(0, 0, level, 0)``; the draw for midpoint
``j`` and component ``c`` is raw output number ``j * d + c``. A level-L path is
therefore a bit-exact restriction of any finer path from the same key, and
refining in any order reproduces the same nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import NodeError

_U53 = 2.0 ** -53
_NODE_RTOL = 1e-9


@dataclass(frozen=True)
class GridSpec:
    horizon: float = 1.0
    level: int = 0
    dimension: int = 1

    def __post_init__(self):
        if self.horizon <= 0.0:
            raise ValueError("horizon must be positive")
        if int(self.level) != self.level or self.level < 0:
            raise ValueError("level must be a non-negative integer")
        if int(self.dimension) != self.dimension or self.dimension < 1:
            raise ValueError("dimension must be a positive integer")

    @property
    def steps(self):
        return 2 ** self.level

    @property
    def step(self):
        return self.horizon / self.steps

    def times(self):
        return np.arange(self.steps + 1) * self.step

    def at_level(self, level):
        return GridSpec(self.horizon, level, self.dimension)

    def node_index(self, t):
        """Index of node ``t``; raises NodeError when ``t`` is not on the grid."""
        k = round(t / self.step)
        if k < 0 or k > self.steps or abs(k * self.step - t) > _NODE_RTOL * self.step:
            raise NodeError(f"t = {t!r} is not a node of the level-{self.level} grid")
        return k


def standard_normals(seed, stream_id, level, count):
    """``count`` N(0, 1) draws for the given structural key, via inverse CDF."""
    bitgen = np.random.Philox(key=[int(seed), int(stream_id)], counter=[0, 0, int(level), 0])
    raw = bitgen.random_raw(count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _U53
    return ndtri(u)


def _draws(seed, stream_ids, level, count):
    return np.stack([standard_normals(seed, sid, level, count) for sid in stream_ids])


def _refine_values(values, seed, stream_ids, grid_level, target_level, horizon):
    m, _, d = values.shape
    for level in range(grid_level + 1, target_level + 1):
        coarse_dt = horizon / 2 ** (level - 1)
        n_mid = 2 ** (level - 1)
        z = _draws(seed, stream_ids, level, n_mid * d).reshape(m, n_mid, d)
        mid = 0.5 * (values[:, :-1] + values[:, 1:]) + math.sqrt(coarse_dt / 4.0) * z
        fine = np.empty((m, 2 * n_mid + 1, d))
        fine[:, ::2] = values
        fine[:, 1::2] = mid
        values = fine
    return values


def sample_paths(seed, stream_ids, grid):
    """Node values for several streams at once; shape (len(stream_ids), 2^L + 1, d)."""
    stream_ids = [int(s) for s in stream_ids]
    d = grid.dimension
    z = _draws(seed, stream_ids, 0, d)
    values = np.zeros((len(stream_ids), 2, d))
    values[:, 1] = math.sqrt(grid.horizon) * z
    return _refine_values(values, seed, stream_ids, 0, grid.level, grid.horizon)


@dataclass(frozen=True, eq=False)
class BrownianPath:
    grid: GridSpec
    values: np.ndarray
    seed: int = 0
    stream_id: int = 0

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.shape != (self.grid.steps + 1, self.grid.dimension):
            raise ValueError(f"values must have shape {(self.grid.steps + 1, self.grid.dimension)}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def level(self):
        return self.grid.level

    def times(self):
        return self.grid.times()

    def value_at(self, t):
        return self.values[self.grid.node_index(t)].copy()

    def increment(self, s, t):
        i, j = self.grid.node_index(s), self.grid.node_index(t)
        if j < i:
            raise ValueError("increment needs s <= t")
        return self.values[j] - self.values[i]

    def restrict(self, level):
        """The same path seen on the coarser level-``level`` grid."""
        if level > self.level:
            raise ValueError("restrict only goes to coarser levels; use refine_bridge")
        stride = 2 ** (self.level - level)
        return BrownianPath(self.grid.at_level(level), self.values[::stride], self.seed, self.stream_id)


def sample_path(seed, stream_id, grid):
    values = sample_paths(seed, [stream_id], grid)[0]
    return BrownianPath(grid, values, seed, stream_id)


def refine_bridge(path, target_level):
    """Insert Brownian-bridge midpoints down to ``target_level``; existing nodes are kept."""
    if target_level < path.level:
        raise ValueError("target_level must be >= the current level")
    if target_level == path.level:
        return path
    values = _refine_values(
        path.values[None].copy(), path.seed, [path.stream_id], path.level, target_level, path.grid.horizon
    )[0]
    return BrownianPath(path.grid.at_level(target_level), values, path.seed, path.stream_id)


def value_at(path, t):
    return path.value_at(t)


def increment(path, s, t):
    return path.increment(s, t)


def kappa(n, t, horizon):
    """Left grid point floor(n t / T) T / n of the uniform n-step mesh, clamped to <= t."""
    if n < 1:
        raise ValueError("n must be >= 1")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > horizon * (1.0 + 1e-12)):
        raise ValueError(f"t must lie in [0, {horizon}]")
    # A few ulps of slack so that exact nodes are not pushed one cell to the left.
    k = np.floor(n * t / horizon * (1.0 + 4.0 * np.finfo(float).eps))
    out = np.minimum(k * horizon / n, t)
    return float(out) if out.ndim == 0 else out
