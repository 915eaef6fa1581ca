import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lowreg_em.brownian import (
    BrownianPath,
    GridSpec,
    increment,
    kappa,
    refine_bridge,
    sample_path,
    sample_paths,
    standard_normals,
    value_at,
)
from lowreg_em.errors import NodeError


def test_level_zero_has_two_nodes():
    path = sample_path(11, 0, GridSpec(1.0, 0, 2))
    assert path.values.shape == (2, 2)
    assert not path.values[0].any()


def test_deterministic():
    grid = GridSpec(2.0, 6, 3)
    a = sample_path(5, 9, grid)
    b = sample_path(5, 9, grid)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_path(5, 10, grid).values)
    assert not np.array_equal(a.values, sample_path(6, 9, grid).values)


def test_terminal_variance():
    B = sample_paths(0, range(100_000), GridSpec(1.0, 4, 1))
    var = B[:, -1, 0].var(ddof=1)
    assert 0.97 <= var <= 1.03


def test_increment_covariance():
    # independent increments with variance equal to the step
    B = sample_paths(1, range(40_000), GridSpec(1.0, 3, 1))[..., 0]
    dB = np.diff(B, axis=1)
    cov = np.cov(dB.T)
    np.testing.assert_allclose(np.diag(cov), 1 / 8, rtol=0.04)
    off = cov[~np.eye(8, dtype=bool)]
    assert np.max(np.abs(off)) < 0.004


def test_refine_noop():
    path = sample_path(0, 3, GridSpec(1.0, 4, 1))
    assert refine_bridge(path, 4) is path


def test_refine_preserves_nodes():
    path = sample_path(2, 7, GridSpec(1.0, 2, 2))
    fine = refine_bridge(path, 3)
    assert np.array_equal(fine.values[::2], path.values)
    assert fine.level == 3


def test_refine_matches_direct_sampling():
    # bridging down to a level equals sampling at that level directly
    coarse = sample_path(4, 12, GridSpec(1.5, 3, 2))
    direct = sample_path(4, 12, GridSpec(1.5, 9, 2))
    assert np.array_equal(refine_bridge(coarse, 9).values, direct.values)
    assert np.array_equal(refine_bridge(refine_bridge(coarse, 5), 9).values, direct.values)


def test_midpoint_residual_variance():
    B = sample_paths(3, range(100_000), GridSpec(1.0, 1, 1))[..., 0]
    residual = B[:, 1] - 0.5 * (B[:, 0] + B[:, 2])
    assert residual.var(ddof=1) == pytest.approx(0.25, abs=0.01)


def test_bridge_does_not_change_terminal_law():
    B = sample_paths(8, range(50_000), GridSpec(1.0, 0, 1))[..., 0]
    fine = sample_paths(8, range(50_000), GridSpec(1.0, 5, 1))[..., 0]
    assert np.array_equal(B[:, -1], fine[:, -1])


def test_standard_normals_moments():
    z = standard_normals(0, 0, 20, 400_000)
    assert abs(z.mean()) < 0.01
    assert z.var() == pytest.approx(1.0, abs=0.01)
    assert np.all(np.isfinite(z))


@pytest.mark.parametrize("t,expected", [(0.3, 0.25), (0.0, 0.0), (0.999, 0.75), (0.75, 0.75), (1.0, 1.0)])
def test_kappa_examples(t, expected):
    assert kappa(4, t, 1.0) == expected


@given(n=st.integers(1, 4096), t=st.floats(0.0, 1.0), horizon=st.floats(0.1, 10.0))
@settings(max_examples=300, deadline=None)
def test_kappa_properties(n, t, horizon):
    t = t * horizon
    k = kappa(n, t, horizon)
    assert k <= t
    assert t - k < horizon / n * (1 + 1e-9)
    m = k * n / horizon
    assert abs(m - round(m)) < 1e-6


@given(t=st.integers(0, 64))
def test_kappa_is_identity_on_nodes(t):
    assert kappa(64, t / 64, 1.0) == t / 64


def test_kappa_rejects_bad_arguments():
    with pytest.raises(ValueError):
        kappa(0, 0.5, 1.0)
    with pytest.raises(ValueError):
        kappa(4, 1.5, 1.0)


def test_value_and_increment():
    path = sample_path(0, 0, GridSpec(1.0, 5, 2))
    assert not value_at(path, 0.0).any()
    assert not increment(path, 0.5, 0.5).any()
    assert np.array_equal(increment(path, 0.0, 1.0), value_at(path, 1.0))
    assert np.array_equal(increment(path, 0.25, 0.75), path.values[24] - path.values[8])
    with pytest.raises(NodeError):
        value_at(path, 0.01)
    with pytest.raises(NodeError):
        increment(path, 0.0, 2.0)


@given(level=st.integers(0, 8), coarse=st.integers(0, 8), seed=st.integers(0, 2 ** 32), stream=st.integers(0, 10 ** 6))
@settings(max_examples=40, deadline=None)
def test_restriction_is_exact(level, coarse, seed, stream):
    coarse = min(coarse, level)
    fine = sample_path(seed, stream, GridSpec(1.0, level, 1))
    assert np.array_equal(fine.restrict(coarse).values, sample_path(seed, stream, GridSpec(1.0, coarse, 1)).values)


def test_path_is_read_only():
    path = sample_path(0, 0, GridSpec(1.0, 3, 1))
    with pytest.raises(ValueError):
        path.values[1, 0] = 1.0
    with pytest.raises(ValueError):
        BrownianPath(GridSpec(1.0, 3, 1), np.zeros((5, 1)))
