"""Euler-Maruyama schemes for additive-noise SDEs with drifts that are only Hölder in space
and integrable in time, with the Monte Carlo, PDE and sewing tools used to check their rates."""

__version__ = "0.1.0"

from .brownian import BrownianPath, GridSpec, kappa, refine_bridge, sample_path, sample_paths
from .drift import DriftSpec, SpaceProfile, TimeProfile, control_w, eval_drift, holder_seminorm_estimate
from .schemes import em_classical, em_polygonal, picard_sequence, reference_solution

__all__ = [
    "BrownianPath",
    "DriftSpec",
    "GridSpec",
    "SpaceProfile",
    "TimeProfile",
    "control_w",
    "em_classical",
    "em_polygonal",
    "eval_drift",
    "holder_seminorm_estimate",
    "kappa",
    "picard_sequence",
    "reference_solution",
    "refine_bridge",
    "sample_path",
    "sample_paths",
]
