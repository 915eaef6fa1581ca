"""Experiment runners. Each writes its CSVs plus a JSON ``manifest`` and returns the manifest.

Monte Carlo work is split into chunks of consecutive stream ids. Chunk boundaries
depend only on ``chunk_size``, chunks are computed independently (optionally in a
process pool) and reduced in chunk order, so the worker count never changes output.
"""

from __future__ import annotations

import csv
import json
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .. import __version__
from ..brownian import GridSpec, sample_paths
from ..errors import DegenerateFitError
from ..kolmogorov import FieldGrid, drift_displacement, lambda_sweep
from ..norms import lp_mean, rate_fit, weighted_holder_seminorms
from ..schemes import picard_batch, scheme_batch
from ..sewing import default_fine_level, occupation_germs
from .config import predicted_rate, validate_values

TOOL = "lowreg-em"
MANIFEST = "manifest"
EXACT_TOL = 1e-12

SCHEMAS = {
    "errors": ["n", "p", "gamma", "metric", "value", "stderr"],
    "fits": ["metric", "rate", "intercept", "r_squared", "stderr_slope", "predicted_rate"],
    "picard": ["k", "p", "metric", "value", "stderr"],
    "pde": ["lambda", "sup_grad", "iterations", "residual"],
    "sewing": ["kind", "n", "s", "t", "p", "norm", "stderr", "fit_exponent"],
}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    return "" if v is None else str(v)


def write_csv(path, header, rows):
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(v) for v in row])


def trajectory_header(d, symbol="X"):
    return ["t"] + [f"{symbol}_{k + 1}" for k in range(d)]


def _trajectory_rows(times, states):
    return [[t, *x] for t, x in zip(times.tolist(), np.asarray(states).tolist())]


def _chunks(first, count, size):
    return [(lo, min(lo + size, first + count)) for lo in range(first, first + count, size)]


def _map(fn, items, workers):
    if workers <= 1 or len(items) <= 1:
        return [fn(*item) for item in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, *zip(*items)))


def _reload(experiment, values):
    # workers rebuild the config from plain values; the seed is already resolved
    return validate_values(values, None, experiment, env={})


def _gate(value, threshold, passed):
    return {"value": value, "threshold": threshold, "pass": bool(passed)}


def _manifest(config, out_dir, files, gates, status, started, extra):
    manifest = {
        "tool": TOOL,
        "version": __version__,
        "experiment": config.experiment,
        "status": status,
        "config": config.as_dict(),
        "files": {k: v for k, v in sorted(files.items())},
        "schemas": {k: SCHEMAS.get(k) for k in sorted(files) if k in SCHEMAS},
        "seed": config.seed,
        "gates": gates,
        "all_gates_pass": all(g["pass"] for g in gates.values()),
        "wall_clock_seconds": time.perf_counter() - started,
    }
    manifest.update(extra)
    with open(os.path.join(out_dir, MANIFEST), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest


def _fit_or_none(points):
    try:
        return rate_fit(points)
    except DegenerateFitError:
        return None


# ---------------------------------------------------------------- rate


def _rate_chunk(values, lo, hi):
    config = _reload("rate", values)
    spec, p, gamma = config.drift, config["p"], config["gamma"]
    ref = config["ref_level"]
    classical = config["scheme"] == "classical"
    grid = GridSpec(config["horizon"], ref, spec.dimension)
    times = grid.times()
    B = sample_paths(config.seed, range(lo, hi), grid)
    # the reference is always the polygonal scheme on the fine grid
    X_ref = scheme_batch(spec, B, times, config["x0"])
    out = {}
    for level in config.levels:
        stride = 2 ** (ref - level)
        tc = times[::stride]
        X = scheme_batch(spec, B[:, ::stride], tc, config["x0"], classical, config["first_step_average"])
        D = X_ref[:, ::stride] - X
        mags = np.linalg.norm(D, axis=-1)
        cell = {"sup": mags.max(axis=1), "node_power_sum": (mags ** p).sum(axis=0)}
        if not math.isinf(spec.q) and not spec.is_zero():
            cell["holder"] = weighted_holder_seminorms(D, tc, gamma, spec)
        if lo == 0 and config["dump_trajectories"]:
            cell["trajectory"] = (tc, X[0])
        out[level] = cell
    if lo == 0 and config["dump_trajectories"]:
        out["reference"] = (times, X_ref[0])
    return out


def run_rate_experiment(config, out_dir, workers=1):
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    spec, p, gamma, M = config.drift, config["p"], config["gamma"], config.paths
    items = [(config.values, lo, hi) for lo, hi in _chunks(0, M, config["chunk_size"])]
    parts = _map(_rate_chunk, items, workers)

    rows, sup_pts, holder_pts, worst = [], [], [], 0.0
    for level in config.levels:
        n = 2 ** level
        sups = np.concatenate([part[level]["sup"] for part in parts])
        worst = max(worst, float(sups.max()))
        est = lp_mean(sups, p)
        rows.append([n, p, None, "sup_lp", est.value, est.stderr])
        sup_pts.append((n, est.value))
        node_sum = np.sum([part[level]["node_power_sum"] for part in parts], axis=0)
        rows.append([n, p, None, "lp_sup", float((node_sum / M).max() ** (1.0 / p)), None])
        if "holder" in parts[0][level]:
            est = lp_mean(np.concatenate([part[level]["holder"] for part in parts]), p)
            rows.append([n, p, gamma, "weighted_holder", est.value, est.stderr])
            holder_pts.append((n, est.value))
    files = {"errors": "errors.csv", "fits": "fits.csv"}
    write_csv(os.path.join(out_dir, files["errors"]), SCHEMAS["errors"], rows)

    predicted = predicted_rate(spec)
    gates, fit_rows, summary = {}, [], {"max_error": worst, "predicted_rate": predicted}
    if worst < EXACT_TOL:
        # zero or state-independent drift: the scheme is exact, no rate to fit
        status = "exact"
        gates["exact"] = _gate(worst, EXACT_TOL, True)
    else:
        status = "ok"
        fit = rate_fit(sup_pts)
        fit_rows.append(["sup_lp", fit.rate, fit.intercept, fit.r_squared, fit.stderr_slope, predicted])
        summary.update(rate=fit.rate, r_squared=fit.r_squared)
        if config["gate.min_rate"] is not None:
            gates["rate"] = _gate(fit.rate, config["gate.min_rate"], fit.rate >= config["gate.min_rate"])
        if config["gate.min_r2"] is not None:
            gates["r_squared"] = _gate(fit.r_squared, config["gate.min_r2"], fit.r_squared >= config["gate.min_r2"])
        if holder_pts:
            hfit = rate_fit(holder_pts)
            fit_rows.append(["weighted_holder", hfit.rate, hfit.intercept, hfit.r_squared, hfit.stderr_slope, None])
            summary["holder_rate"] = hfit.rate
            if config["gate.min_holder_rate"] is not None:
                thr = config["gate.min_holder_rate"]
                gates["holder_rate"] = _gate(hfit.rate, thr, hfit.rate >= thr)
    write_csv(os.path.join(out_dir, files["fits"]), SCHEMAS["fits"], fit_rows)

    if config["dump_trajectories"]:
        d = spec.dimension
        for level in config.levels:
            name = f"trajectory_n{2 ** level}"
            files[name] = name + ".csv"
            write_csv(os.path.join(out_dir, files[name]), trajectory_header(d),
                      _trajectory_rows(*parts[0][level]["trajectory"]))
        files["trajectory_reference"] = "trajectory_reference.csv"
        write_csv(os.path.join(out_dir, files["trajectory_reference"]), trajectory_header(d),
                  _trajectory_rows(*parts[0]["reference"]))

    extra = {"streams": {"first": 0, "count": M}, "levels": config.levels, "ref_level": config["ref_level"],
             "summary": summary}
    return _manifest(config, out_dir, files, gates, status, started, extra)


# ---------------------------------------------------------------- picard


def _picard_chunk(values, lo, hi):
    config = _reload("picard", values)
    spec, x0 = config.drift, config["x0"]
    ref, level, K = config["ref_level"], config["picard.level"], config["picard.iterations"]
    top = max(ref, level)
    grid = GridSpec(config["horizon"], top, spec.dimension)
    times = grid.times()
    B = sample_paths(config.seed, range(lo, hi), grid)
    ref_stride, pic_stride = 2 ** (top - ref), 2 ** (top - level)
    X_ref = scheme_batch(spec, B[:, ::ref_stride], times[::ref_stride], x0)
    # compare on the coarser of the two grids
    common = min(ref, level)
    X_ref = X_ref[:, :: 2 ** (ref - common)]
    Bp, tp = B[:, ::pic_stride], times[::pic_stride]
    to_common = 2 ** (level - common)
    X = np.asarray(x0, dtype=float) + Bp
    distance = [np.linalg.norm(X[:, ::to_common] - X_ref, axis=-1).max(axis=1)]
    successive = []
    for _ in range(K):
        nxt = picard_batch(spec, Bp, tp, X, x0)
        successive.append(np.linalg.norm(nxt - X, axis=-1).max(axis=1))
        X = nxt
        distance.append(np.linalg.norm(X[:, ::to_common] - X_ref, axis=-1).max(axis=1))
    return {"distance": distance, "successive": successive}


def run_picard_experiment(config, out_dir, workers=1):
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    p, M, K = config["p"], config.paths, config["picard.iterations"]
    items = [(config.values, lo, hi) for lo, hi in _chunks(0, M, config["chunk_size"])]
    parts = _map(_picard_chunk, items, workers)

    dist = [lp_mean(np.concatenate([part["distance"][k] for part in parts]), p) for k in range(K + 1)]
    succ = [lp_mean(np.concatenate([part["successive"][k] for part in parts]), p) for k in range(K)]
    rows = [[k, p, "distance", e.value, e.stderr] for k, e in enumerate(dist)]
    rows += [[k, p, "successive", e.value, e.stderr] for k, e in enumerate(succ)]
    files = {"picard": "picard.csv"}
    write_csv(os.path.join(out_dir, files["picard"]), SCHEMAS["picard"], rows)

    # successive difference k compares iterates k and k + 1; ratios from iteration 2 on
    ratios = [succ[k + 1].value / succ[k].value for k in range(2, K - 1) if succ[k].value > EXACT_TOL]
    median_ratio = float(np.median(ratios)) if ratios else 0.0
    slack = [
        dist[k + 1].value - dist[k].value - 2.0 * math.hypot(dist[k].stderr, dist[k + 1].stderr)
        for k in range(K)
    ]
    worst_increase = max(slack) if slack else -math.inf
    gates = {"distance_non_increasing": _gate(worst_increase, 0.0, worst_increase <= 0.0)}
    if config["gate.max_picard_ratio"] is not None:
        thr = config["gate.max_picard_ratio"]
        gates["successive_ratio"] = _gate(median_ratio, thr, median_ratio <= thr)
    exact = K >= 1 and all(e.value < EXACT_TOL for e in dist[1:])
    status = "exact" if exact else "ok"
    extra = {"streams": {"first": 0, "count": M}, "ref_level": config["ref_level"],
             "picard_level": config["picard.level"], "iterations": K,
             "summary": {"median_successive_ratio": median_ratio, "final_distance": dist[-1].value}}
    return _manifest(config, out_dir, files, gates, status, started, extra)


# ---------------------------------------------------------------- pde


def pde_grid(config):
    spec = config.drift
    return FieldGrid.auto(config["horizon"], config["pde.time_steps"], drift_displacement(spec),
                          config["pde.radius"], config["pde.points"])


def run_pde_check(config, out_dir, workers=1):
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    spec = config.drift
    grid = pde_grid(config)
    sweep = lambda_sweep(spec, config["lambda_list"], grid, "b", config["pde.tol"], config["pde.max_iterations"])
    files = {"pde": "pde.csv"}
    write_csv(os.path.join(out_dir, files["pde"]), SCHEMAS["pde"],
              [[r.lam, r.sup_grad, r.iterations, r.residual] for r in sweep])
    grads = [r.sup_grad for r in sweep]
    if all(g == 0.0 for g in grads):
        status = "trivial-pass"
        gates = {"decreasing": _gate(0.0, 0.0, True)}
        if config["gate.max_sup_grad"] is not None:
            gates["final_below"] = _gate(0.0, config["gate.max_sup_grad"], True)
    else:
        status = "ok"
        decreasing = all(b < a for a, b in zip(grads, grads[1:]))
        gates = {"decreasing": _gate(max(b - a for a, b in zip(grads, grads[1:])) if len(grads) > 1 else 0.0,
                                     0.0, decreasing)}
        if config["gate.max_sup_grad"] is not None:
            thr = config["gate.max_sup_grad"]
            gates["final_below"] = _gate(grads[-1], thr, grads[-1] < thr)
    extra = {"grid": {"horizon": grid.horizon, "time_steps": grid.time_steps, "radius": grid.radius,
                      "points": grid.points},
             "summary": {"drift_holder_norm": spec.spatial_norm(), "sup_grad": grads}}
    return _manifest(config, out_dir, files, gates, status, started, extra)


# ---------------------------------------------------------------- sewing


def _sewing_fine_level(config):
    level = config["sewing.fine_level"]
    return default_fine_level(config["sewing.n_list"]) if level is None else int(level)


def _sewing_chunk(values, lo, hi):
    config = _reload("sewing-check", values)
    spec = config.drift
    grid = GridSpec(config["horizon"], _sewing_fine_level(config), spec.dimension)
    times = grid.times()
    B = sample_paths(config.seed, range(lo, hi), grid)
    out = []
    for s, t in config["sewing.intervals"]:
        for n in config["sewing.n_list"]:
            germs = occupation_germs(spec, B, times, n, s, t, config["x0"])
            out.append(np.linalg.norm(germs, axis=-1))
    return out


def run_sewing_check(config, out_dir, workers=1):
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    p, M = config["p"], config.paths
    n_list, intervals = config["sewing.n_list"], config["sewing.intervals"]
    items = [(config.values, lo, hi) for lo, hi in _chunks(0, M, config["chunk_size"])]
    parts = _map(_sewing_chunk, items, workers)

    rows, fits, cell = [], [], 0
    for s, t in intervals:
        ests = []
        for n in n_list:
            ests.append((n, lp_mean(np.concatenate([part[cell] for part in parts]), p)))
            cell += 1
        fit = _fit_or_none([(n, e.value) for n, e in ests])
        fits.append(fit)
        for n, e in ests:
            rows.append(["occupation", n, s, t, p, e.value, e.stderr, None if fit is None else fit.rate])
    files = {"sewing": "sewing.csv"}
    write_csv(os.path.join(out_dir, files["sewing"]), SCHEMAS["sewing"], rows)

    if all(r[5] == 0.0 for r in rows):
        status = "trivial-pass"
        gates = {"n_exponent": _gate(None, config["gate.min_rate"], True)}
    else:
        status = "ok"
        gates = {}
        rate = fits[0].rate if fits[0] is not None else None
        if config["gate.min_rate"] is not None:
            thr = config["gate.min_rate"]
            gates["n_exponent"] = _gate(rate, thr, rate is not None and rate >= thr)
    extra = {"streams": {"first": 0, "count": M}, "fine_level": _sewing_fine_level(config),
             "summary": {"n_exponents": [None if f is None else f.rate for f in fits]}}
    return _manifest(config, out_dir, files, gates, status, started, extra)


# ---------------------------------------------------------------- simulate


def run_simulate(config, out_dir, workers=1):
    started = time.perf_counter()
    os.makedirs(out_dir, exist_ok=True)
    spec = config.drift
    level, stream = max(config.levels), config["stream_id"]
    grid = GridSpec(config["horizon"], level, spec.dimension)
    times = grid.times()
    B = sample_paths(config.seed, [stream], grid)[0]
    X = scheme_batch(spec, B, times, config["x0"], config["scheme"] == "classical", config["first_step_average"])
    files = {"trajectory": "trajectory.csv", "brownian": "brownian.csv"}
    write_csv(os.path.join(out_dir, files["trajectory"]), trajectory_header(spec.dimension),
              _trajectory_rows(times, X))
    write_csv(os.path.join(out_dir, files["brownian"]), trajectory_header(spec.dimension, "B"),
              _trajectory_rows(times, B))
    extra = {"streams": {"first": stream, "count": 1}, "level": level}
    return _manifest(config, out_dir, files, {}, "ok", started, extra)


RUNNERS = {
    "rate": run_rate_experiment,
    "picard": run_picard_experiment,
    "pde-check": run_pde_check,
    "sewing-check": run_sewing_check,
    "simulate": run_simulate,
}


def run_experiment(config, out_dir=None, workers=1):
    out_dir = config["output_dir"] if out_dir is None else out_dir
    return RUNNERS[config.experiment](config, out_dir, workers)
