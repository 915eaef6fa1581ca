"""Experiment configuration: a flat text file of ``dotted.key = value`` lines.

Grammar, one setting per line::

    # comment
    drift.space.kind = weierstrass
    drift.space.params = {"exponent": 0.5, "terms": 12}
    drift.q = inf
    levels = [4, 5, 6, 7, 8, 9]

A value is parsed as JSON (numbers, "strings", lists, objects, true/false/null);
anything that is not valid JSON is taken as a bare string. Unknown keys and
duplicate keys are errors. Every violated invariant is reported with its line.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field, replace

from ..drift import DriftSpec, SpaceProfile, TimeProfile
from ..errors import ConfigError, InvalidSpecError

EXPERIMENTS = ("rate", "picard", "pde-check", "sewing-check", "simulate")
SEED_ENV = "LOWREG_EM_SEED"

# key -> default; None means "derived" (see ExperimentConfig.resolve)
DEFAULTS = {
    "experiment": None,
    "drift.space.kind": "zero",
    "drift.space.params": {},
    "drift.space.shift": None,
    "drift.time.kind": "one",
    "drift.time.beta": 0.0,
    "drift.amplitude": 1.0,
    "drift.target_norm": None,
    "drift.alpha": 0.5,
    "drift.q": "inf",
    "drift.dimension": 1,
    "horizon": 1.0,
    "x0": 0.0,
    "levels": [4, 5, 6, 7, 8, 9],
    "ref_level": None,
    "mc_paths": 1000,
    "p": 2.0,
    "gamma": 0.05,
    "lambda_list": [1.0, 4.0, 16.0, 64.0, 256.0],
    "seed": 0,
    "stream_id": 0,
    "output_dir": "results",
    "chunk_size": 250,
    "scheme": "polygonal",
    "first_step_average": False,
    "dump_trajectories": False,
    "picard.iterations": 8,
    "picard.level": None,
    "pde.time_steps": 64,
    "pde.points": None,
    "pde.radius": None,
    "pde.tol": 1e-10,
    "pde.max_iterations": 200,
    "sewing.n_list": [8, 16, 32, 64, 128],
    "sewing.intervals": [[0.0, 1.0]],
    "sewing.fine_level": None,
    "gate.min_rate": None,
    "gate.min_r2": 0.0,
    "gate.min_holder_rate": 0.1,
    "gate.max_picard_ratio": 0.75,
    "gate.max_sup_grad": 0.5,
}

GATE_KEYS = ("gate.min_rate", "gate.min_r2", "gate.min_holder_rate", "gate.max_picard_ratio", "gate.max_sup_grad")
SHIFTED_KINDS = ("weierstrass", "capped_power")
DEFAULT_SHIFT = 0.3
REF_SEPARATION = 6
MIN_PATHS = 100


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def parse_text(text):
    """Split config text into ``{key: value}`` and ``{key: line_number}``."""
    values, lines, problems = {}, {}, []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            problems.append(f"line {lineno}: expected 'key = value'")
            continue
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in DEFAULTS:
            problems.append(f"line {lineno}: unknown key {key!r}")
            continue
        if key in values:
            problems.append(f"line {lineno}: duplicate key {key!r} (first set on line {lines[key]})")
            continue
        values[key] = _parse_value(val.strip())
        lines[key] = lineno
    if problems:
        raise ConfigError(problems)
    return values, lines


def _as_q(value):
    if isinstance(value, str) and value.strip().lower() in ("inf", "infinity"):
        return math.inf
    return float(value)


def format_value(value):
    if isinstance(value, float) and math.isinf(value):
        return "inf"
    return json.dumps(value)


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict
    lines: dict = field(default_factory=dict)
    drift: DriftSpec | None = None

    def __getitem__(self, key):
        return self.values[key]

    @property
    def levels(self):
        return list(self.values["levels"])

    @property
    def seed(self):
        return int(self.values["seed"])

    @property
    def paths(self):
        return int(self.values["mc_paths"])

    def echo(self):
        """Canonical config text; parsing it back yields the same config."""
        return "".join(f"{k} = {format_value(self.values[k])}\n" for k in sorted(self.values))

    def as_dict(self):
        """JSON-safe copy of the resolved values (q = inf is written as "inf")."""
        out = {}
        for k in sorted(self.values):
            v = self.values[k]
            out[k] = "inf" if isinstance(v, float) and math.isinf(v) else v
        return out


def _where(lines, key):
    return f"line {lines[key]}" if key in lines else "default"


def validate_config(text, experiment=None, env=None):
    """Parse and validate config text; raises ConfigError listing every problem."""
    raw, lines = parse_text(text)
    return validate_values(raw, lines, experiment, env)


def validate_values(raw, lines=None, experiment=None, env=None):
    lines = dict(lines or {})
    env = os.environ if env is None else env
    problems = []
    values = {k: v for k, v in DEFAULTS.items()}
    values.update(raw)

    declared = raw.get("experiment")
    if experiment is None:
        experiment = declared
    if experiment not in EXPERIMENTS:
        raise ConfigError([f"{_where(lines, 'experiment')}: experiment must be one of {', '.join(EXPERIMENTS)}"])
    if declared is not None and declared != experiment:
        problems.append(f"{_where(lines, 'experiment')}: config is for {declared!r}, not {experiment!r}")
    values["experiment"] = experiment

    if env.get(SEED_ENV):
        try:
            values["seed"] = int(env[SEED_ENV])
        except ValueError:
            problems.append(f"environment: {SEED_ENV} must be an integer")

    def check(key, ok, message):
        if not ok:
            problems.append(f"{_where(lines, key)}: {key}: {message}")

    def number(key, kind=float):
        try:
            values[key] = kind(values[key])
            return True
        except (TypeError, ValueError):
            problems.append(f"{_where(lines, key)}: {key}: expected a {kind.__name__}")
            return False

    for key in ("drift.time.beta", "drift.amplitude", "drift.alpha", "horizon", "p", "gamma", "pde.tol"):
        number(key)
    for key in GATE_KEYS:
        # null disables a gate
        if values[key] is not None:
            number(key)
    for key in ("drift.dimension", "mc_paths", "seed", "stream_id", "chunk_size", "picard.iterations",
                "pde.time_steps", "pde.max_iterations"):
        if number(key, int) and values[key] < 0:
            problems.append(f"{_where(lines, key)}: {key}: must be non-negative")
    try:
        values["drift.q"] = _as_q(values["drift.q"])
    except (TypeError, ValueError):
        problems.append(f"{_where(lines, 'drift.q')}: drift.q: expected a number or 'inf'")

    kind = values["drift.space.kind"]
    if values["drift.space.shift"] is None:
        values["drift.space.shift"] = DEFAULT_SHIFT if kind in SHIFTED_KINDS else 0.0
    number("drift.space.shift")
    if not isinstance(values["drift.space.params"], dict):
        problems.append(f"{_where(lines, 'drift.space.params')}: drift.space.params: expected a JSON object")
        values["drift.space.params"] = {}

    levels = values["levels"]
    if not isinstance(levels, list) or not levels or not all(isinstance(l, int) and l >= 0 for l in levels):
        problems.append(f"{_where(lines, 'levels')}: levels: expected a non-empty list of non-negative integers")
        levels = []
    else:
        check("levels", levels == sorted(set(levels)), "levels must be distinct and sorted")
    top = max(levels) if levels else 0
    if values["ref_level"] is None:
        values["ref_level"] = top + REF_SEPARATION
    if number("ref_level", int) and levels and experiment in ("rate", "picard"):
        check(
            "ref_level",
            values["ref_level"] >= top + REF_SEPARATION,
            f"ref_level {values['ref_level']} must be >= max(levels) + {REF_SEPARATION} = {top + REF_SEPARATION}",
        )
    if values["picard.level"] is None:
        values["picard.level"] = values["ref_level"]
    number("picard.level", int)

    if experiment in ("rate", "sewing-check"):
        check("mc_paths", values["mc_paths"] >= MIN_PATHS, f"needs at least {MIN_PATHS} Monte Carlo paths")
    if experiment == "picard":
        check("mc_paths", values["mc_paths"] >= 2, "needs at least 2 Monte Carlo paths")
    check("p", values["p"] >= 2.0, "p must be >= 2")
    check("gamma", 0.0 < values["gamma"] < 1.0, "gamma must lie in (0, 1)")
    check("horizon", values["horizon"] > 0.0, "horizon must be positive")
    check("chunk_size", values["chunk_size"] >= 1, "chunk_size must be >= 1")
    check("scheme", values["scheme"] in ("polygonal", "classical"), "scheme must be polygonal or classical")

    lams = values["lambda_list"]
    if not isinstance(lams, list) or not lams or not all(isinstance(l, (int, float)) and l > 0 for l in lams):
        problems.append(f"{_where(lines, 'lambda_list')}: lambda_list: expected a list of positive numbers")
    else:
        values["lambda_list"] = [float(l) for l in lams]
        check("lambda_list", all(b > a for a, b in zip(lams, lams[1:])), "lambda values must be increasing")

    n_list = values["sewing.n_list"]
    if not isinstance(n_list, list) or len(n_list) < 1 or not all(
        isinstance(n, int) and n >= 1 and n & (n - 1) == 0 for n in n_list
    ):
        problems.append(f"{_where(lines, 'sewing.n_list')}: sewing.n_list: expected powers of two")
    else:
        check("sewing.n_list", n_list == sorted(set(n_list)), "n values must be increasing")
    ivs = values["sewing.intervals"]
    if not isinstance(ivs, list) or not ivs or not all(
        isinstance(iv, list) and len(iv) == 2 and 0.0 <= iv[0] < iv[1] <= values["horizon"] for iv in ivs
    ):
        problems.append(f"{_where(lines, 'sewing.intervals')}: sewing.intervals: expected [[s, t], ...] within [0, T]")
    else:
        values["sewing.intervals"] = [[float(a), float(b)] for a, b in ivs]

    x0 = values["x0"]
    if isinstance(x0, (int, float)):
        values["x0"] = float(x0)
    elif isinstance(x0, list) and all(isinstance(v, (int, float)) for v in x0):
        values["x0"] = [float(v) for v in x0]
        check("x0", len(x0) == values["drift.dimension"], "x0 length must equal drift.dimension")
    else:
        problems.append(f"{_where(lines, 'x0')}: x0: expected a number or a list of numbers")

    drift = None
    try:
        space = SpaceProfile.from_params(kind, values["drift.space.params"], values["drift.space.shift"])
        time = TimeProfile(values["drift.time.kind"], values["drift.time.beta"], values["horizon"])
        drift = DriftSpec(space, time, values["drift.amplitude"], values["drift.alpha"], values["drift.q"],
                          values["drift.dimension"])
        target = values["drift.target_norm"]
        if target is not None:
            # rescale so that amplitude * ||h||_alpha equals the target
            norm = space.holder_norm(drift.alpha)
            if not (isinstance(target, (int, float)) and target > 0.0 and 0.0 < norm < math.inf):
                problems.append(f"{_where(lines, 'drift.target_norm')}: drift.target_norm: needs a positive "
                                "target and a drift with finite nonzero Hölder norm")
            else:
                drift = replace(drift, amplitude=float(target) / norm)
    except InvalidSpecError as exc:
        key = "drift.q" if "2/(1+alpha)" in str(exc) else "drift.space.kind"
        if "beta" in str(exc):
            key = "drift.time.beta"
        problems.append(f"{_where(lines, key)}: drift: {exc}")
    except (TypeError, ValueError) as exc:
        problems.append(f"{_where(lines, 'drift.space.kind')}: drift: {exc}")

    if drift is not None and experiment == "pde-check":
        check("drift.dimension", drift.dimension == 1, "pde-check is one-dimensional")

    if "gate.min_rate" not in raw and drift is not None:
        values["gate.min_rate"] = predicted_rate(drift) - 0.2

    if problems:
        raise ConfigError(problems)
    return ExperimentConfig(experiment, values, lines, drift)


def predicted_rate(drift):
    """(1 + alpha)/2 for q >= 2, 1 - 1/q for q < 2."""
    if drift.q >= 2.0:
        return (1.0 + drift.alpha) / 2.0
    return 1.0 - 1.0 / drift.q


def load_config(path, experiment=None, env=None):
    """Read a config file, or the config echoed inside a results manifest."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    stripped = text.lstrip()
    if stripped.startswith("{"):
        manifest = json.loads(text)
        return validate_values(dict(manifest["config"]), None, experiment or manifest.get("experiment"), env)
    return validate_config(text, experiment, env)
