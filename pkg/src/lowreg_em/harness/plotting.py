"""Static SVG plots rebuilt from the CSVs of a results directory."""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from .experiments import MANIFEST  # noqa: E402


def _read(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.DictReader(fh))


def _series(rows, key, x, y, cast=float):
    out = {}
    for r in rows:
        if r[y] in ("", "nan"):
            continue
        out.setdefault(r[key], []).append((cast(r[x]), float(r[y])))
    return out


def _legend(ax):
    if ax.get_legend_handles_labels()[0]:
        ax.legend()


def _save(fig, out_dir, name):
    path = os.path.join(out_dir, name)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def plot_results(out_dir):
    """Render every plot the manifest's experiment supports; returns the written paths."""
    with open(os.path.join(out_dir, MANIFEST), encoding="utf-8") as fh:
        manifest = json.load(fh)
    files = manifest["files"]
    kind = manifest["experiment"]
    written = []
    if kind == "rate":
        series = _series(_read(os.path.join(out_dir, files["errors"])), "metric", "n", "value")
        fig, ax = plt.subplots()
        for metric, pts in sorted(series.items()):
            pts = [(n, v) for n, v in pts if v > 0.0]
            if pts:
                ax.loglog(*zip(*pts), "o-", label=metric)
        ax.set_xlabel("n")
        ax.set_ylabel("error")
        _legend(ax)
        written.append(_save(fig, out_dir, "errors.svg"))
    elif kind == "picard":
        series = _series(_read(os.path.join(out_dir, files["picard"])), "metric", "k", "value", int)
        fig, ax = plt.subplots()
        for metric, pts in sorted(series.items()):
            pts = [(k, v) for k, v in pts if v > 0.0]
            if pts:
                ax.semilogy(*zip(*pts), "o-", label=metric)
        ax.set_xlabel("iteration")
        _legend(ax)
        written.append(_save(fig, out_dir, "picard.svg"))
    elif kind == "pde-check":
        rows = _read(os.path.join(out_dir, files["pde"]))
        fig, ax = plt.subplots()
        ax.semilogx([float(r["lambda"]) for r in rows], [float(r["sup_grad"]) for r in rows], "o-")
        ax.axhline(0.5, color="grey", linestyle="--")
        ax.set_xlabel("lambda")
        ax.set_ylabel("sup |grad V|")
        written.append(_save(fig, out_dir, "pde.svg"))
    elif kind == "sewing-check":
        rows = _read(os.path.join(out_dir, files["sewing"]))
        fig, ax = plt.subplots()
        for (s, t), pts in sorted(_series(
            [dict(r, interval=(r["s"], r["t"])) for r in rows], "interval", "n", "norm"
        ).items()):
            pts = [(n, v) for n, v in pts if v > 0.0]
            if pts:
                ax.loglog(*zip(*pts), "o-", label=f"[{s}, {t}]")
        ax.set_xlabel("n")
        ax.set_ylabel("germ norm")
        _legend(ax)
        written.append(_save(fig, out_dir, "sewing.svg"))
    elif kind == "simulate":
        rows = _read(os.path.join(out_dir, files["trajectory"]))
        fig, ax = plt.subplots()
        t = [float(r["t"]) for r in rows]
        for col in [c for c in rows[0] if c != "t"]:
            ax.plot(t, [float(r[col]) for r in rows], label=col)
        ax.set_xlabel("t")
        _legend(ax)
        written.append(_save(fig, out_dir, "trajectory.svg"))
    return written
