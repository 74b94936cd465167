"""Figure rendering for the CSV artifacts the runner emits.

The core numerics never import matplotlib; this module reads the delimited
outputs back in and draws summary figures next to them, so plots are always
reproducible from the CSVs alone.
"""

from __future__ import annotations

import csv
import os

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

__all__ = ["render_outdir"]


def _read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)
    return path


def plot_sweep(csv_path, png_path):
    rows = _read_csv(csv_path)
    params = [float(r["param"]) for r in rows]
    oracle_max = [float(r["oracle_max"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.plot(params, oracle_max, "o-", label="oracle worst")
    cons = [r["constructive_max"] for r in rows]
    if any(cons):
        vals = [float(c) if c else float("nan") for c in cons]
        ax.plot(params, vals, "s--", label="constructive worst")
    ax.set_xlabel("family parameter")
    ax.set_ylabel("worst splitting constant")
    ax.legend()
    return _save(fig, png_path)


def plot_check_weights(csv_path, png_path):
    rows = _read_csv(csv_path)
    names = [r["condition"] for r in rows]
    vals = [float(r["constant"]) for r in rows]
    fig, ax = plt.subplots(figsize=(max(5.0, 0.8 * len(names)), 3.4))
    ax.bar(range(len(names)), vals)
    ax.set_xticks(range(len(names)))
    ax.set_xticklabels(names, rotation=30, ha="right", fontsize=8)
    ax.set_ylabel("measured constant")
    return _save(fig, png_path)


def plot_lemma(csv_path, png_path):
    rows = _read_csv(csv_path)
    ratios = [float(r["ratio"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.hist(ratios, bins=min(20, max(5, len(ratios) // 3)))
    ax.set_xlabel("smoothed sup / boundary norm")
    ax.set_ylabel("trials")
    return _save(fig, png_path)


def plot_split_levels(csv_path, png_path):
    rows = [r for r in _read_csv(csv_path) if r["skipped"] != "true"]
    if not rows:
        return None
    levels = [int(r["level"]) for r in rows]
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    for key, style in (("c_phi", "o-"), ("c_corrector", "s--"),
                       ("gimel_ratio", "^:")):
        ax.plot(levels, [float(r[key]) for r in rows], style, label=key)
    ax.set_xlabel("dyadic level")
    ax.set_ylabel("measured constant")
    ax.legend()
    return _save(fig, png_path)


def plot_glue(csv_path, png_path):
    rows = _read_csv(csv_path)
    names = [r["couple"] for r in rows]
    c1 = [float(r["c1"]) for r in rows]
    c2 = [float(r["c2"]) for r in rows]
    x = range(len(names))
    fig, ax = plt.subplots(figsize=(5.0, 3.4))
    ax.bar([i - 0.18 for i in x], c1, width=0.36, label="C1")
    ax.bar([i + 0.18 for i in x], c2, width=0.36, label="C2")
    ax.set_xticks(list(x))
    ax.set_xticklabels(names, rotation=20, ha="right", fontsize=8)
    ax.set_ylabel("splitting constants")
    ax.legend()
    return _save(fig, png_path)


_RENDERERS = {
    "sweep.csv": ("sweep.png", plot_sweep),
    "check_weights.csv": ("check_weights.png", plot_check_weights),
    "lemma.csv": ("lemma.png", plot_lemma),
    "split_levels.csv": ("split_levels.png", plot_split_levels),
    "glue_couples.csv": ("glue_couples.png", plot_glue),
}


def render_outdir(outdir):
    """Render a figure for every known CSV present in outdir."""
    produced = []
    for name, (png, fn) in sorted(_RENDERERS.items()):
        src = os.path.join(outdir, name)
        if os.path.exists(src):
            out = fn(src, os.path.join(outdir, png))
            if out:
                produced.append(out)
    return produced
