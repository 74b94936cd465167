"""Batch experiment runner: weight checks, splits, sweeps, gluing, lemma checks.

All commands write CSV tables and structured-text reports into an output
directory; identical command lines with identical seeds produce byte-identical
CSV artifacts.  Figures rendered from those CSVs land alongside them when
--plot is given.  Exit codes: 0 success, 2 hypothesis-check warnings,
1 runtime errors, 64 malformed command lines.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from . import engine, oracle
from .spectral import QUADRANT, UNION_CONE, leakage_1d, project_cone
from .torus import (
    Grid1D,
    TorusFn1D,
    poisson_convolve,
    random_fn1d,
    random_fn2d,
    weighted_norm,
    write_torus,
)
from .weights import (
    Weight1D,
    Weight2D,
    a1_constant,
    ap_constant,
    bmo_norm,
    dyadic_family,
    hypothesis_check,
    reverse_holder_constant,
    weight_from_spec,
)

__all__ = ["ExperimentSpec", "run", "re_hardy_norm", "main"]

USAGE_EXIT = 64


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


# ---------------------------------------------------------------------------
# Lemma-style norm comparison
# ---------------------------------------------------------------------------

def re_hardy_norm(f: TorusFn1D, w: Weight1D, r: float, rho_grid):
    """Boundary norm of an analytic function versus its Poisson-smoothed sup.

    Returns (||f||_{L^r(w)}, sup over the rho grid of ||f * P_rho||_{L^r(w)}).
    f must be analytic in the spectral sense (negative-frequency leakage at
    most 1e-8).
    """
    if r <= 0:
        raise ValueError(f"exponent must be positive, got {r}")
    leak = leakage_1d(f, f.grid.freqs >= 0)
    if leak > 1e-8:
        raise ValueError(f"input is not analytic: leakage {leak:.3e}")
    boundary = weighted_norm(f, w, r)
    smoothed = max(
        weighted_norm(poisson_convolve(f, rho), w, r) for rho in rho_grid
    )
    return boundary, smoothed


# ---------------------------------------------------------------------------
# Experiment plumbing
# ---------------------------------------------------------------------------

COMMANDS = ("check-weights", "split", "sweep", "glue", "verify-lemma")


@dataclass
class ExperimentSpec:
    """Validated description of one batch run."""

    command: str
    out: str
    n: int
    seed: int | None
    plot: bool
    args: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.command not in COMMANDS:
            raise _UsageError(f"unknown command {self.command!r}")
        if self.n < 8 or (self.n & (self.n - 1)):
            raise _UsageError(f"grid size must be a power of two >= 8, got {self.n}")
        randomized = self.command in ("split", "sweep", "glue", "verify-lemma")
        if randomized and self.seed is None:
            raise _UsageError(f"--seed is mandatory for {self.command}")


def _write_csv(path, columns, rows):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(columns)
        for row in rows:
            writer.writerow([row[c] for c in columns])


def _fmt(x) -> str:
    return repr(float(x))


def _parse_floats(text: str):
    return [float(t) for t in text.split(",") if t.strip()]


def _random_analytic_poly(rng, grid: Grid1D, band=None) -> TorusFn1D:
    band = grid.n // 8 if band is None else band
    raw = random_fn1d(rng, grid, band=band)
    keep = grid.freqs >= 0
    return TorusFn1D.from_spectrum(grid, raw.spectrum * keep)


# ---------------------------------------------------------------------------
# Command implementations (each returns (exit_code, list of artifact paths))
# ---------------------------------------------------------------------------

def _cmd_check_weights(spec: ExperimentSpec):
    a = spec.args
    wspec = a["weight_spec"]
    n = spec.n
    rows = []
    if a["dims"] == 1:
        w = weight_from_spec(wspec, Grid1D(n))
        fam = dyadic_family(n)
        fam_size = fam.size
        entries = [("A_1", a1_constant(w, fam))]
        for p in a["p_list"]:
            entries.append((f"A_p[p={_fmt(p)}]", ap_constant(w, p, fam)))
        for d in a["delta_list"]:
            entries.append(
                (f"RH[delta={_fmt(d)}]", reverse_holder_constant(w, d, fam))
            )
        entries.append(("BMO-log", bmo_norm(np.log(w.values), fam)))
    else:
        grids = (Grid1D(n), Grid1D(n))
        w = weight_from_spec(wspec, grids)
        from .weights import rect_family

        fam = rect_family(n, n)
        fam_size = fam.size
        entries = [("A_1", a1_constant(w, fam))]
        for p in a["p_list"]:
            entries.append((f"A_p[p={_fmt(p)}]", ap_constant(w, p, fam)))
        for d in a["delta_list"]:
            entries.append(
                (f"RH[delta={_fmt(d)}]", reverse_holder_constant(w, d, fam))
            )
    for name, value in sorted(entries):
        rows.append(
            {
                "condition": name,
                "family": wspec,
                "n": str(n),
                "family_size": str(fam_size),
                "constant": _fmt(value),
                "seed": "" if spec.seed is None else str(spec.seed),
            }
        )
    path = os.path.join(spec.out, "check_weights.csv")
    _write_csv(path, ["condition", "family", "n", "family_size", "constant", "seed"], rows)
    return 0, [path]


def _cmd_split(spec: ExperimentSpec):
    a = spec.args
    n = spec.n
    grids = (Grid1D(n), Grid1D(n))
    g1, g2 = grids
    w1 = weight_from_spec(a["w1"], grids)
    w2 = weight_from_spec(a["w2"], grids)
    wa = weight_from_spec(a["a"], g2)
    wb = weight_from_spec(a["b"], g1)
    cfg = engine.SplitConfig(
        p=a["p"], k=a["k"], s=a["s"], jmin=a["jmin"], jmax=a["jmax"],
    )
    from .weights import single_weight_reduction

    w, u = single_weight_reduction(w1, w2, cfg.q)
    Wa = w.values * wa.values[None, :]
    Wb = wb.values[:, None] * Wa
    rng = np.random.default_rng(spec.seed)
    f, g, h = engine.random_subspace_instance(rng, grids, u, Wa, Wb, cfg.q)
    report = engine.split_inf(f, g, h, w1, w2, wa, wb, cfg)

    paths = []
    report_path = os.path.join(spec.out, "split_report.txt")
    with open(report_path, "w") as fh:
        fh.write(f"command: split\nn: {n}\nseed: {spec.seed}\n")
        fh.write(f"w1: {a['w1']}\nw2: {a['w2']}\na: {a['a']}\nb: {a['b']}\n")
        fh.write(f"p: {_fmt(a['p'])}\n")
        fh.write(report.to_text())
        fh.write("\n")
    paths.append(report_path)

    level_rows = []
    for d in report.levels:
        level_rows.append(
            {
                "level": str(d.j),
                "skipped": str(d.skipped).lower(),
                "y_max": _fmt(d.y_max),
                "v_max": _fmt(d.v_max),
                "lambda_min": _fmt(d.lambda_min),
                "gimel_ratio": _fmt(d.gimel_ratio),
                "c_phi": _fmt(d.c_phi),
                "c_corrector": _fmt(d.c_corrector),
                "phi_leakage": _fmt(d.phi_leakage),
                "cz_doubling": _fmt(d.cz_doubling),
                "n": str(n),
                "seed": str(spec.seed),
            }
        )
    levels_path = os.path.join(spec.out, "split_levels.csv")
    _write_csv(
        levels_path,
        ["level", "skipped", "y_max", "v_max", "lambda_min", "gimel_ratio",
         "c_phi", "c_corrector", "phi_leakage", "cz_doubling", "n", "seed"],
        level_rows,
    )
    paths.append(levels_path)

    metrics_path = os.path.join(spec.out, "split_metrics.csv")
    metric_rows = [
        {"metric": k, "value": _fmt(v), "n": str(n), "seed": str(spec.seed),
         "tolerance": t}
        for k, v, t in sorted(
            [
                ("c1", report.c1, ""),
                ("c2", report.c2, ""),
                ("residual", report.residual, "1e-08"),
                ("leak_f", report.leak_f, "1e-06"),
                ("leak_g_prime", report.leak_g, "1e-06"),
                ("leak_h_prime", report.leak_h, "1e-06"),
                ("norm_g_in", report.norm_g_in, ""),
                ("norm_h_in", report.norm_h_in, ""),
                ("norm_g_out", report.norm_g_out, ""),
                ("norm_h_out", report.norm_h_out, ""),
            ]
        )
    ]
    _write_csv(metrics_path, ["metric", "value", "n", "seed", "tolerance"], metric_rows)
    paths.append(metrics_path)

    if a["dump_torus"]:
        for name, fn in (("g_prime", report.g_prime), ("h_prime", report.h_prime)):
            p = os.path.join(spec.out, f"{name}.torus")
            write_torus(p, fn)
            paths.append(p)

    code = 0
    if report.hypothesis is not None and not report.hypothesis.ok:
        code = 2
    return code, paths


def _cmd_sweep(spec: ExperimentSpec):
    a = spec.args
    rows = oracle.kconstant_sweep(
        a["family_template"],
        a["params"],
        a["r"],
        a["p"],
        a["trials"],
        spec.n,
        spec.seed,
        weight1_template=a["w1_template"],
        max_workers=engine.worker_count(),
    )
    path = os.path.join(spec.out, "sweep.csv")
    _write_csv(
        path,
        list(oracle.SweepRow.csv_columns),
        [r.as_csv_dict() for r in rows],
    )
    return 0, [path]


def _cmd_glue(spec: ExperimentSpec):
    a = spec.args
    n = spec.n
    grids = (Grid1D(n), Grid1D(n))
    w1 = weight_from_spec(a["w1"], grids)
    w2 = weight_from_spec(a["w2"], grids)
    rng = np.random.default_rng(spec.seed)
    g_raw = random_fn2d(rng, grids)
    h_raw = random_fn2d(rng, grids)
    from .torus import TorusFn2D

    f = project_cone(
        TorusFn2D(grids, g_raw.values + h_raw.values), QUADRANT
    )
    g = TorusFn2D(grids, f.values - h_raw.values)
    report = engine.glue_driver(f, g, h_raw, w1, w2, thetas=tuple(a["thetas"]))

    report_path = os.path.join(spec.out, "glue_report.txt")
    with open(report_path, "w") as fh:
        fh.write(f"command: glue\nn: {n}\nseed: {spec.seed}\n")
        fh.write(f"w1: {a['w1']}\nw2: {a['w2']}\n")
        fh.write(report.to_text())
        fh.write("\n")

    rows = []
    for label, exps, c1, c2 in report.couples:
        rows.append(
            {
                "couple": label,
                "exponents": f"{_fmt(exps[0])}|{_fmt(exps[1])}",
                "c1": _fmt(c1),
                "c2": _fmt(c2),
                "n": str(n),
                "seed": str(spec.seed),
            }
        )
    rows.append(
        {
            "couple": "endpoint-oracle",
            "exponents": f"{_fmt(1.0)}|inf",
            "c1": _fmt(report.endpoint_oracle[0]),
            "c2": _fmt(report.endpoint_oracle[1]),
            "n": str(n),
            "seed": str(spec.seed),
        }
    )
    couples_path = os.path.join(spec.out, "glue_couples.csv")
    _write_csv(couples_path, ["couple", "exponents", "c1", "c2", "n", "seed"], rows)
    code = 0 if report.hypothesis.ok else 2
    return code, [report_path, couples_path]


def _cmd_verify_lemma(spec: ExperimentSpec):
    a = spec.args
    n = spec.n
    grid = Grid1D(n)
    w = weight_from_spec(a["weight"], grid)
    rho_grid = a["rho_grid"]
    rows = []
    for t in range(a["trials"]):
        rng = np.random.default_rng([spec.seed, t])
        f = _random_analytic_poly(rng, grid)
        boundary, smoothed = re_hardy_norm(f, w, a["r"], rho_grid)
        rows.append(
            {
                "trial": str(t),
                "boundary_norm": _fmt(boundary),
                "smoothed_sup": _fmt(smoothed),
                "ratio": _fmt(smoothed / boundary if boundary else math.inf),
                "r": _fmt(a["r"]),
                "family": a["weight"],
                "n": str(n),
                "seed": str(spec.seed),
            }
        )
    path = os.path.join(spec.out, "lemma.csv")
    _write_csv(
        path,
        ["trial", "boundary_norm", "smoothed_sup", "ratio", "r", "family", "n", "seed"],
        rows,
    )
    return 0, [path]


_RUNNERS = {
    "check-weights": _cmd_check_weights,
    "split": _cmd_split,
    "sweep": _cmd_sweep,
    "glue": _cmd_glue,
    "verify-lemma": _cmd_verify_lemma,
}


def run(spec: ExperimentSpec) -> int:
    """Execute one experiment; writes artifacts under spec.out."""
    os.makedirs(spec.out, exist_ok=True)
    code, artifacts = _RUNNERS[spec.command](spec)
    if spec.plot:
        from . import plots

        artifacts.extend(plots.render_outdir(spec.out))
    return code


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def _build_parser() -> _Parser:
    parser = _Parser(prog="ksplit", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, randomized):
        p.add_argument("--n", type=int, default=64, help="grid size (power of two)")
        p.add_argument("--seed", type=int, default=None,
                       help="random seed" + (" (mandatory)" if randomized else ""))
        p.add_argument("--out", default="ksplit-out", help="output directory")
        p.add_argument("--plot", action="store_true",
                       help="render figures from the emitted CSVs")
        p.add_argument("--config", default=None,
                       help="key=value defaults file (flags win)")

    pw = sub.add_parser("check-weights", help="condition-constant table")
    common(pw, randomized=False)
    pw.add_argument("--family", default=None, help="family name shortcut")
    pw.add_argument("--alpha", type=float, default=None)
    pw.add_argument("--eps", type=float, default=None)
    pw.add_argument("--center", type=float, default=None)
    pw.add_argument("--spec", default=None, help="full weight spec text")
    pw.add_argument("--p", default="2.0", help="comma list of A_p exponents")
    pw.add_argument("--delta", default="1.0", help="comma list of RH exponents")
    pw.add_argument("--dims", type=int, choices=(1, 2), default=1)

    ps = sub.add_parser("split", help="run the constructive splitting engine")
    common(ps, randomized=True)
    ps.add_argument("--p", type=float, required=True)
    ps.add_argument("--w1", default="const")
    ps.add_argument("--w2", default="const")
    ps.add_argument("--a", default="const")
    ps.add_argument("--b", default="const")
    ps.add_argument("--k", type=int, default=2)
    ps.add_argument("--s", type=int, default=None)
    ps.add_argument("--jmin", type=int, default=None)
    ps.add_argument("--jmax", type=int, default=None)
    ps.add_argument("--dump-torus", action="store_true")

    pv = sub.add_parser("sweep", help="worst-constant sweep along a family")
    common(pv, randomized=True)
    pv.add_argument("--family-template",
                    default="separating a=const b=(power alpha={param})")
    pv.add_argument("--w1-template", default="const")
    pv.add_argument("--params", default="0.0,0.3,0.6,0.9")
    pv.add_argument("--r", type=float, default=1.0)
    pv.add_argument("--p", type=float, default=2.0)
    pv.add_argument("--trials", type=int, default=50)

    pg = sub.add_parser("glue", help="three-scale gluing experiment")
    common(pg, randomized=True)
    pg.add_argument("--w1", default="const")
    pg.add_argument("--w2", default="const")
    pg.add_argument("--thetas", default="0.2,0.4,0.6,0.8")

    pl = sub.add_parser("verify-lemma", help="boundary vs smoothed norm ratios")
    common(pl, randomized=True)
    pl.add_argument("--r", type=float, default=0.5)
    pl.add_argument("--weight", default="const")
    pl.add_argument("--trials", type=int, default=50)
    pl.add_argument("--rho-grid", default="0.0,0.5,0.9,0.99,0.999")
    return parser


def _coerce(value: str):
    low = value.lower()
    if low in ("true", "yes", "on"):
        return True
    if low in ("false", "no", "off"):
        return False
    for cast in (int, float):
        try:
            return cast(value)
        except ValueError:
            pass
    return value


def _apply_config(ns: argparse.Namespace, argv):
    """Fill namespace entries from the config file; explicit flags win."""
    if not ns.config:
        return ns
    explicit = {
        tok.split("=", 1)[0].lstrip("-").replace("-", "_")
        for tok in argv
        if tok.startswith("--")
    }
    with open(ns.config) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise _UsageError(f"malformed config line: {line!r}")
            key, value = (t.strip() for t in line.split("=", 1))
            attr = key.replace("-", "_")
            if not hasattr(ns, attr):
                raise _UsageError(f"unknown config key {key!r}")
            if attr not in explicit:
                setattr(ns, attr, _coerce(value))
    return ns


def _spec_from_args(ns: argparse.Namespace) -> ExperimentSpec:
    args: dict = {}
    if ns.command == "check-weights":
        if ns.spec:
            wspec = ns.spec
        elif ns.family:
            parts = [ns.family]
            if ns.alpha is not None:
                parts.append(f"alpha={ns.alpha}")
            if ns.eps is not None:
                parts.append(f"eps={ns.eps}")
            if ns.center is not None:
                parts.append(f"center={ns.center}")
            wspec = " ".join(parts)
        else:
            raise _UsageError("check-weights needs --family or --spec")
        args = {
            "weight_spec": wspec,
            "p_list": _parse_floats(str(ns.p)),
            "delta_list": _parse_floats(str(ns.delta)),
            "dims": ns.dims,
        }
    elif ns.command == "split":
        if not ns.p or ns.p <= 1.0:
            raise _UsageError("split needs --p > 1")
        args = {
            "p": ns.p, "w1": ns.w1, "w2": ns.w2, "a": ns.a, "b": ns.b,
            "k": ns.k, "s": ns.s, "jmin": ns.jmin, "jmax": ns.jmax,
            "dump_torus": ns.dump_torus,
        }
    elif ns.command == "sweep":
        params = _parse_floats(ns.params)
        if not params:
            raise _UsageError("sweep needs at least one parameter value")
        args = {
            "family_template": ns.family_template,
            "w1_template": ns.w1_template,
            "params": params,
            "r": ns.r,
            "p": ns.p,
            "trials": ns.trials,
        }
    elif ns.command == "glue":
        thetas = _parse_floats(ns.thetas)
        if len(thetas) != 4 or not all(
            0.0 < x < y for x, y in zip(thetas, thetas[1:] + [1.0])
        ):
            raise _UsageError("glue needs --thetas t1<t2<t3<t4 in (0,1)")
        args = {"w1": ns.w1, "w2": ns.w2, "thetas": thetas}
    elif ns.command == "verify-lemma":
        if ns.r <= 0:
            raise _UsageError("verify-lemma needs --r > 0")
        rho = _parse_floats(ns.rho_grid)
        if any(not (0.0 <= x < 1.0) for x in rho):
            raise _UsageError("rho grid values must lie in [0, 1)")
        args = {"r": ns.r, "weight": ns.weight, "trials": ns.trials,
                "rho_grid": rho}
    return ExperimentSpec(
        command=ns.command, out=ns.out, n=ns.n, seed=ns.seed,
        plot=ns.plot, args=args,
    )


def main(argv=None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = _build_parser()
    try:
        ns = parser.parse_args(argv)
        ns = _apply_config(ns, argv)
        spec = _spec_from_args(ns)
    except _UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return USAGE_EXIT
    try:
        return run(spec)
    except Exception as exc:  # runtime failure, not usage
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
