"""Batch front door: fit, extract, simulate, serve.

Exit codes: 0 success, 2 usage error, 1 runtime error.  All outputs are
deterministic functions of the inputs; repeated runs produce byte-identical
files.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from .dataset import DataError, load_csv, validate, write_csv
from .fosr import FosrOptions, coef_with_bands, fit_fosr
from .fosr import _resolve_column
from .fpca import FpcaOptions, component_band, fit_fpca, scree_data
from .mfpca import MfpcaOptions, fit_mfpca
from .depth import depth_order
from .serialize import load_fit, save_fit
from .simulate import SCENARIOS, SimConfig, simulate
from .tvfpca import TvFpcaOptions, fit_tvfpca, predict_trajectory

log = logging.getLogger("fdaw")

EXTRACT_WHATS = ("scree", "component-band", "scores", "coef", "residual-depth", "trajectory")


def _fmt(x: float) -> str:
    return repr(float(x))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fdaw",
        description="Functional data analysis workbench: fit models from CSV, "
        "extract plot data, simulate datasets, and serve the explorer API.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_fit = sub.add_parser("fit", help="fit a model and write the fit JSON")
    p_fit.add_argument("--model", required=True, choices=("fpca", "mfpca", "tvfpca", "fosr"))
    p_fit.add_argument("--input", required=True, help="input CSV path")
    p_fit.add_argument("--layout", default="wide", choices=("long", "wide"))
    p_fit.add_argument("--schema", default=None,
                       help="column renames as key=value pairs, comma separated")
    p_fit.add_argument("--pve", type=float, default=None)
    p_fit.add_argument("--npc", type=int, default=None)
    p_fit.add_argument("--n-basis", type=int, default=None, dest="n_basis")
    p_fit.add_argument("--twoway", action="store_true", help="mfpca visit means")
    p_fit.add_argument("--method", default="lme", choices=("lme", "fpca"),
                       help="tvfpca score-dynamics model")
    p_fit.add_argument("--terms", default="", help="fosr covariates, comma separated")
    p_fit.add_argument("--level", type=float, default=0.95, help="fosr band level")
    p_fit.add_argument("--out", required=True)

    p_ex = sub.add_parser("extract", help="write a plot-ready CSV from a fit JSON")
    p_ex.add_argument("--fit", required=True)
    p_ex.add_argument("--what", required=True, choices=EXTRACT_WHATS)
    p_ex.add_argument("--k", type=int, default=1)
    p_ex.add_argument("--kx", type=int, default=1)
    p_ex.add_argument("--ky", type=int, default=2)
    p_ex.add_argument("--level", type=int, default=1, help="mfpca level")
    p_ex.add_argument("--term", default=None, help="fosr term for --what coef")
    p_ex.add_argument("--level-conf", type=float, default=0.95, dest="level_conf")
    p_ex.add_argument("--subject", default=None, help="subject for --what trajectory")
    p_ex.add_argument("--nT", type=int, default=21, dest="n_frames")
    p_ex.add_argument("--out", required=True)

    p_sim = sub.add_parser("simulate", help="simulate a dataset plus ground truth")
    p_sim.add_argument("--scenario", required=True, choices=SCENARIOS)
    p_sim.add_argument("--seed", type=int, required=True)
    p_sim.add_argument("--n", type=int, default=100, help="number of subjects")
    p_sim.add_argument("--d", type=int, default=50, help="grid size")
    p_sim.add_argument("--noise-sd", type=float, default=0.5, dest="noise_sd")
    p_sim.add_argument("--visits", type=int, default=4, help="mfpca visits per subject")
    p_sim.add_argument("--out", required=True, help="dataset CSV path")
    p_sim.add_argument("--truth", default=None, help="ground-truth JSON path")

    p_srv = sub.add_parser("serve", help="serve fitted models over HTTP")
    p_srv.add_argument("--fit", required=True, nargs="+", help="fit JSON files")
    p_srv.add_argument("--port", type=int, default=8000)
    p_srv.add_argument("--host", default="127.0.0.1")
    p_srv.add_argument("--static", default=None, help="explorer UI directory to mount at /")

    p_val = sub.add_parser("validate", help="validate a dataset CSV and print the report")
    p_val.add_argument("--input", required=True)
    p_val.add_argument("--layout", default="wide", choices=("long", "wide"))
    p_val.add_argument("--schema", default=None)

    return parser


def _parse_schema(text):
    if not text:
        return None
    schema = {}
    for pair in text.split(","):
        if "=" not in pair:
            raise DataError(f"bad schema entry {pair!r}; expected key=value")
        key, value = pair.split("=", 1)
        schema[key.strip()] = value.strip()
    return schema


def _cmd_fit(args) -> int:
    ds = load_csv(args.input, layout=args.layout, schema=_parse_schema(args.schema))
    if args.model == "fpca":
        opts = FpcaOptions(pve=args.pve if args.pve is not None else 0.99, npc=args.npc,
                           n_basis=args.n_basis)
        fit = fit_fpca(ds, opts)
        shape = f"K={fit.n_components} pve={fit.pve_achieved:.4f}"
        n = fit.scores.shape[0]
    elif args.model == "mfpca":
        opts = MfpcaOptions(twoway=args.twoway, pve=args.pve if args.pve is not None else 0.99,
                            n_basis=args.n_basis)
        fit = fit_mfpca(ds, opts)
        k1, k2 = fit.n_components
        shape = f"K1={k1} K2={k2} pve={fit.pve_achieved[0]:.4f}/{fit.pve_achieved[1]:.4f}"
        n = fit.observed.shape[0]
    elif args.model == "tvfpca":
        opts = TvFpcaOptions(method=args.method, pve=args.pve if args.pve is not None else 0.95,
                             npc=args.npc, n_basis=args.n_basis)
        fit = fit_tvfpca(ds, opts)
        shape = f"K={fit.n_components} pve={fit.pve_achieved:.4f} method={args.method}"
        n = fit.observed.shape[0]
    else:
        terms = [t for t in args.terms.split(",") if t]
        opts = FosrOptions(n_basis=args.n_basis, pve=args.pve if args.pve is not None else 0.95,
                           level=args.level)
        fit = fit_fosr(ds, terms, opts)
        shape = f"p={len(fit.column_names) - 1}"
        n = fit.observed.shape[0]
    save_fit(fit, args.out)
    print(f"kind={args.model} n={n} D={ds.n_points} {shape} out={args.out}")
    return 0


def _write_rows(path, header, rows) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow(row)
    Path(path).write_text(buf.getvalue(), encoding="utf-8")


def _cmd_extract(args) -> int:
    fit = load_fit(args.fit)
    kind = fit.model_kind
    what = args.what

    if what == "scree":
        if kind == "mfpca":
            lam = fit.lam1 if args.level == 1 else fit.lam2
            if lam.size == 0:
                raise DataError(f"no components at level {args.level}")
            cum = np.cumsum(lam) / lam.sum()
            rows = [(k + 1, _fmt(lam[k]), _fmt(cum[k])) for k in range(lam.size)]
        elif kind in ("fpca", "tvfpca"):
            rows = [(k, _fmt(lam), _fmt(pve)) for k, lam, pve in scree_data(fit)]
        else:
            raise DataError("scree requires kind fpca, mfpca, or tvfpca")
        _write_rows(args.out, ["k", "lambda", "cum_pve"], rows)
    elif what == "component-band":
        if kind == "fpca":
            upper, lower = component_band(fit, args.k)
            center, psi = fit.mu, fit.psi[args.k - 1]
        elif kind == "mfpca":
            psi_mat, lam_vec = (fit.psi1, fit.lam1) if args.level == 1 else (fit.psi2, fit.lam2)
            if not (1 <= args.k <= lam_vec.size):
                raise DataError(f"component k={args.k} out of range 1..{lam_vec.size}")
            psi = psi_mat[args.k - 1]
            center = fit.mu
            half = np.sqrt(lam_vec[args.k - 1]) * psi
            upper, lower = center + half, center - half
        elif kind == "tvfpca":
            if not (1 <= args.k <= fit.n_components):
                raise DataError(f"component k={args.k} out of range 1..{fit.n_components}")
            psi = fit.psi[args.k - 1]
            center = fit.pointwise_mean
            half = 2.0 * np.sqrt(fit.lam[args.k - 1]) * psi
            upper, lower = center + half, center - half
        else:
            raise DataError("component-band requires kind fpca, mfpca, or tvfpca")
        rows = [
            (_fmt(t), _fmt(c), _fmt(lo), _fmt(hi), _fmt(p))
            for t, c, lo, hi, p in zip(fit.grid.points, center, lower, upper, psi)
        ]
        _write_rows(args.out, ["t", "center", "lower", "upper", "psi"], rows)
    elif what == "scores":
        if kind == "fpca":
            mat, ids = fit.scores, [str(s) for s in fit.subject_ids]
        elif kind == "mfpca":
            if args.level == 1:
                mat, ids = fit.scores1, list(fit.subjects)
            else:
                mat, ids = fit.scores2, [str(s) for s in fit.subject_ids]
        else:
            raise DataError("scores requires kind fpca or mfpca")
        K = mat.shape[1]
        if not (1 <= args.kx <= K and 1 <= args.ky <= K):
            raise DataError(f"kx, ky must lie in 1..{K}")
        rows = [
            (ids[i], _fmt(mat[i, args.kx - 1]), _fmt(mat[i, args.ky - 1]))
            for i in range(mat.shape[0])
        ]
        _write_rows(args.out, ["subject", "score_x", "score_y"], rows)
    elif what == "coef":
        if kind != "fosr":
            raise DataError("coef requires kind fosr")
        term = args.term or fit.column_names[min(1, len(fit.column_names) - 1)]
        est, lo, hi = coef_with_bands(fit, term, args.level_conf)
        j = fit.column_names.index(_resolve_column(fit, term))
        rows = [
            (_fmt(t), _fmt(e), _fmt(l), _fmt(h), _fmt(s))
            for t, e, l, h, s in zip(fit.grid.points, est, lo, hi, fit.beta_se[j])
        ]
        _write_rows(args.out, ["t", "estimate", "lower", "upper", "se"], rows)
    elif what == "residual-depth":
        if kind != "fosr":
            raise DataError("residual-depth requires kind fosr")
        result = depth_order(fit.depths)
        rows = [
            (rank + 1, int(i), str(fit.subject_ids[i]), _fmt(fit.depths[i]),
             int(i in set(result.outlier_indices.tolist())))
            for rank, i in enumerate(result.order)
        ]
        _write_rows(args.out, ["rank", "row", "subject", "depth", "is_outlier"], rows)
    elif what == "trajectory":
        if kind != "tvfpca":
            raise DataError("trajectory requires kind tvfpca")
        subject = args.subject or fit.subjects()[0]
        frames = predict_trajectory(fit, subject, args.n_frames)
        rows = []
        for T, curve in frames:
            for t, v in zip(fit.grid.points, curve):
                rows.append((_fmt(T), _fmt(t), _fmt(v)))
        _write_rows(args.out, ["T", "t", "value"], rows)
    print(f"wrote {what} extract to {args.out}")
    return 0


def _truth_doc(truth) -> dict:
    def arr(x):
        return None if x is None else np.asarray(x, dtype=float).tolist()

    doc = {
        "mean": arr(truth.mean),
        "eigenfunctions": arr(truth.eigenfunctions),
        "eigenvalues": arr(truth.eigenvalues),
        "scores": arr(truth.scores),
        "noise_sd": float(truth.noise_sd),
    }
    if truth.eigenfunctions2 is not None:
        doc["eigenfunctions2"] = arr(truth.eigenfunctions2)
        doc["eigenvalues2"] = arr(truth.eigenvalues2)
        doc["scores2"] = arr(truth.scores2)
    if truth.visit_shifts is not None:
        doc["visit_shifts"] = arr(truth.visit_shifts)
    if truth.coefficients is not None:
        doc["coefficients"] = {k: arr(v) for k, v in truth.coefficients.items()}
    if truth.dynamics is not None:
        doc["dynamics"] = {k: arr(v) for k, v in truth.dynamics.items()}
    if truth.mean_surface_coefs is not None:
        doc["mean_surface_coefs"] = [float(c) for c in truth.mean_surface_coefs]
    return doc


def _cmd_simulate(args) -> int:
    config = SimConfig(n_subjects=args.n, n_points=args.d, noise_sd=args.noise_sd,
                       n_visits=args.visits)
    ds, truth = simulate(args.scenario, config, seed=args.seed)
    write_csv(ds, layout="wide", path=args.out)
    if args.truth:
        Path(args.truth).write_text(
            json.dumps(_truth_doc(truth), separators=(",", ":")), encoding="utf-8"
        )
    print(f"scenario={args.scenario} seed={args.seed} n_curves={ds.n_curves} D={ds.n_points} "
          f"out={args.out}")
    return 0


def _cmd_serve(args) -> int:
    from .server import ModelRegistry, serve

    registry = ModelRegistry()
    for path in args.fit:
        model_id = registry.add_file(path)
        log.info("loaded %s from %s", model_id, path)
    print(f"serving {len(registry)} model(s) on http://{args.host}:{args.port}")
    serve(registry, port=args.port, host=args.host, static_dir=args.static)
    return 0


def _cmd_validate(args) -> int:
    ds = load_csv(args.input, layout=args.layout, schema=_parse_schema(args.schema))
    report = validate(ds)
    for chk in report.checks:
        print(f"{'PASS' if chk.passed else 'FAIL'} {chk.name}" + (f": {chk.detail}" if chk.detail else ""))
    print(f"n_curves={report.n_curves} n_points={report.n_points} "
          f"n_subjects={report.n_subjects} median_visits={report.median_visits} "
          f"missing_fraction={report.missing_fraction:.4f}")
    return 0 if report.ok else 1


def main(argv=None) -> int:
    level = os.environ.get("FDAW_LOG", "error").upper()
    logging.basicConfig(level=getattr(logging, level, logging.ERROR))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handlers = {
        "fit": _cmd_fit,
        "extract": _cmd_extract,
        "simulate": _cmd_simulate,
        "serve": _cmd_serve,
        "validate": _cmd_validate,
    }
    try:
        return handlers[args.command](args)
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
