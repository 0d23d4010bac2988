"""Versioned JSON documents for fitted models.

Each fit kind serializes to a flat document carrying the analytic
components plus the observed data the explorer needs (missing cells encode
as null).  Quantities with exact reconstruction identities (fitted curves,
fosr observed values) are rebuilt on load rather than stored.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .dataset import Covariate, DataError, Grid
from .fosr import FosrFit, TermCoding
from .fpca import FpcaFit, reconstruct
from .mfpca import MfpcaFit
from .tvfpca import ScoreDynamics, SlicedMeanSurface, TvFpcaFit

__all__ = ["fit_to_doc", "fit_from_doc", "save_fit", "load_fit", "dumps_doc"]

FORMAT = "fdaw-fit"
VERSION = 1


def _lst(a) -> list:
    return np.asarray(a, dtype=float).tolist()


def _values_with_none(values: np.ndarray, mask: np.ndarray) -> list:
    out = []
    for row, mrow in zip(values, mask):
        out.append([float(v) if m else None for v, m in zip(row, mrow)])
    return out


def _values_from_none(rows: list):
    n = len(rows)
    d = len(rows[0]) if n else 0
    values = np.full((n, d), np.nan)
    mask = np.zeros((n, d), dtype=bool)
    for i, row in enumerate(rows):
        for j, v in enumerate(row):
            if v is not None:
                values[i, j] = v
                mask[i, j] = True
    return values, mask


def _grid_doc(grid: Grid) -> dict:
    return {"points": _lst(grid.points), "weights": _lst(grid.weights)}


def _grid_from(doc: dict) -> Grid:
    return Grid(points=np.asarray(doc["points"]), weights=np.asarray(doc["weights"]))


def _covariate_doc(cov: Covariate) -> dict:
    if cov.kind == "continuous":
        values = [None if np.isnan(v) else float(v) for v in cov.values]
    else:
        values = [None if v is None else str(v) for v in cov.values]
    return {"kind": cov.kind, "values": values, "levels": list(cov.levels)}


def _covariate_from(name: str, doc: dict) -> Covariate:
    if doc["kind"] == "continuous":
        values = np.array([np.nan if v is None else float(v) for v in doc["values"]], dtype=float)
    else:
        values = np.array([None if v is None else str(v) for v in doc["values"]], dtype=object)
    return Covariate(name=name, kind=doc["kind"], values=values, levels=tuple(doc["levels"]))


def fit_to_doc(fit) -> dict:
    kind = fit.model_kind
    if kind == "fpca":
        return _fpca_doc(fit)
    if kind == "mfpca":
        return _mfpca_doc(fit)
    if kind == "tvfpca":
        return _tvfpca_doc(fit)
    if kind == "fosr":
        return _fosr_doc(fit)
    raise DataError(f"cannot serialize model kind {kind!r}")


def fit_from_doc(doc: dict):
    if doc.get("format") != FORMAT:
        raise DataError("not an fdaw fit document")
    if doc.get("version") != VERSION:
        raise DataError(f"unsupported fit document version {doc.get('version')!r}")
    kind = doc.get("kind")
    loaders = {
        "fpca": _fpca_from,
        "mfpca": _mfpca_from,
        "tvfpca": _tvfpca_from,
        "fosr": _fosr_from,
    }
    if kind not in loaders:
        raise DataError(f"unknown model kind {kind!r}")
    return loaders[kind](doc)


def dumps_doc(doc: dict) -> str:
    return json.dumps(doc, separators=(",", ":"), allow_nan=False)


def save_fit(fit, path) -> None:
    Path(path).write_text(dumps_doc(fit_to_doc(fit)), encoding="utf-8")


def load_fit(path):
    return fit_from_doc(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------
# fpca


def _fpca_doc(fit: FpcaFit) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "fpca",
        "grid": _grid_doc(fit.grid),
        "mu": _lst(fit.mu),
        "psi": _lst(fit.psi),
        "lambda": _lst(fit.lam),
        "sigma2": float(fit.sigma2),
        "scores": _lst(fit.scores),
        "pve_achieved": float(fit.pve_achieved),
        "subject_ids": [str(s) for s in fit.subject_ids],
        "visit_indices": [int(v) for v in fit.visit_indices],
        "visit_times": None if fit.visit_times is None else _lst(fit.visit_times),
        "data": {"observed": _values_with_none(fit.observed, fit.mask)},
    }


def _fpca_from(doc: dict) -> FpcaFit:
    grid = _grid_from(doc["grid"])
    mu = np.asarray(doc["mu"])
    psi = np.asarray(doc["psi"])
    scores = np.asarray(doc["scores"])
    observed, mask = _values_from_none(doc["data"]["observed"])
    return FpcaFit(
        grid=grid,
        mu=mu,
        psi=psi,
        lam=np.asarray(doc["lambda"]),
        sigma2=float(doc["sigma2"]),
        scores=scores,
        pve_achieved=float(doc["pve_achieved"]),
        fitted=reconstruct(mu, scores, psi),
        subject_ids=np.array(doc["subject_ids"], dtype=object),
        visit_indices=np.array(doc["visit_indices"], dtype=int),
        observed=observed,
        mask=mask,
        visit_times=None if doc["visit_times"] is None else np.asarray(doc["visit_times"]),
    )


# ---------------------------------------------------------------------------
# mfpca


def _mfpca_doc(fit: MfpcaFit) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "mfpca",
        "grid": _grid_doc(fit.grid),
        "mu": _lst(fit.mu),
        "visit_means": None
        if fit.visit_means is None
        else {str(j): _lst(eta) for j, eta in sorted(fit.visit_means.items())},
        "level1": {
            "psi": _lst(fit.psi1),
            "lambda": _lst(fit.lam1),
            "scores": _lst(fit.scores1),
            "subjects": [str(s) for s in fit.subjects],
        },
        "level2": {
            "psi": _lst(fit.psi2),
            "lambda": _lst(fit.lam2),
            "scores": _lst(fit.scores2),
        },
        "sigma2": float(fit.sigma2),
        "pve_achieved": [float(p) for p in fit.pve_achieved],
        "subject_ids": [str(s) for s in fit.subject_ids],
        "visit_indices": [int(v) for v in fit.visit_indices],
        "data": {"observed": _values_with_none(fit.observed, fit.mask)},
    }


def _mfpca_from(doc: dict) -> MfpcaFit:
    grid = _grid_from(doc["grid"])
    mu = np.asarray(doc["mu"])
    visit_means = None
    if doc["visit_means"] is not None:
        visit_means = {int(j): np.asarray(eta) for j, eta in doc["visit_means"].items()}
    lvl1, lvl2 = doc["level1"], doc["level2"]
    psi1 = np.asarray(lvl1["psi"]).reshape(len(lvl1["lambda"]), grid.n_points)
    psi2 = np.asarray(lvl2["psi"]).reshape(len(lvl2["lambda"]), grid.n_points)
    scores1 = np.asarray(lvl1["scores"])
    scores2 = np.asarray(lvl2["scores"])
    subjects = [str(s) for s in lvl1["subjects"]]
    subject_ids = np.array(doc["subject_ids"], dtype=object)
    visit_indices = np.array(doc["visit_indices"], dtype=int)
    observed, mask = _values_from_none(doc["data"]["observed"])

    n_rows = len(subject_ids)
    if scores2.size == 0:
        scores2 = np.zeros((n_rows, 0))
    row_of_subject = {s: i for i, s in enumerate(subjects)}
    fitted = np.tile(mu, (n_rows, 1))
    if visit_means:
        for j, eta in visit_means.items():
            fitted[visit_indices == j] += eta
    for r in range(n_rows):
        fitted[r] += scores1[row_of_subject[subject_ids[r]]] @ psi1
        if psi2.shape[0]:
            fitted[r] += scores2[r] @ psi2

    return MfpcaFit(
        grid=grid,
        mu=mu,
        visit_means=visit_means,
        psi1=psi1,
        lam1=np.asarray(lvl1["lambda"]),
        scores1=scores1,
        psi2=psi2,
        lam2=np.asarray(lvl2["lambda"]),
        scores2=scores2,
        sigma2=float(doc["sigma2"]),
        fitted=fitted,
        subjects=subjects,
        subject_ids=subject_ids,
        visit_indices=visit_indices,
        observed=observed,
        mask=mask,
        pve_achieved=tuple(doc["pve_achieved"]),
    )


# ---------------------------------------------------------------------------
# tvfpca


def _dynamics_doc(dyn: ScoreDynamics) -> dict:
    if dyn.method == "lme":
        return {
            "method": "lme",
            "fixed": [float(dyn.fixed[0]), float(dyn.fixed[1])],
            "re_cov": _lst(dyn.re_cov),
            "resid_var": float(dyn.resid_var),
            "converged": bool(dyn.converged),
        }
    return {
        "method": "fpca",
        "t_grid": _lst(dyn.t_grid),
        "phi": _lst(dyn.phi),
        "variances": _lst(dyn.variances),
        "resid_var": float(dyn.resid_var),
    }


def _dynamics_from(doc: dict) -> ScoreDynamics:
    if doc["method"] == "lme":
        return ScoreDynamics(
            method="lme",
            fixed=(float(doc["fixed"][0]), float(doc["fixed"][1])),
            re_cov=np.asarray(doc["re_cov"]),
            resid_var=float(doc["resid_var"]),
            converged=bool(doc["converged"]),
        )
    t_grid = np.asarray(doc["t_grid"])
    phi = np.asarray(doc["phi"]).reshape(len(doc["variances"]), t_grid.size)
    return ScoreDynamics(
        method="fpca",
        t_grid=t_grid,
        phi=phi,
        variances=np.asarray(doc["variances"]),
        resid_var=float(doc["resid_var"]),
    )


def _tvfpca_doc(fit: TvFpcaFit) -> dict:
    t_slices, mu_values = fit.mu_slices()
    pm = [None if np.isnan(v) else float(v) for v in fit.pointwise_mean]
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "tvfpca",
        "grid": _grid_doc(fit.grid),
        "t_range": [float(fit.t_range[0]), float(fit.t_range[1])],
        "mu_surface": {"T": _lst(t_slices), "values": _lst(mu_values)},
        "pointwise_mean": pm,
        "marginal_sigma": _lst(fit.marginal_sigma),
        "psi": _lst(fit.psi),
        "lambda": _lst(fit.lam),
        "sigma2": float(fit.sigma2),
        "pve_achieved": float(fit.pve_achieved),
        "raw_scores": _lst(fit.raw_scores),
        "dynamics": [_dynamics_doc(d) for d in fit.dynamics],
        "subject_ids": [str(s) for s in fit.subject_ids],
        "visit_indices": [int(v) for v in fit.visit_indices],
        "visit_times": _lst(fit.visit_times),
        "data": {"observed": _values_with_none(fit.observed, fit.mask)},
    }


def _tvfpca_from(doc: dict) -> TvFpcaFit:
    grid = _grid_from(doc["grid"])
    mu_doc = doc["mu_surface"]
    surface = SlicedMeanSurface(np.asarray(mu_doc["T"]), np.asarray(mu_doc["values"]))
    observed, mask = _values_from_none(doc["data"]["observed"])
    pm = np.array([np.nan if v is None else float(v) for v in doc["pointwise_mean"]])
    return TvFpcaFit(
        grid=grid,
        t_range=(float(doc["t_range"][0]), float(doc["t_range"][1])),
        mu_surface=surface,
        pointwise_mean=pm,
        marginal_sigma=np.asarray(doc["marginal_sigma"]),
        psi=np.asarray(doc["psi"]).reshape(len(doc["lambda"]), grid.n_points),
        lam=np.asarray(doc["lambda"]),
        sigma2=float(doc["sigma2"]),
        raw_scores=np.asarray(doc["raw_scores"]),
        dynamics=[_dynamics_from(d) for d in doc["dynamics"]],
        subject_ids=np.array(doc["subject_ids"], dtype=object),
        visit_indices=np.array(doc["visit_indices"], dtype=int),
        visit_times=np.asarray(doc["visit_times"]),
        observed=observed,
        mask=mask,
        pve_achieved=float(doc["pve_achieved"]),
    )


# ---------------------------------------------------------------------------
# fosr


def _fosr_doc(fit: FosrFit) -> dict:
    return {
        "format": FORMAT,
        "version": VERSION,
        "kind": "fosr",
        "grid": _grid_doc(fit.grid),
        "terms": [
            {
                "name": t.name,
                "kind": t.kind,
                "levels": list(t.levels),
                "columns": list(t.columns),
            }
            for t in fit.terms
        ],
        "column_names": list(fit.column_names),
        "beta": _lst(fit.beta),
        "beta_se": _lst(fit.beta_se),
        "residuals": _lst(fit.residuals),
        "depths": _lst(fit.depths),
        "residual_cov": {
            "psi": _lst(fit.resid_psi),
            "lambda": _lst(fit.resid_lam),
            "sigma2": float(fit.resid_sigma2),
        },
        "design": _lst(fit.design),
        "lam": float(fit.lam),
        "level": float(fit.level),
        "subject_ids": [str(s) for s in fit.subject_ids],
        "visit_indices": [int(v) for v in fit.visit_indices],
        "covariates": {name: _covariate_doc(c) for name, c in fit.covariates.items()},
    }


def _fosr_from(doc: dict) -> FosrFit:
    grid = _grid_from(doc["grid"])
    beta = np.asarray(doc["beta"])
    residuals = np.asarray(doc["residuals"])
    design = np.asarray(doc["design"])
    if design.ndim == 1:
        design = design.reshape(len(doc["subject_ids"]), -1)
    rc = doc["residual_cov"]
    resid_lam = np.asarray(rc["lambda"])
    resid_psi = np.asarray(rc["psi"]).reshape(resid_lam.size, grid.n_points)
    observed = design @ beta + residuals
    return FosrFit(
        grid=grid,
        terms=[
            TermCoding(
                name=t["name"],
                kind=t["kind"],
                levels=tuple(t["levels"]),
                columns=tuple(t["columns"]),
            )
            for t in doc["terms"]
        ],
        column_names=list(doc["column_names"]),
        beta=beta,
        beta_se=np.asarray(doc["beta_se"]),
        residuals=residuals,
        resid_psi=resid_psi,
        resid_lam=resid_lam,
        resid_sigma2=float(rc["sigma2"]),
        depths=np.asarray(doc["depths"]),
        design=design,
        observed=observed,
        subject_ids=np.array(doc["subject_ids"], dtype=object),
        visit_indices=np.array(doc["visit_indices"], dtype=int),
        covariates={name: _covariate_from(name, c) for name, c in doc["covariates"].items()},
        lam=float(doc["lam"]),
        level=float(doc["level"]),
    )
