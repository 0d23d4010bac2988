"""Read-only HTTP facade over fitted models.

Models are loaded into an immutable registry before serving; every
endpoint delegates to the owning module's pure operation and returns the
numeric payload the explorer plots.  Dispatch follows the model kind: a
route asked of the wrong kind answers 409 with the expected kind named.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles

from . import fpca as fpca_ops
from . import fosr as fosr_ops
from . import tvfpca as tv_ops
from .dataset import DataError
from .depth import depth_order
from .serialize import load_fit

__all__ = ["ModelRegistry", "create_app", "serve"]


class ApiError(Exception):
    def __init__(self, status: int, error: str, detail: str):
        self.status = status
        self.error = error
        self.detail = detail
        super().__init__(detail)


@dataclass
class ModelEntry:
    model_id: str
    kind: str
    fit: object
    source: Optional[str] = None


class ModelRegistry:
    """Immutable map of model id -> loaded fit."""

    def __init__(self):
        self._entries: dict[str, ModelEntry] = {}

    def add(self, model_id: str, fit, source: Optional[str] = None) -> None:
        if model_id in self._entries:
            raise DataError(f"duplicate model id {model_id!r}")
        self._entries[model_id] = ModelEntry(model_id=model_id, kind=fit.model_kind, fit=fit,
                                             source=source)

    def add_file(self, path) -> str:
        path = Path(path)
        model_id = path.stem
        self.add(model_id, load_fit(path), source=str(path))
        return model_id

    def get(self, model_id: str) -> ModelEntry:
        entry = self._entries.get(model_id)
        if entry is None:
            raise ApiError(404, "not_found", f"unknown model id {model_id!r}")
        return entry

    def entries(self) -> list[ModelEntry]:
        return list(self._entries.values())

    def __len__(self) -> int:
        return len(self._entries)


def _require_kind(entry: ModelEntry, kinds, feature: str):
    if entry.kind not in kinds:
        expected = " or ".join(kinds)
        raise ApiError(409, "kind_mismatch", f"{feature} requires kind {expected}")
    return entry.fit


def _curve(x) -> list:
    return [None if np.isnan(v) else float(v) for v in np.asarray(x, dtype=float)]


def _matrix(x) -> list:
    return [_curve(row) for row in np.asarray(x, dtype=float)]


def _level_components(fit, level: int):
    if level == 1:
        return fit.psi1, fit.lam1
    if level == 2:
        return fit.psi2, fit.lam2
    raise ApiError(400, "bad_request", "level must be 1 or 2")


def create_app(registry: ModelRegistry, static_dir=None) -> FastAPI:
    app = FastAPI(title="fdaw explorer API")
    app.add_middleware(
        CORSMiddleware, allow_origins=["*"], allow_methods=["GET", "POST"], allow_headers=["*"]
    )

    @app.exception_handler(ApiError)
    async def _api_error(_req: Request, exc: ApiError):
        return JSONResponse(status_code=exc.status, content={"error": exc.error, "detail": exc.detail})

    @app.exception_handler(DataError)
    async def _data_error(_req: Request, exc: DataError):
        return JSONResponse(status_code=400, content={"error": "bad_request", "detail": str(exc)})

    @app.get("/api/models")
    def list_models():
        return [{"id": e.model_id, "kind": e.kind} for e in registry.entries()]

    @app.get("/api/model/{model_id}/summary")
    def summary(model_id: str):
        entry = registry.get(model_id)
        fit = entry.fit
        out = {
            "id": entry.model_id,
            "kind": entry.kind,
            "n_points": int(fit.grid.n_points),
            "grid": _curve(fit.grid.points),
        }
        if entry.kind == "fpca":
            out.update(
                n_curves=int(fit.scores.shape[0]),
                n_components=fit.n_components,
                lambda_=_curve(fit.lam),
                sigma2=float(fit.sigma2),
                pve_achieved=float(fit.pve_achieved),
                subjects=[str(s) for s in fit.subject_ids],
            )
        elif entry.kind == "mfpca":
            k1, k2 = fit.n_components
            out.update(
                n_curves=int(fit.observed.shape[0]),
                n_components=[k1, k2],
                sigma2=float(fit.sigma2),
                subjects=list(fit.subjects),
                visit_indices=[int(v) for v in fit.visit_indices],
                twoway=fit.visit_means is not None,
            )
        elif entry.kind == "tvfpca":
            out.update(
                n_curves=int(fit.observed.shape[0]),
                n_components=fit.n_components,
                lambda_=_curve(fit.lam),
                sigma2=float(fit.sigma2),
                t_range=[float(fit.t_range[0]), float(fit.t_range[1])],
                subjects=fit.subjects(),
                dynamics_method=fit.dynamics[0].method if fit.dynamics else None,
            )
        else:
            out.update(
                n_curves=int(fit.observed.shape[0]),
                terms=[
                    {"name": t.name, "kind": t.kind, "levels": list(t.levels),
                     "columns": list(t.columns)}
                    for t in fit.terms
                ],
                covariates={
                    name: {
                        "kind": c.kind,
                        "levels": list(c.levels),
                        "values": [None if (c.kind == "continuous" and np.isnan(v)) or v is None
                                   else (float(v) if c.kind == "continuous" else str(v))
                                   for v in c.values],
                    }
                    for name, c in fit.covariates.items()
                },
                subjects=[str(s) for s in fit.subject_ids],
                level=float(fit.level),
            )
        return out

    @app.get("/api/model/{model_id}/components")
    def components(model_id: str, k: int = 1, level: int = 1):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fpca", "mfpca", "tvfpca"), "components")
        if entry.kind == "fpca":
            upper, lower = fpca_ops.component_band(fit, k)
            center, psi, lam = fit.mu, fit.psi[k - 1], fit.lam[k - 1]
            factor = 1.0
        elif entry.kind == "mfpca":
            psi_mat, lam_vec = _level_components(fit, level)
            if not (1 <= k <= lam_vec.size):
                raise ApiError(400, "bad_request", f"component k={k} out of range 1..{lam_vec.size}")
            psi, lam = psi_mat[k - 1], lam_vec[k - 1]
            center = fit.mu
            half = np.sqrt(lam) * psi
            upper, lower = center + half, center - half
            factor = 1.0
        else:
            # tvfpca band: pointwise mean +/- 2 sqrt(lambda_k) psi_k
            if not (1 <= k <= fit.n_components):
                raise ApiError(400, "bad_request", f"component k={k} out of range 1..{fit.n_components}")
            psi, lam = fit.psi[k - 1], fit.lam[k - 1]
            center = fit.pointwise_mean
            half = 2.0 * np.sqrt(lam) * psi
            upper, lower = center + half, center - half
            factor = 2.0
        return {
            "k": k,
            "level": level if entry.kind == "mfpca" else None,
            "s": _curve(fit.grid.points),
            "center": _curve(center),
            "upper": _curve(upper),
            "lower": _curve(lower),
            "psi": _curve(psi),
            "lambda_k": float(lam),
            "band_factor": factor,
        }

    @app.get("/api/model/{model_id}/scree")
    def scree(model_id: str, level: int = 1):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fpca", "mfpca", "tvfpca"), "scree")
        if entry.kind == "mfpca":
            psi_mat, lam_vec = _level_components(fit, level)
            if lam_vec.size == 0:
                return {"level": level, "entries": []}
            cum = np.cumsum(lam_vec) / lam_vec.sum()
            rows = [(i + 1, float(lam_vec[i]), float(cum[i])) for i in range(lam_vec.size)]
        else:
            rows = fpca_ops.scree_data(fit)
        return {
            "level": level if entry.kind == "mfpca" else None,
            "entries": [{"k": k, "lambda": lam, "cum_pve": pve} for k, lam, pve in rows],
        }

    @app.post("/api/model/{model_id}/lincom")
    async def lincom(model_id: str, request: Request):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fpca", "mfpca"), "lincom")
        body = await request.json()
        if not isinstance(body, dict) or "scores" not in body:
            raise ApiError(400, "bad_request", "body must carry field 'scores'")
        scores = body["scores"]
        if entry.kind == "fpca":
            curve = fpca_ops.lincom_curve(fit, scores)
        else:
            level = int(body.get("level", 1))
            psi_mat, lam_vec = _level_components(fit, level)
            c = np.asarray(scores, dtype=float).ravel()
            if c.size != lam_vec.size:
                raise ApiError(400, "bad_request", f"scores must have length {lam_vec.size}")
            curve = fit.mu + c @ psi_mat
        return {"s": _curve(fit.grid.points), "curve": _curve(curve)}

    @app.get("/api/model/{model_id}/subject/{subject}/fitted")
    def subject_fitted(model_id: str, subject: str, visits: Optional[str] = None):
        entry = registry.get(model_id)
        fit = entry.fit
        rows = np.flatnonzero(fit.subject_ids == subject)
        if rows.size == 0:
            raise ApiError(404, "not_found", f"unknown subject {subject!r}")
        if visits:
            try:
                wanted = {int(v) for v in visits.split(",") if v != ""}
            except ValueError:
                raise ApiError(400, "bad_request", f"bad visits list {visits!r}") from None
            rows = rows[np.isin(fit.visit_indices[rows], list(wanted))]
        if entry.kind == "fosr":
            fitted = fit.design[rows] @ fit.beta
            observed = fit.observed[rows]
            mask = np.ones_like(observed, dtype=bool)
        else:
            fitted = fit.fitted[rows] if entry.kind != "tvfpca" else _tv_fitted(fit, rows)
            observed = fit.observed[rows]
            mask = fit.mask[rows]
        out = {
            "subject": subject,
            "s": _curve(fit.grid.points),
            "visits": [int(v) for v in fit.visit_indices[rows]],
            "fitted": _matrix(fitted),
            "observed": [
                [None if not m else float(v) for v, m in zip(vrow, mrow)]
                for vrow, mrow in zip(observed, mask)
            ],
        }
        if entry.kind == "tvfpca":
            out["visit_times"] = _curve(fit.visit_times[rows])
        return out

    @app.get("/api/model/{model_id}/scores")
    def scores(model_id: str, kx: int = 1, ky: int = 2, level: int = 1):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fpca", "mfpca"), "scores")
        if entry.kind == "fpca":
            mat = fit.scores
            ids = [str(s) for s in fit.subject_ids]
            visits = [int(v) for v in fit.visit_indices]
        else:
            psi_mat, lam_vec = _level_components(fit, level)
            if level == 1:
                mat = fit.scores1
                ids = list(fit.subjects)
                visits = [None] * len(ids)
            else:
                mat = fit.scores2
                ids = [str(s) for s in fit.subject_ids]
                visits = [int(v) for v in fit.visit_indices]
        K = mat.shape[1]
        if not (1 <= kx <= K and 1 <= ky <= K):
            raise ApiError(400, "bad_request", f"kx, ky must lie in 1..{K}")
        return {
            "kx": kx,
            "ky": ky,
            "level": level if entry.kind == "mfpca" else None,
            "points": [
                {"subject": ids[i], "visit": visits[i],
                 "x": float(mat[i, kx - 1]), "y": float(mat[i, ky - 1])}
                for i in range(mat.shape[0])
            ],
        }

    @app.get("/api/model/{model_id}/coef/{term}")
    def coef(model_id: str, term: str, level_conf: float = 0.95):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fosr",), "coef")
        est, lo, hi = fosr_ops.coef_with_bands(fit, term, level_conf)
        column = fosr_ops._resolve_column(fit, term)
        j = fit.column_names.index(column)
        return {
            "term": term,
            "column": column,
            "level": level_conf,
            "s": _curve(fit.grid.points),
            "estimate": _curve(est),
            "lower": _curve(lo),
            "upper": _curve(hi),
            "se": _curve(fit.beta_se[j]),
        }

    @app.post("/api/model/{model_id}/predict")
    async def predict(model_id: str, request: Request):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fosr",), "predict")
        body = await request.json()
        if not isinstance(body, dict) or "x" not in body or not isinstance(body["x"], dict):
            raise ApiError(400, "bad_request", "body must carry object field 'x'")
        curve = fosr_ops.predict_mean(fit, body["x"])
        return {"s": _curve(fit.grid.points), "curve": _curve(curve)}

    @app.get("/api/model/{model_id}/residuals")
    def residuals(model_id: str, order: str = "depth"):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("fosr",), "residuals")
        if order not in ("depth", "none"):
            raise ApiError(400, "bad_request", "order must be 'depth' or 'none'")
        result = depth_order(fit.depths)
        return {
            "s": _curve(fit.grid.points),
            "subjects": [str(s) for s in fit.subject_ids],
            "residuals": _matrix(fit.residuals),
            "depths": _curve(fit.depths),
            "order": [int(i) for i in result.order],
            "median_index": int(result.median_index),
            "outlier_indices": [int(i) for i in result.outlier_indices],
        }

    @app.get("/api/model/{model_id}/visit-times")
    def visit_times(model_id: str, bins: int = 20):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("tvfpca",), "visit-times")
        summary_data = tv_ops.visit_time_summary(fit, bins=bins)
        return {
            "per_subject": {s: [float(t) for t in ts] for s, ts in summary_data["per_subject"].items()},
            "hist_edges": _curve(summary_data["hist_edges"]),
            "hist_counts": [int(c) for c in summary_data["hist_counts"]],
            "rug": _curve(summary_data["rug"]),
        }

    @app.get("/api/model/{model_id}/mean-surface")
    def mean_surface(model_id: str, nT: int = 21):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("tvfpca",), "mean-surface")
        t_values, values = fit.mu_slices(nT)
        return {"s": _curve(fit.grid.points), "T": _curve(t_values), "values": _matrix(values)}

    @app.get("/api/model/{model_id}/marginal-cov")
    def marginal_cov(model_id: str):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("tvfpca",), "marginal-cov")
        return {"s": _curve(fit.grid.points), "values": _matrix(fit.marginal_sigma)}

    @app.get("/api/model/{model_id}/score-dynamics/{k}")
    def score_dynamics(model_id: str, k: int, nT: int = 21):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("tvfpca",), "score-dynamics")
        if not (1 <= k <= fit.n_components):
            raise ApiError(400, "bad_request", f"component k={k} out of range 1..{fit.n_components}")
        lo, hi = fit.t_range
        t_values = np.linspace(lo, hi, nT)
        G = fit.dynamics[k - 1].gk(t_values)
        predictions = {}
        raw = {}
        for subject in fit.subjects():
            rows = fit.rows_for_subject(subject)
            predictions[subject] = _curve(tv_ops.predict_scores(fit, subject, k, t_values))
            raw[subject] = [
                {"T": float(fit.visit_times[r]), "score": float(fit.raw_scores[r, k - 1])}
                for r in rows
            ]
        return {
            "k": k,
            "method": fit.dynamics[k - 1].method,
            "T": _curve(t_values),
            "G": _matrix(G),
            "predictions": predictions,
            "raw_scores": raw,
        }

    @app.get("/api/model/{model_id}/trajectory/{subject}")
    def trajectory(model_id: str, subject: str, nT: int = 21):
        entry = registry.get(model_id)
        fit = _require_kind(entry, ("tvfpca",), "trajectory")
        try:
            frames = tv_ops.predict_trajectory(fit, subject, nT)
        except DataError as exc:
            if "unknown subject" in str(exc):
                raise ApiError(404, "not_found", str(exc)) from None
            raise
        rows = fit.rows_for_subject(subject)
        return {
            "subject": subject,
            "s": _curve(fit.grid.points),
            "T": [T for T, _ in frames],
            "frames": [_curve(curve) for _, curve in frames],
            "observed": {
                "visit_times": _curve(fit.visit_times[rows]),
                "curves": [
                    [None if not m else float(v) for v, m in zip(vrow, mrow)]
                    for vrow, mrow in zip(fit.observed[rows], fit.mask[rows])
                ],
            },
        }

    if static_dir is not None and Path(static_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(static_dir), html=True), name="explorer")

    return app


def _tv_fitted(fit, rows):
    out = np.empty((rows.size, fit.grid.n_points))
    for i, r in enumerate(rows):
        mu = fit.mu_surface.at(fit.grid.points, float(fit.visit_times[r]))
        out[i] = mu + fit.raw_scores[r] @ fit.psi
    return out


def serve(registry: ModelRegistry, port: int = 8000, host: str = "127.0.0.1",
          static_dir=None) -> None:
    """Run the API server (blocking)."""
    import uvicorn

    if len(registry) == 0:
        raise DataError("serve requires at least one loaded model")
    app = create_app(registry, static_dir=static_dir)
    uvicorn.run(app, host=host, port=port, log_level="warning")
