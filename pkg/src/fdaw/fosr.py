"""Function-on-scalar regression by two-stage penalized GLS.

Coefficient functions are expanded in a cubic B-spline basis with a
second-difference penalty.  Stage 1 is penalized least squares on the
vectorized system with a GCV-selected smoothing parameter; stage 2 refits
by GLS using a low-rank-plus-noise residual covariance estimated by FPCA
on the stage-1 residual curves, with the smoothing parameter frozen.
Pointwise bands come from the GLS sandwich covariance.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import norm

from .dataset import Covariate, DataError, FunctionalDataset, Grid
from .depth import modified_band_depth
from .fpca import FpcaOptions, fit_fpca
from .numerics import SplineBasis, bspline_design, difference_matrix
from .numerics import _penalized_solve

__all__ = [
    "FosrOptions",
    "FosrFit",
    "TermCoding",
    "build_design",
    "fit_fosr",
    "coef_with_bands",
    "predict_mean",
]


@dataclass(frozen=True)
class TermCoding:
    """How one model term maps to design-matrix columns."""

    name: str  # "(intercept)" or covariate name
    kind: str  # "intercept" | "continuous" | "categorical"
    levels: tuple[str, ...] = ()  # categorical: full level list, first = reference
    columns: tuple[str, ...] = ()  # column labels, e.g. "sex[M]"


@dataclass
class FosrOptions:
    n_basis: Optional[int] = None
    pve: float = 0.95  # residual FPCA truncation
    lam: object = "auto"  # smoothing parameter or "auto" (GCV at stage 1)
    level: float = 0.95  # default confidence level for bands


@dataclass
class FosrFit:
    grid: Grid
    terms: list[TermCoding]  # intercept first
    column_names: list[str]  # one per design column
    beta: np.ndarray  # (n_columns, D)
    beta_se: np.ndarray  # (n_columns, D)
    residuals: np.ndarray  # (n, D)
    resid_psi: np.ndarray  # (K, D)
    resid_lam: np.ndarray
    resid_sigma2: float
    depths: np.ndarray  # modified band depth of the residual curves
    design: np.ndarray  # (n, n_columns)
    observed: np.ndarray  # complete-case curves
    subject_ids: np.ndarray
    visit_indices: np.ndarray
    covariates: dict[str, Covariate]  # complete-case rows, echoed for the UI
    lam: float
    level: float = 0.95
    model_kind: str = "fosr"

    @property
    def n_terms(self) -> int:
        return len(self.terms)


def build_design(ds: FunctionalDataset, terms: list[str], rows: Optional[np.ndarray] = None):
    """Design matrix with intercept first, reference-coded categoricals.

    Returns (X, codings, column_names).  Continuous covariates pass
    through; categorical levels are dummy-coded against the first level in
    sorted order.
    """
    if rows is None:
        rows = np.arange(ds.n_curves)
    n = rows.size
    columns = [np.ones(n)]
    names = ["(intercept)"]
    codings = [TermCoding(name="(intercept)", kind="intercept", columns=("(intercept)",))]
    for term in terms:
        if term not in ds.covariates:
            raise DataError(f"unknown covariate {term!r}")
        cov = ds.covariates[term]
        if cov.kind == "continuous":
            vals = np.asarray(cov.values, dtype=float)[rows]
            if np.any(np.isnan(vals)):
                raise DataError(f"covariate {term!r} has missing values")
            if np.ptp(vals) == 0:
                raise DataError(f"covariate {term!r} is constant (collinear with the intercept)")
            columns.append(vals)
            names.append(term)
            codings.append(TermCoding(name=term, kind="continuous", columns=(term,)))
        else:
            levels = cov.levels
            if len(levels) < 2:
                raise DataError(f"categorical covariate {term!r} needs at least 2 levels")
            vals = cov.values[rows]
            if any(v is None for v in vals):
                raise DataError(f"covariate {term!r} has missing values")
            cols = []
            for level in levels[1:]:
                columns.append(np.array([1.0 if v == level else 0.0 for v in vals]))
                label = f"{term}[{level}]"
                names.append(label)
                cols.append(label)
            codings.append(TermCoding(name=term, kind="categorical", levels=levels, columns=tuple(cols)))
    X = np.column_stack(columns)
    return X, codings, names


def _check_rank(X: np.ndarray, names: list[str]) -> None:
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        from scipy.linalg import qr

        _, _, piv = qr(X, mode="economic", pivoting=True)
        dropped = sorted(names[i] for i in piv[rank:])
        raise DataError(f"design matrix is rank deficient; collinear columns: {dropped}")


def _solve_stage(X, Y, theta, penalty, lam, sigma_inv_apply=None):
    """Penalized (generalized) least squares on the vectorized system.

    Solves min || Sigma^-1/2 (Y - X Gamma Theta^T) ||^2 + lam ||(I x D) vec Gamma||^2.
    ``sigma_inv_apply(M)`` right-multiplies a (.., D) array by Sigma^-1;
    identity when None.  Returns (Gamma, lam, A, G) where A = M2 + lam P and
    G = M2 are the pieces of the sandwich.
    """
    n, D = Y.shape
    p1 = X.shape[1]
    m = theta.shape[1]
    if sigma_inv_apply is None:
        theta_w = theta
        Yw = Y
    else:
        theta_w = sigma_inv_apply(theta.T).T  # Sigma^-1 Theta
        Yw = sigma_inv_apply(Y)
    n_cells = n * D
    M2 = np.kron(X.T @ X, theta.T @ theta_w) / n_cells
    b = (X.T @ (Yw @ theta)).ravel() / n_cells
    P = np.kron(np.eye(p1), penalty)
    yWy = float(np.sum(Y * Yw)) / n_cells
    coef, lam_out, _, _ = _penalized_solve(M2, b, P, lam, n_obs=n_cells, yWy=yWy, want_grid=False)
    gamma = coef.reshape(p1, m)
    A = M2 + lam_out * P
    return gamma, lam_out, A, M2


def fit_fosr(ds: FunctionalDataset, terms: list[str], opts: Optional[FosrOptions] = None) -> FosrFit:
    """Fit coefficient functions for the named covariates (plus intercept)."""
    opts = opts or FosrOptions()

    # complete cases: full curve and all requested covariates observed
    keep = ds.mask.all(axis=1)
    for term in terms:
        if term not in ds.covariates:
            raise DataError(f"unknown covariate {term!r}")
        keep &= ~ds.covariates[term].is_missing()
    rows = np.flatnonzero(keep)
    dropped = ds.n_curves - rows.size
    if dropped:
        warnings.warn(f"dropping {dropped} incomplete rows", stacklevel=2)

    X, codings, names = build_design(ds, terms, rows=rows)
    n, p1 = X.shape
    if n <= p1:
        raise DataError(f"need more than {p1} complete rows, got {n}")
    _check_rank(X, names)
    Y = ds.values[rows]

    pts = ds.grid.points
    D = pts.size
    if opts.n_basis is not None:
        basis = SplineBasis.with_n_basis((float(pts[0]), float(pts[-1])), opts.n_basis)
    else:
        basis = SplineBasis.for_points(pts)
    theta = bspline_design(basis, pts)  # (D, m)
    m = basis.n_basis
    Dm = difference_matrix(m, 2)
    penalty = Dm.T @ Dm

    gamma1, lam, _, _ = _solve_stage(X, Y, theta, penalty, opts.lam)
    resid1 = Y - X @ gamma1 @ theta.T

    # residual covariance by FPCA on the stage-1 residual curves
    resid_ds = FunctionalDataset(
        grid=ds.grid,
        values=resid1,
        mask=np.ones_like(resid1, dtype=bool),
        subject_ids=ds.subject_ids[rows].copy(),
        visit_indices=ds.visit_indices[rows].copy(),
    )
    try:
        rf = fit_fpca(resid_ds, FpcaOptions(pve=opts.pve, n_basis=opts.n_basis))
        resid_psi, resid_lam, resid_sigma2 = rf.psi, rf.lam, rf.sigma2
    except DataError:
        # residual process degenerate (or too few curves): white-noise model
        resid_psi = np.zeros((0, D))
        resid_lam = np.zeros(0)
        resid_sigma2 = float(np.mean(resid1 * resid1))

    scale = float(resid_lam.max(initial=0.0)) + resid_sigma2
    if scale <= 0:
        # residuals are exactly zero: stage 1 is already exact
        gamma2, A, M2 = gamma1, None, None
        beta_se = np.zeros((p1, D))
    else:
        sig2 = max(resid_sigma2, 1e-10 * scale)
        psi_t = resid_psi.T  # (D, K)
        K = resid_psi.shape[0]
        # normalize the weight so Sigma proportional to I reduces stage 2
        # to stage 1 exactly (the frozen lam keeps its stage-1 meaning)
        mean_diag = float(np.mean(np.sum(resid_lam[:, None] * resid_psi**2, axis=0))) + sig2
        if K:
            core = np.diag(1.0 / resid_lam) + (resid_psi @ psi_t) / sig2

            def sigma_inv_apply(Mrows: np.ndarray) -> np.ndarray:
                # right-multiply (.., D) rows by Sigma^-1 via Woodbury
                proj = Mrows @ psi_t  # (.., K)
                corr = np.linalg.solve(core, proj.T).T @ resid_psi
                return mean_diag * (Mrows - corr / sig2) / sig2

        else:

            def sigma_inv_apply(Mrows: np.ndarray) -> np.ndarray:
                return mean_diag * Mrows / sig2

        gamma2, _, A, M2 = _solve_stage(X, Y, theta, penalty, lam, sigma_inv_apply)
        A_inv = np.linalg.inv(A)
        # A and M2 carry a 1/(n*D) scaling and the weight carries a
        # mean_diag normalization; the sandwich restores both
        cov_gamma = A_inv @ M2 @ A_inv * mean_diag / (n * D)
        beta_se = np.empty((p1, D))
        for j in range(p1):
            block = cov_gamma[j * m : (j + 1) * m, j * m : (j + 1) * m]
            var = np.einsum("dp,pq,dq->d", theta, block, theta)
            beta_se[j] = np.sqrt(np.clip(var, 0.0, None))

    beta = gamma2 @ theta.T
    residuals = Y - X @ beta
    depths = modified_band_depth(residuals) if n >= 3 else np.ones(n)

    covariates = {
        name: _subset_covariate(cov, rows) for name, cov in ds.covariates.items()
    }
    return FosrFit(
        grid=ds.grid,
        terms=codings,
        column_names=names,
        beta=beta,
        beta_se=beta_se,
        residuals=residuals,
        resid_psi=resid_psi,
        resid_lam=resid_lam,
        resid_sigma2=resid_sigma2,
        depths=depths,
        design=X,
        observed=Y,
        subject_ids=ds.subject_ids[rows].copy(),
        visit_indices=ds.visit_indices[rows].copy(),
        covariates=covariates,
        lam=float(lam),
        level=opts.level,
    )


def _subset_covariate(cov: Covariate, rows: np.ndarray) -> Covariate:
    return Covariate(name=cov.name, kind=cov.kind, values=cov.values[rows], levels=cov.levels)


def coef_with_bands(fit: FosrFit, term: str, level: Optional[float] = None):
    """(estimate, lower, upper) pointwise band for one design column.

    ``term`` is a column name ("x", "sex[M]", "(intercept)"); for a
    categorical term with exactly two levels the bare covariate name works
    too.
    """
    level = fit.level if level is None else level
    if not (0.0 < level < 1.0):
        raise DataError(f"confidence level must be in (0, 1), got {level}")
    name = _resolve_column(fit, term)
    j = fit.column_names.index(name)
    z = norm.ppf((1.0 + level) / 2.0)
    est = fit.beta[j]
    half = z * fit.beta_se[j]
    return est, est - half, est + half


def _resolve_column(fit: FosrFit, term: str) -> str:
    if term in fit.column_names:
        return term
    for coding in fit.terms:
        if coding.name == term and len(coding.columns) == 1:
            return coding.columns[0]
    raise DataError(f"unknown term {term!r}; columns: {fit.column_names}")


def predict_mean(fit: FosrFit, x: dict) -> np.ndarray:
    """Conditional-mean curve for a covariate setting.

    Continuous terms default to 0 and categorical terms to their reference
    level when omitted.
    """
    row = np.zeros(len(fit.column_names))
    row[0] = 1.0
    known = {c.name for c in fit.terms if c.kind != "intercept"}
    for key in x:
        if key not in known:
            raise DataError(f"unknown term {key!r}")
    col = 1
    for coding in fit.terms:
        if coding.kind == "intercept":
            continue
        if coding.kind == "continuous":
            row[col] = float(x.get(coding.name, 0.0))
            col += 1
        else:
            value = x.get(coding.name, coding.levels[0])
            if value not in coding.levels:
                raise DataError(f"unknown level {value!r} for {coding.name!r}")
            for level, label in zip(coding.levels[1:], coding.columns):
                row[col] = 1.0 if value == level else 0.0
                col += 1
    return row @ fit.beta
