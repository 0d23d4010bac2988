"""Multilevel FPCA: between/within covariance split and two-level scores.

The between covariance averages products across distinct visits of the same
subject; the total covariance averages same-curve products (and carries the
measurement-error nugget on its diagonal); within = total - between
entrywise before any smoothing.  Level-1 and level-2 eigenfunctions come
from the smoothed between and within surfaces respectively, and scores are
estimated jointly per subject by BLUP.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import DataError, FunctionalDataset, Grid
from .fpca import (
    DegenerateDataError,
    EIG_TOL,
    choose_npc,
    estimate_mean,
    estimate_sigma2,
    raw_covariance,
    smooth_covariance,
    weighted_eigen,
)
from .numerics import Smoother1D, SplineBasis, smooth_1d

__all__ = ["MfpcaOptions", "MfpcaFit", "CovarianceSplit", "fit_mfpca", "split_covariances",
           "estimate_scores_ml"]


@dataclass
class MfpcaOptions:
    twoway: bool = False
    pve: float = 0.99  # applied per level
    npc1: Optional[int] = None
    npc2: Optional[int] = None
    n_basis: Optional[int] = None


@dataclass
class CovarianceSplit:
    between: np.ndarray  # (D, D), nan where no distinct-visit pair observed
    within: np.ndarray  # total - between, entrywise
    total: np.ndarray
    between_counts: np.ndarray
    total_counts: np.ndarray


@dataclass
class MfpcaFit:
    grid: Grid
    mu: np.ndarray
    visit_means: Optional[dict[int, np.ndarray]]  # eta_j, present iff twoway
    psi1: np.ndarray  # (K1, D)
    lam1: np.ndarray
    scores1: np.ndarray  # (n_subjects, K1)
    psi2: np.ndarray  # (K2, D); K2 may be 0
    lam2: np.ndarray
    scores2: np.ndarray  # (n_rows, K2)
    sigma2: float
    fitted: np.ndarray  # (n_rows, D)
    subjects: list[str]  # order of scores1 rows
    subject_ids: np.ndarray  # per row
    visit_indices: np.ndarray
    observed: np.ndarray
    mask: np.ndarray
    pve_achieved: tuple[float, float] = (1.0, 1.0)
    model_kind: str = "mfpca"

    @property
    def n_components(self) -> tuple[int, int]:
        return int(self.lam1.size), int(self.lam2.size)


def split_covariances(
    ds: FunctionalDataset, mu: np.ndarray, visit_means: Optional[dict[int, np.ndarray]] = None
) -> CovarianceSplit:
    """Between-, within-, and total-covariance matrices from centered rows.

    Between entry (a, b) averages products over ordered same-subject pairs
    of distinct visits; total averages same-curve products; within is their
    entrywise difference, computed before smoothing.
    """
    mu = np.asarray(mu, dtype=float)
    center = ds.values - mu
    if visit_means:
        for j, eta in visit_means.items():
            rows = ds.visit_indices == j
            center[rows] -= eta
    centered = np.where(ds.mask, center, 0.0)
    m = ds.mask.astype(np.int64)

    total_sums = centered.T @ centered
    total_counts = m.T @ m
    with np.errstate(invalid="ignore"):
        total = np.where(total_counts > 0, total_sums / np.maximum(total_counts, 1), np.nan)

    D = ds.n_points
    bet_sums = np.zeros((D, D))
    bet_counts = np.zeros((D, D), dtype=np.int64)
    for subject in ds.subjects():
        rows = ds.rows_for_subject(subject)
        if rows.size < 2:
            continue
        Z = centered[rows]
        Mm = m[rows]
        sz = Z.sum(axis=0)
        sm = Mm.sum(axis=0)
        # sum over ordered pairs j != j' of z_j(a) z_j'(b)
        bet_sums += np.outer(sz, sz) - Z.T @ Z
        bet_counts += np.outer(sm, sm) - Mm.T @ Mm
    with np.errstate(invalid="ignore"):
        between = np.where(bet_counts > 0, bet_sums / np.maximum(bet_counts, 1), np.nan)

    within = total - between
    return CovarianceSplit(
        between=between,
        within=within,
        total=total,
        between_counts=bet_counts,
        total_counts=total_counts,
    )


def _visit_means(ds: FunctionalDataset, mu: np.ndarray, n_basis: Optional[int]) -> dict[int, np.ndarray]:
    """Smoothed per-visit-index mean shifts eta_j."""
    pts = ds.grid.points
    means: dict[int, np.ndarray] = {}
    for j in sorted(set(int(v) for v in ds.visit_indices)):
        rows = np.flatnonzero(ds.visit_indices == j)
        if rows.size < 3:
            warnings.warn(f"visit {j} has fewer than 3 curves; eta_{j} set to 0", stacklevel=2)
            means[j] = np.zeros(pts.size)
            continue
        sub_mask = ds.mask[rows]
        sub_vals = np.where(sub_mask, ds.values[rows] - mu, 0.0)
        counts = sub_mask.sum(axis=0)
        with np.errstate(invalid="ignore"):
            pointwise = np.where(counts > 0, sub_vals.sum(axis=0) / np.maximum(counts, 1), np.nan)
        obs = counts > 0
        basis = SplineBasis.for_points(pts) if n_basis is None else SplineBasis.with_n_basis(
            (float(pts[0]), float(pts[-1])), n_basis
        )
        res = smooth_1d(pts[obs], pointwise[obs], smoother=Smoother1D(basis=basis), eval_points=pts)
        means[j] = res.fitted
    return means


def _truncate(vals: np.ndarray, psi_all: np.ndarray, pve: float, npc: Optional[int]):
    lam = np.clip(vals, 0.0, None)
    tol = EIG_TOL * max(1.0, lam.max(initial=0.0))
    lam[lam <= tol] = 0.0
    total = lam.sum()
    if total <= 0:
        return np.zeros(0), np.zeros((0, psi_all.shape[1])), 0.0
    if npc is not None:
        K = min(npc, int(np.sum(lam > 0)))
    else:
        K = choose_npc(lam, pve)
    return lam[:K].copy(), psi_all[:K].copy(), float(lam[:K].sum() / total)


def estimate_scores_ml(
    ds: FunctionalDataset,
    mu: np.ndarray,
    visit_means: Optional[dict[int, np.ndarray]],
    psi1: np.ndarray,
    lam1: np.ndarray,
    psi2: np.ndarray,
    lam2: np.ndarray,
    sigma2: float,
):
    """Joint BLUP of subject and subject-visit scores.

    Per subject all visits are stacked; level-1 columns repeat across visits
    while level-2 columns are visit-specific.  Solves the small system
    (Z^T Z + sigma2 G^-1) c = Z^T y; a 1e-10 ridge is added with a warning
    when the joint system is singular.
    """
    K1, K2 = psi1.shape[0], psi2.shape[0]
    center = ds.values - mu
    if visit_means:
        for j, eta in visit_means.items():
            center[ds.visit_indices == j] -= eta
    centered = np.where(ds.mask, center, 0.0)

    subjects = ds.subjects()
    scores1 = np.zeros((len(subjects), K1))
    scores2 = np.zeros((ds.n_curves, K2))
    g_inv_diag1 = 1.0 / lam1 if K1 else np.zeros(0)
    g_inv_diag2 = 1.0 / lam2 if K2 else np.zeros(0)

    for si, subject in enumerate(subjects):
        rows = ds.rows_for_subject(subject)
        J = rows.size
        blocks = []
        y_parts = []
        for r in rows:
            obs = ds.mask[r]
            y_parts.append(centered[r, obs])
            blocks.append((psi1[:, obs].T, psi2[:, obs].T))
        n_obs = sum(len(y) for y in y_parts)
        Z = np.zeros((n_obs, K1 + J * K2))
        pos = 0
        for j, (B1, B2) in enumerate(blocks):
            rj = B1.shape[0]
            if K1:
                Z[pos : pos + rj, :K1] = B1
            if K2:
                Z[pos : pos + rj, K1 + j * K2 : K1 + (j + 1) * K2] = B2
            pos += rj
        y = np.concatenate(y_parts) if y_parts else np.zeros(0)
        g_inv = np.concatenate([g_inv_diag1, np.tile(g_inv_diag2, J)])
        A = Z.T @ Z + sigma2 * np.diag(g_inv)
        rhs = Z.T @ y
        try:
            sol = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            warnings.warn("singular joint score system; adding ridge 1e-10", stacklevel=2)
            sol = np.linalg.solve(A + 1e-10 * np.eye(A.shape[0]), rhs)
        if K1:
            scores1[si] = sol[:K1]
        if K2:
            for j, r in enumerate(rows):
                scores2[r] = sol[K1 + j * K2 : K1 + (j + 1) * K2]
    return scores1, scores2


def fit_mfpca(ds: FunctionalDataset, opts: Optional[MfpcaOptions] = None) -> MfpcaFit:
    """Fit the two-level FPCA model."""
    opts = opts or MfpcaOptions()
    multi = [s for s in ds.subjects() if ds.rows_for_subject(s).size >= 2]
    if len(multi) < 2:
        raise DataError(
            "within-subject covariance unidentifiable: need at least 2 subjects with 2+ visits"
        )

    mu = estimate_mean(ds, n_basis=opts.n_basis)
    visit_means = _visit_means(ds, mu, opts.n_basis) if opts.twoway else None

    split = split_covariances(ds, mu, visit_means)
    between_smooth, _ = smooth_covariance(
        split.between, split.between_counts, ds.grid, n_basis=opts.n_basis, omit_diagonal=False
    )
    # within is defined only where both total and between have data
    within_counts = np.where((split.total_counts > 0) & (split.between_counts > 0), 1, 0)
    within_smooth, _ = smooth_covariance(
        split.within, within_counts, ds.grid, n_basis=opts.n_basis, omit_diagonal=True
    )

    vals1, psi1_all = weighted_eigen(between_smooth, ds.grid)
    vals2, psi2_all = weighted_eigen(within_smooth, ds.grid)
    lam1, psi1, pve1 = _truncate(vals1, psi1_all, opts.pve, opts.npc1)
    if lam1.size == 0:
        raise DegenerateDataError("degenerate data: no positive level-1 eigenvalues")
    lam2, psi2, pve2 = _truncate(vals2, psi2_all, opts.pve, opts.npc2)
    if lam2.size == 0:
        warnings.warn("no positive level-2 eigenvalues; level 2 omitted", stacklevel=2)

    smooth_total_diag = np.diag(between_smooth) + np.diag(within_smooth)
    sigma2 = estimate_sigma2(np.diag(split.total), smooth_total_diag, ds.grid.weights)

    scores1, scores2 = estimate_scores_ml(ds, mu, visit_means, psi1, lam1, psi2, lam2, sigma2)

    subjects = ds.subjects()
    row_of_subject = {s: i for i, s in enumerate(subjects)}
    fitted = np.tile(mu, (ds.n_curves, 1))
    if visit_means:
        for j, eta in visit_means.items():
            fitted[ds.visit_indices == j] += eta
    for r in range(ds.n_curves):
        fitted[r] += scores1[row_of_subject[ds.subject_ids[r]]] @ psi1
        if lam2.size:
            fitted[r] += scores2[r] @ psi2

    return MfpcaFit(
        grid=ds.grid,
        mu=mu,
        visit_means=visit_means,
        psi1=psi1,
        lam1=lam1,
        scores1=scores1,
        psi2=psi2,
        lam2=lam2,
        scores2=scores2,
        sigma2=sigma2,
        fitted=fitted,
        subjects=subjects,
        subject_ids=np.asarray(ds.subject_ids).copy(),
        visit_indices=np.asarray(ds.visit_indices).copy(),
        observed=ds.values.copy(),
        mask=ds.mask.copy(),
        pve_achieved=(pve1, pve2),
    )
