"""Cross-sectional functional principal component analysis.

Pipeline: pooled mean smooth -> raw covariance -> bivariate smooth with the
diagonal omitted (nugget) -> weighted eigen-decomposition -> truncation by
percent variance explained -> noise variance from the diagonal gap ->
mixed-model (BLUP) scores -> fitted curves.  Eigenfunctions are orthonormal
in the quadrature-weighted inner product.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import DataError, FunctionalDataset, Grid
from .numerics import (
    Smoother1D,
    Smoother2D,
    SplineBasis,
    smooth_1d,
    smooth_2d,
    sym_eigen,
)

__all__ = [
    "FpcaOptions",
    "FpcaFit",
    "DegenerateDataError",
    "fit_fpca",
    "raw_covariance",
    "choose_npc",
    "estimate_sigma2",
    "estimate_scores",
    "component_band",
    "lincom_curve",
    "scree_data",
]

# Relative floor below which an eigenvalue is treated as zero.
EIG_TOL = 1e-12


class DegenerateDataError(DataError):
    """No positive eigenvalues remain after truncation."""


@dataclass
class FpcaOptions:
    """Tuning knobs for :func:`fit_fpca`.

    ``pve`` picks the truncation lag; ``npc`` overrides it when given.
    ``n_basis`` overrides the default per-axis spline basis size.
    """

    pve: float = 0.99
    npc: Optional[int] = None
    n_basis: Optional[int] = None
    mean_smoother: Optional[Smoother1D] = None
    cov_smoother: Optional[Smoother2D] = None


@dataclass
class FpcaFit:
    grid: Grid
    mu: np.ndarray  # (D,)
    psi: np.ndarray  # (K, D), orthonormal under grid.weights
    lam: np.ndarray  # (K,), descending
    sigma2: float
    scores: np.ndarray  # (n, K)
    pve_achieved: float
    fitted: np.ndarray  # (n, D) = mu + scores @ psi
    subject_ids: np.ndarray
    visit_indices: np.ndarray
    observed: np.ndarray  # (n, D) with nan at missing cells
    mask: np.ndarray
    visit_times: Optional[np.ndarray] = None
    model_kind: str = "fpca"

    @property
    def n_components(self) -> int:
        return int(self.lam.size)


def estimate_mean(ds: FunctionalDataset, smoother: Optional[Smoother1D] = None,
                  n_basis: Optional[int] = None) -> np.ndarray:
    """Mean curve by smoothing all observed (t, y) points pooled across curves."""
    pts = ds.grid.points
    tiled = np.tile(pts, (ds.n_curves, 1))
    x = tiled[ds.mask]
    y = ds.values[ds.mask]
    if smoother is None:
        basis = SplineBasis.for_points(pts) if n_basis is None else SplineBasis.with_n_basis(
            (float(pts[0]), float(pts[-1])), n_basis
        )
        smoother = Smoother1D(basis=basis)
    result = smooth_1d(x, y, smoother=smoother, eval_points=pts)
    return result.fitted


def raw_covariance(ds: FunctionalDataset, mu: np.ndarray):
    """Sample covariance of centered curves with per-cell pair counts.

    Entry (a, b) averages (Y_i(t_a) - mu(t_a)) (Y_i(t_b) - mu(t_b)) over the
    curves observing both cells.  Cells with pair count 0 are nan (to be
    filled by the smoother).  Returns (cov, counts).
    """
    mu = np.asarray(mu, dtype=float)
    if mu.shape != (ds.n_points,):
        raise DataError("mu must live on the dataset grid")
    centered = np.where(ds.mask, ds.values - mu, 0.0)
    counts = ds.mask.astype(np.int64).T @ ds.mask.astype(np.int64)
    sums = centered.T @ centered
    with np.errstate(invalid="ignore", divide="ignore"):
        cov = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    return cov, counts


def smooth_covariance(
    cov_raw: np.ndarray,
    counts: np.ndarray,
    grid: Grid,
    smoother: Optional[Smoother2D] = None,
    n_basis: Optional[int] = None,
    omit_diagonal: bool = True,
):
    """Bivariate smooth of a raw covariance, optionally omitting the diagonal.

    Returns the smoothed symmetric matrix on the full grid and the fitted
    surface object.
    """
    pts = grid.points
    S, T = np.meshgrid(pts, pts, indexing="ij")
    include = counts > 0
    if omit_diagonal:
        include = include & ~np.eye(pts.size, dtype=bool)
    if smoother is None:
        basis = SplineBasis.for_points(pts) if n_basis is None else SplineBasis.with_n_basis(
            (float(pts[0]), float(pts[-1])), n_basis
        )
        smoother = Smoother2D(basis_s=basis, basis_t=basis)
    surface = smooth_2d(
        S.ravel(),
        T.ravel(),
        np.where(include, cov_raw, 0.0).ravel(),
        mask=include.ravel(),
        smoother=smoother,
    )
    smooth = surface.evaluate(pts, pts)
    smooth = (smooth + smooth.T) / 2.0
    return smooth, surface


def weighted_eigen(cov: np.ndarray, grid: Grid):
    """Eigen-decomposition in the quadrature-weighted L2 geometry.

    Decomposes W^(1/2) C W^(1/2) and maps vectors back by W^(-1/2) so the
    returned eigenfunctions (rows) satisfy psi W psi^T = I.
    """
    sqw = np.sqrt(grid.weights)
    A = cov * np.outer(sqw, sqw)
    vals, vecs = sym_eigen(A)
    psi = (vecs / sqw[:, None]).T  # rows are eigenfunctions
    # canonical sign on the eigenfunctions themselves
    for k in range(psi.shape[0]):
        idx = int(np.argmax(np.abs(psi[k])))
        if psi[k, idx] < 0:
            psi[k] = -psi[k]
    return vals, psi


def choose_npc(eigenvalues, pve: float) -> int:
    """Smallest K whose cumulative share of positive eigenvalues reaches pve."""
    if not (0.0 < pve <= 1.0):
        raise DataError(f"pve must be in (0, 1], got {pve}")
    lam = np.clip(np.asarray(eigenvalues, dtype=float), 0.0, None)
    total = lam.sum()
    if total <= 0:
        raise DegenerateDataError("no positive eigenvalues")
    ratio = np.cumsum(lam) / total
    return int(np.searchsorted(ratio, pve - 1e-12) + 1)


def estimate_sigma2(raw_diag, smooth_diag, w) -> float:
    """Noise variance: clipped weighted mean of the diagonal inflation."""
    raw_diag = np.asarray(raw_diag, dtype=float)
    smooth_diag = np.asarray(smooth_diag, dtype=float)
    w = np.asarray(w, dtype=float)
    if not (raw_diag.shape == smooth_diag.shape == w.shape):
        raise DataError("diagonal arrays must have equal length")
    keep = ~np.isnan(raw_diag)
    if not np.any(keep):
        return 0.0
    gap = raw_diag[keep] - smooth_diag[keep]
    return float(max(0.0, np.average(gap, weights=w[keep])))


def estimate_scores(
    centered: np.ndarray,
    mask: np.ndarray,
    psi: np.ndarray,
    lam: np.ndarray,
    sigma2: float,
) -> np.ndarray:
    """BLUP scores per curve from its observed cells.

    Solves the K x K system (B^T B + sigma2 * Lambda^-1) c = B^T y, the
    push-through form of Lambda B^T (B Lambda B^T + sigma2 I)^-1 y, with B
    the plain eigenfunction evaluations on the observed index set.
    """
    K = psi.shape[0]
    n = centered.shape[0]
    scores = np.zeros((n, K))
    lam_inv = np.diag(1.0 / lam)
    warned = False
    for i in range(n):
        obs = mask[i]
        B = psi[:, obs].T  # (|O_i|, K)
        y = centered[i, obs]
        A = B.T @ B + sigma2 * lam_inv
        rhs = B.T @ y
        # rank(B^T B) <= |O_i|: with sigma2 = 0 the system is singular by
        # construction whenever K exceeds the observed count
        if sigma2 == 0.0 and K > int(obs.sum()):
            if not warned:
                warnings.warn("singular score system; adding ridge 1e-10", stacklevel=2)
                warned = True
            A = A + 1e-10 * np.eye(K)
        try:
            scores[i] = np.linalg.solve(A, rhs)
        except np.linalg.LinAlgError:
            if not warned:
                warnings.warn("singular score system; adding ridge 1e-10", stacklevel=2)
                warned = True
            scores[i] = np.linalg.solve(A + 1e-10 * np.eye(K), rhs)
    return scores


def fit_fpca(ds: FunctionalDataset, opts: Optional[FpcaOptions] = None) -> FpcaFit:
    """Fit the FPCA model to every row of the dataset as an independent curve."""
    opts = opts or FpcaOptions()
    if ds.n_curves < 3:
        raise DataError("FPCA needs at least 3 curves")
    if not (0.0 < opts.pve <= 1.0):
        raise DataError(f"pve must be in (0, 1], got {opts.pve}")

    mu = estimate_mean(ds, smoother=opts.mean_smoother, n_basis=opts.n_basis)
    cov_raw, counts = raw_covariance(ds, mu)
    cov_smooth, _ = smooth_covariance(
        cov_raw, counts, ds.grid, smoother=opts.cov_smoother, n_basis=opts.n_basis
    )
    vals, psi_all = weighted_eigen(cov_smooth, ds.grid)

    lam_clipped = np.clip(vals, 0.0, None)
    tol = EIG_TOL * max(1.0, lam_clipped.max(initial=0.0))
    lam_clipped[lam_clipped <= tol] = 0.0
    total = lam_clipped.sum()
    if total <= 0:
        raise DegenerateDataError("degenerate data: no positive eigenvalues")

    n_positive = int(np.sum(lam_clipped > 0))
    if opts.npc is not None:
        if opts.npc < 1:
            raise DataError("npc must be >= 1")
        K = min(opts.npc, n_positive)
    else:
        K = choose_npc(lam_clipped, opts.pve)
    lam = lam_clipped[:K].copy()
    psi = psi_all[:K].copy()
    pve_achieved = float(lam.sum() / total)

    sigma2 = estimate_sigma2(np.diag(cov_raw), np.diag(cov_smooth), ds.grid.weights)

    centered = np.where(ds.mask, ds.values - mu, 0.0)
    scores = estimate_scores(centered, ds.mask, psi, lam, sigma2)
    fitted = reconstruct(mu, scores, psi)

    return FpcaFit(
        grid=ds.grid,
        mu=mu,
        psi=psi,
        lam=lam,
        sigma2=sigma2,
        scores=scores,
        pve_achieved=pve_achieved,
        fitted=fitted,
        subject_ids=np.asarray(ds.subject_ids).copy(),
        visit_indices=np.asarray(ds.visit_indices).copy(),
        observed=ds.values.copy(),
        mask=ds.mask.copy(),
        visit_times=None if ds.visit_times is None else ds.visit_times.copy(),
    )


def reconstruct(mu: np.ndarray, scores: np.ndarray, psi: np.ndarray) -> np.ndarray:
    """Row-wise mu + c @ psi, bit-identical to :func:`lincom_curve` per row."""
    return np.vstack([mu + c @ psi for c in scores])


def component_band(fit, k: int):
    """(upper, lower) = mu +/- sqrt(lambda_k) psi_k for 1-based component k."""
    lam, psi, mu = fit.lam, fit.psi, fit.mu
    if not (1 <= k <= lam.size):
        raise DataError(f"component k={k} out of range 1..{lam.size}")
    half = np.sqrt(lam[k - 1]) * psi[k - 1]
    return mu + half, mu - half


def lincom_curve(fit, c) -> np.ndarray:
    """mu + sum_k c_k psi_k for a full score vector c."""
    c = np.asarray(c, dtype=float).ravel()
    if c.size != fit.lam.size:
        raise DataError(f"need {fit.lam.size} scores, got {c.size}")
    return fit.mu + c @ fit.psi


def scree_data(fit) -> list[tuple[int, float, float]]:
    """(k, lambda_k, cumulative PVE over retained components) per component."""
    lam = fit.lam
    cum = np.cumsum(lam) / lam.sum()
    return [(k + 1, float(lam[k]), float(cum[k])) for k in range(lam.size)]
