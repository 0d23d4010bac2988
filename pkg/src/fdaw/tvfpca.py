"""Time-varying FPCA for curves observed at real-valued visit times.

Three estimation steps: a bivariate mean surface over (t, T); the marginal
covariance pooled over all curves (the empirical average over observed
visit times), smoothed and decomposed; and a per-component model for the
score dynamics over T, either a random line fit by EM or an FPCA of
binned score cross-products.
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
    FpcaOptions,
    choose_npc,
    estimate_scores,
    estimate_sigma2,
    fit_fpca,
    smooth_covariance,
    weighted_eigen,
)
from .numerics import (
    LAMBDA_GRID,
    Smoother1D,
    Smoother2D,
    SplineBasis,
    Surface2D,
    quadrature_weights,
    smooth_1d,
    smooth_2d,
)

__all__ = [
    "TvFpcaOptions",
    "TvFpcaFit",
    "ScoreDynamics",
    "impute_missing",
    "fit_tvfpca",
    "fit_score_dynamics",
    "predict_scores",
    "predict_trajectory",
    "visit_time_summary",
]

N_TRAJECTORY_FRAMES = 21
N_SCORE_BINS = 21


@dataclass
class TvFpcaOptions:
    method: str = "lme"  # or "fpca"
    pve: float = 0.95
    npc: Optional[int] = None
    n_basis: Optional[int] = None


class MeanSurface:
    """Mean surface evaluable at (grid points, any visit time T)."""

    def at(self, points: np.ndarray, T: float) -> np.ndarray:
        raise NotImplementedError

    def slices(self, points: np.ndarray, t_values: np.ndarray) -> np.ndarray:
        return np.column_stack([self.at(points, float(T)) for T in t_values])


class SplineMeanSurface(MeanSurface):
    def __init__(self, surface: Surface2D, t_range: tuple[float, float]):
        self.surface = surface
        self.t_range = t_range

    def at(self, points, T):
        lo, hi = self.surface.basis_t.domain
        return self.surface.evaluate(points, [float(np.clip(T, lo, hi))])[:, 0]

    def slices(self, points, t_values):
        lo, hi = self.surface.basis_t.domain
        return self.surface.evaluate(points, np.clip(t_values, lo, hi))


class ConstantMeanSurface(MeanSurface):
    """Used when all visit times coincide: no T variation is identifiable."""

    def __init__(self, curve: np.ndarray):
        self.curve = np.asarray(curve, dtype=float)

    def at(self, points, T):
        return self.curve.copy()


class SlicedMeanSurface(MeanSurface):
    """Linear interpolation in T between stored slices (deserialized fits)."""

    def __init__(self, t_values: np.ndarray, values: np.ndarray):
        self.t_values = np.asarray(t_values, dtype=float)
        self.values = np.asarray(values, dtype=float)  # (D, len(t_values))

    def at(self, points, T):
        ts = self.t_values
        if ts.size == 1:
            return self.values[:, 0].copy()
        T = float(np.clip(T, ts[0], ts[-1]))
        j = int(np.clip(np.searchsorted(ts, T) - 1, 0, ts.size - 2))
        span = ts[j + 1] - ts[j]
        frac = 0.0 if span == 0 else (T - ts[j]) / span
        return (1 - frac) * self.values[:, j] + frac * self.values[:, j + 1]


@dataclass
class ScoreDynamics:
    """Per-component model of score covariance over visit time."""

    method: str  # "lme" | "fpca"
    resid_var: float = 0.0
    # lme
    fixed: Optional[tuple[float, float]] = None  # (beta0, beta1)
    re_cov: Optional[np.ndarray] = None  # 2x2 covariance of (b0, b1)
    converged: bool = True
    # fpca
    t_grid: Optional[np.ndarray] = None  # bin centers
    phi: Optional[np.ndarray] = None  # (L, n_bins)
    variances: Optional[np.ndarray] = None  # (L,)

    def gk(self, T, T_prime=None) -> np.ndarray:
        """Component covariance G_k(T, T') of the score process."""
        T = np.atleast_1d(np.asarray(T, dtype=float))
        Tp = T if T_prime is None else np.atleast_1d(np.asarray(T_prime, dtype=float))
        if self.method == "lme":
            v0 = self.re_cov[0, 0]
            v1 = self.re_cov[1, 1]
            c01 = self.re_cov[0, 1]
            return v0 + c01 * (T[:, None] + Tp[None, :]) + v1 * np.outer(T, Tp)
        if self.phi is None or self.phi.shape[0] == 0:
            return np.zeros((T.size, Tp.size))
        F = _interp_rows(self.phi, self.t_grid, T)  # (L, |T|)
        Fp = _interp_rows(self.phi, self.t_grid, Tp)
        return (F * self.variances[:, None]).T @ Fp


def _interp_rows(rows: np.ndarray, xs: np.ndarray, x_new: np.ndarray) -> np.ndarray:
    out = np.empty((rows.shape[0], x_new.size))
    for i in range(rows.shape[0]):
        out[i] = np.interp(x_new, xs, rows[i])
    return out


@dataclass
class TvFpcaFit:
    grid: Grid  # functional argument (served as "s")
    t_range: tuple[float, float]
    mu_surface: MeanSurface
    pointwise_mean: np.ndarray  # m(t), cross-sectional mean of all curves
    marginal_sigma: np.ndarray  # (D, D) smoothed marginal covariance
    psi: np.ndarray  # (K, D)
    lam: np.ndarray
    sigma2: float
    raw_scores: np.ndarray  # (n_rows, K), BLUP at the observed visit times
    dynamics: list[ScoreDynamics]
    subject_ids: np.ndarray
    visit_indices: np.ndarray
    visit_times: np.ndarray
    observed: np.ndarray
    mask: np.ndarray
    pve_achieved: float = 1.0
    model_kind: str = "tvfpca"

    @property
    def n_components(self) -> int:
        return int(self.lam.size)

    def subjects(self) -> list[str]:
        seen: dict[str, None] = {}
        for s in self.subject_ids:
            seen.setdefault(s, None)
        return list(seen)

    def rows_for_subject(self, subject: str) -> np.ndarray:
        rows = np.flatnonzero(self.subject_ids == subject)
        if rows.size == 0:
            raise DataError(f"unknown subject {subject!r}")
        return rows

    def mu_slices(self, n_slices: int = N_TRAJECTORY_FRAMES):
        lo, hi = self.t_range
        t_values = np.linspace(lo, hi, n_slices)
        return t_values, self.mu_surface.slices(self.grid.points, t_values)


def impute_missing(ds: FunctionalDataset) -> FunctionalDataset:
    """Replace missing cells by FPCA fitted values; observed cells untouched."""
    ds.check()
    if ds.mask.all():
        return ds
    fit = fit_fpca(ds)
    values = np.where(ds.mask, ds.values, fit.fitted)
    return FunctionalDataset(
        grid=ds.grid,
        values=values,
        mask=np.ones_like(ds.mask),
        subject_ids=ds.subject_ids.copy(),
        visit_indices=ds.visit_indices.copy(),
        visit_times=None if ds.visit_times is None else ds.visit_times.copy(),
        covariates=dict(ds.covariates),
    )


def _fit_mean_surface(ds: FunctionalDataset, n_basis: Optional[int]):
    pts = ds.grid.points
    times = ds.visit_times
    distinct = np.unique(times)
    if distinct.size < 2:
        pooled_x = np.tile(pts, (ds.n_curves, 1))[ds.mask]
        pooled_y = ds.values[ds.mask]
        basis = SplineBasis.for_points(pts) if n_basis is None else SplineBasis.with_n_basis(
            (float(pts[0]), float(pts[-1])), n_basis
        )
        res = smooth_1d(pooled_x, pooled_y, smoother=Smoother1D(basis=basis), eval_points=pts)
        return ConstantMeanSurface(res.fitted)
    s_nodes = np.tile(pts, (ds.n_curves, 1))[ds.mask]
    t_nodes = np.repeat(times, ds.n_points).reshape(ds.n_curves, ds.n_points)[ds.mask]
    v_nodes = ds.values[ds.mask]
    basis_s = SplineBasis.for_points(pts) if n_basis is None else SplineBasis.with_n_basis(
        (float(pts[0]), float(pts[-1])), n_basis
    )
    basis_t = SplineBasis.for_points(distinct)
    # cells within a curve are dense along s but share one visit time, so
    # the s axis gets basis-cap smoothing only while the T axis smooths
    # against the curve count
    surface = smooth_2d(
        s_nodes,
        t_nodes,
        v_nodes,
        smoother=Smoother2D(basis_s=basis_s, basis_t=basis_t, lam=(LAMBDA_GRID[0], "auto")),
        gcv_n=(s_nodes.size, ds.n_curves),
    )
    return SplineMeanSurface(surface, (float(distinct.min()), float(distinct.max())))


def fit_tvfpca(ds: FunctionalDataset, opts: Optional[TvFpcaOptions] = None) -> TvFpcaFit:
    """Fit the time-varying FPCA model."""
    opts = opts or TvFpcaOptions()
    if opts.method not in ("lme", "fpca"):
        raise DataError(f"unknown score-dynamics method {opts.method!r}")
    if ds.visit_times is None:
        raise DataError("tvfpca requires visit_time on every row")
    if np.any(np.isnan(ds.visit_times)):
        raise DataError("tvfpca requires non-missing visit_time on every row")
    if len(ds.subjects()) < 2:
        raise DataError("tvfpca needs at least 2 subjects")
    times = ds.visit_times
    distinct_T = np.unique(times)
    if opts.method == "fpca" and distinct_T.size < 3:
        raise DataError("fewer than 3 distinct visit times; use method='lme'")

    mu_surface = _fit_mean_surface(ds, opts.n_basis)
    mu_rows = mu_surface.slices(ds.grid.points, times).T  # (n_rows, D)
    centered = np.where(ds.mask, ds.values - mu_rows, 0.0)

    counts = ds.mask.astype(np.int64).T @ ds.mask.astype(np.int64)
    sums = centered.T @ centered
    with np.errstate(invalid="ignore"):
        cov_raw = np.where(counts > 0, sums / np.maximum(counts, 1), np.nan)
    cov_smooth, _ = smooth_covariance(cov_raw, counts, ds.grid, n_basis=opts.n_basis)

    vals, psi_all = weighted_eigen(cov_smooth, ds.grid)
    lam_clipped = np.clip(vals, 0.0, None)
    tol = EIG_TOL * max(1.0, lam_clipped.max(initial=0.0))
    lam_clipped[lam_clipped <= tol] = 0.0
    total = lam_clipped.sum()
    if total <= 0:
        raise DegenerateDataError("degenerate data: no positive eigenvalues")
    if opts.npc is not None:
        K = min(opts.npc, int(np.sum(lam_clipped > 0)))
    else:
        K = choose_npc(lam_clipped, opts.pve)
    lam = lam_clipped[:K].copy()
    psi = psi_all[:K].copy()
    pve_achieved = float(lam.sum() / total)

    sigma2 = estimate_sigma2(np.diag(cov_raw), np.diag(cov_smooth), ds.grid.weights)
    raw_scores = estimate_scores(centered, ds.mask, psi, lam, sigma2)

    obs_counts = ds.mask.sum(axis=0)
    with np.errstate(invalid="ignore"):
        pointwise_mean = np.where(
            obs_counts > 0,
            np.where(ds.mask, ds.values, 0.0).sum(axis=0) / np.maximum(obs_counts, 1),
            np.nan,
        )

    t_range = (float(times.min()), float(times.max()))
    dynamics = [
        fit_score_dynamics(raw_scores[:, k], ds.subject_ids, times, opts.method, t_range=t_range)
        for k in range(K)
    ]

    return TvFpcaFit(
        grid=ds.grid,
        t_range=t_range,
        mu_surface=mu_surface,
        pointwise_mean=pointwise_mean,
        marginal_sigma=cov_smooth,
        psi=psi,
        lam=lam,
        sigma2=sigma2,
        raw_scores=raw_scores,
        dynamics=dynamics,
        subject_ids=np.asarray(ds.subject_ids).copy(),
        visit_indices=np.asarray(ds.visit_indices).copy(),
        visit_times=times.copy(),
        observed=ds.values.copy(),
        mask=ds.mask.copy(),
        pve_achieved=pve_achieved,
    )


# ---------------------------------------------------------------------------
# Score dynamics


def _group_by_subject(subjects) -> dict[str, np.ndarray]:
    groups: dict[str, list[int]] = {}
    for i, s in enumerate(subjects):
        groups.setdefault(s, []).append(i)
    return {s: np.asarray(ix) for s, ix in groups.items()}


def fit_score_dynamics(
    scores: np.ndarray,
    subjects,
    visit_times: np.ndarray,
    method: str,
    t_range: Optional[tuple[float, float]] = None,
    pve: float = 0.95,
) -> ScoreDynamics:
    """Model one component's scores over visit time.

    ``lme`` fits a random-intercept-and-slope line by EM (log-likelihood
    tolerance 1e-6, at most 500 iterations); ``fpca`` bins the scores into
    21 equi-spaced bins, forms the covariance of same-subject cross
    products, smooths, and decomposes it.
    """
    scores = np.asarray(scores, dtype=float).ravel()
    visit_times = np.asarray(visit_times, dtype=float).ravel()
    if scores.size != visit_times.size:
        raise DataError("scores and visit_times must align")
    if t_range is None:
        t_range = (float(visit_times.min()), float(visit_times.max()))
    groups = _group_by_subject(subjects)
    if method == "lme":
        return _fit_lme(scores, visit_times, groups)
    if method == "fpca":
        if np.unique(visit_times).size < 3:
            raise DataError("fewer than 3 distinct visit times; use method='lme'")
        return _fit_score_fpca(scores, visit_times, groups, t_range, pve=pve)
    raise DataError(f"unknown score-dynamics method {method!r}")


def _fit_lme(scores, times, groups, tol: float = 1e-6, max_iter: int = 500) -> ScoreDynamics:
    use_slope = np.unique(times).size >= 2
    q = 2 if use_slope else 1

    Xs, ys = [], []
    for ix in groups.values():
        T = times[ix]
        X = np.column_stack([np.ones(ix.size), T]) if use_slope else np.ones((ix.size, 1))
        Xs.append(X)
        ys.append(scores[ix])

    # method-of-moments start from per-subject least-squares lines
    coefs = []
    rss, n_obs = 0.0, 0
    for X, y in zip(Xs, ys):
        if X.shape[0] >= q and np.linalg.matrix_rank(X) == q:
            c, *_ = np.linalg.lstsq(X, y, rcond=None)
        else:
            c = np.zeros(q)
            c[0] = y.mean()
        coefs.append(c)
        r = y - X @ c
        rss += float(r @ r)
        n_obs += y.size
    coefs = np.vstack(coefs)
    beta = coefs.mean(axis=0)
    dev = coefs - beta
    psi_mat = dev.T @ dev / len(coefs)
    scale = float(np.var(scores)) + 1e-12
    floor = 1e-12 * max(1.0, scale)
    sigma2 = max(rss / max(n_obs, 1), floor)

    ll_old = -np.inf
    converged = False
    for _ in range(max_iter):
        # GLS update of the fixed effects under the current (psi, sigma2)
        sum_xtvx = np.zeros((q, q))
        sum_xtvy = np.zeros(q)
        Vs = []
        for X, y in zip(Xs, ys):
            V = X @ psi_mat @ X.T + sigma2 * np.eye(X.shape[0])
            sum_xtvx += X.T @ np.linalg.solve(V, X)
            sum_xtvy += X.T @ np.linalg.solve(V, y)
            Vs.append(V)
        beta = np.linalg.solve(sum_xtvx, sum_xtvy)

        # E-step at (beta, psi, sigma2), M-step, and the monitored likelihood
        ll = 0.0
        psi_new = np.zeros((q, q))
        sig_acc = 0.0
        for V, X, y in zip(Vs, Xs, ys):
            r = y - X @ beta
            Vi_r = np.linalg.solve(V, r)
            _, logdet = np.linalg.slogdet(V)
            ll += -0.5 * (logdet + r @ Vi_r + X.shape[0] * np.log(2 * np.pi))
            b_hat = psi_mat @ X.T @ Vi_r
            Vb = psi_mat - psi_mat @ X.T @ np.linalg.solve(V, X @ psi_mat)
            psi_new += np.outer(b_hat, b_hat) + Vb
            resid = r - X @ b_hat
            # tr(X Vb X^T) = sigma2 * (J - sigma2 * tr(V^-1))
            sig_acc += float(resid @ resid) + sigma2 * float(
                X.shape[0] - sigma2 * np.trace(np.linalg.solve(V, np.eye(X.shape[0])))
            )
        n_sub = len(Xs)
        psi_mat = (psi_new + psi_new.T) / (2.0 * n_sub)
        sigma2 = max(sig_acc / n_obs, floor)

        if abs(ll - ll_old) < tol:
            converged = True
            break
        ll_old = ll
    if not converged:
        warnings.warn("EM for score dynamics did not converge; returning last iterate", stacklevel=2)

    if use_slope:
        fixed = (float(beta[0]), float(beta[1]))
        re_cov = psi_mat
    else:
        fixed = (float(beta[0]), 0.0)
        re_cov = np.zeros((2, 2))
        re_cov[0, 0] = psi_mat[0, 0]
    return ScoreDynamics(
        method="lme",
        fixed=fixed,
        re_cov=re_cov,
        resid_var=float(sigma2),
        converged=converged,
    )


def _fit_score_fpca(scores, times, groups, t_range, pve: float, n_bins: int = N_SCORE_BINS) -> ScoreDynamics:
    lo, hi = t_range
    edges = np.linspace(lo, hi, n_bins + 1)
    centers = (edges[:-1] + edges[1:]) / 2.0
    idx = np.clip(np.searchsorted(edges, times, side="right") - 1, 0, n_bins - 1)

    cross_sums = np.zeros((n_bins, n_bins))
    cross_counts = np.zeros((n_bins, n_bins), dtype=np.int64)
    diag_sums = np.zeros(n_bins)
    diag_counts = np.zeros(n_bins, dtype=np.int64)
    for ix in groups.values():
        b = idx[ix]
        c = scores[ix]
        for j in range(ix.size):
            diag_sums[b[j]] += c[j] * c[j]
            diag_counts[b[j]] += 1
            for jp in range(ix.size):
                if jp == j:
                    continue
                cross_sums[b[j], b[jp]] += c[j] * c[jp]
                cross_counts[b[j], b[jp]] += 1

    if int((cross_counts > 0).sum()) < 10:
        raise DataError("too few same-subject cross products to smooth; use method='lme'")
    S, T = np.meshgrid(centers, centers, indexing="ij")
    include = cross_counts > 0
    with np.errstate(invalid="ignore"):
        raw = np.where(include, cross_sums / np.maximum(cross_counts, 1), 0.0)
    bin_basis = SplineBasis.for_points(centers)
    surface = smooth_2d(
        S.ravel(), T.ravel(), raw.ravel(), mask=include.ravel(),
        smoother=Smoother2D(basis_s=bin_basis, basis_t=bin_basis),
    )
    G = surface.evaluate(centers, centers)
    G = (G + G.T) / 2.0

    bin_grid = Grid(points=centers, weights=quadrature_weights(centers))
    vals, phi_all = weighted_eigen(G, bin_grid)
    lam = np.clip(vals, 0.0, None)
    tol = EIG_TOL * max(1.0, lam.max(initial=0.0))
    lam[lam <= tol] = 0.0
    if lam.sum() <= 0:
        phi = np.zeros((0, n_bins))
        variances = np.zeros(0)
    else:
        L = choose_npc(lam, pve)
        phi = phi_all[:L].copy()
        variances = lam[:L].copy()

    smooth_diag = np.diag(G)
    have = diag_counts > 0
    resid_var = 0.0
    if np.any(have):
        with np.errstate(invalid="ignore"):
            raw_diag = diag_sums[have] / diag_counts[have]
        resid_var = float(max(0.0, np.mean(raw_diag - smooth_diag[have])))

    return ScoreDynamics(
        method="fpca",
        t_grid=centers,
        phi=phi,
        variances=variances,
        resid_var=resid_var,
    )


# ---------------------------------------------------------------------------
# Prediction


def predict_scores(fit: TvFpcaFit, subject: str, k: int, t_query) -> np.ndarray:
    """Predicted component-k scores for a subject at arbitrary visit times."""
    if not (1 <= k <= fit.n_components):
        raise DataError(f"component k={k} out of range 1..{fit.n_components}")
    rows = fit.rows_for_subject(subject)
    t_query = np.atleast_1d(np.asarray(t_query, dtype=float))
    lo, hi = fit.t_range
    if np.any(t_query < lo) or np.any(t_query > hi):
        warnings.warn("extrapolating score prediction outside the observed visit-time range",
                      stacklevel=2)

    dyn = fit.dynamics[k - 1]
    c = fit.raw_scores[rows, k - 1]
    T = fit.visit_times[rows]

    if dyn.method == "lme":
        X = np.column_stack([np.ones(T.size), T])
        V = X @ dyn.re_cov @ X.T + max(dyn.resid_var, 1e-12) * np.eye(T.size)
        r = c - X @ np.asarray(dyn.fixed)
        b_hat = dyn.re_cov @ X.T @ np.linalg.solve(V, r)
        line = np.asarray(dyn.fixed) + b_hat
        return line[0] + line[1] * t_query

    if dyn.phi is None or dyn.phi.shape[0] == 0:
        return np.zeros(t_query.size)
    F = _interp_rows(dyn.phi, dyn.t_grid, T).T  # (J, L)
    d_inv = np.diag(1.0 / dyn.variances)
    A = F.T @ F + max(dyn.resid_var, 0.0) * d_inv
    try:
        b_hat = np.linalg.solve(A, F.T @ c)
    except np.linalg.LinAlgError:
        b_hat = np.linalg.solve(A + 1e-10 * np.eye(A.shape[0]), F.T @ c)
    Fq = _interp_rows(dyn.phi, dyn.t_grid, t_query).T
    return Fq @ b_hat


def predict_trajectory(fit: TvFpcaFit, subject: str, n_frames: int = N_TRAJECTORY_FRAMES):
    """Full-curve prediction at equi-spaced visit times spanning t_range.

    Returns a list of (T, curve) pairs; the first frame sits at T_min and
    the last at T_max.
    """
    if n_frames < 2:
        raise DataError("need at least 2 trajectory frames")
    fit.rows_for_subject(subject)  # validates the subject
    lo, hi = fit.t_range
    t_values = np.linspace(lo, hi, n_frames)
    preds = np.zeros((fit.n_components, n_frames))
    for k in range(fit.n_components):
        preds[k] = predict_scores(fit, subject, k + 1, t_values)
    frames = []
    for j, T in enumerate(t_values):
        curve = fit.mu_surface.at(fit.grid.points, float(T)) + preds[:, j] @ fit.psi
        frames.append((float(T), curve))
    return frames


def visit_time_summary(ds_or_fit, bins: int = 20):
    """Per-subject visit times, pooled histogram, and rug values."""
    times = ds_or_fit.visit_times
    if times is None:
        raise DataError("visit_time is required for the visit-time summary")
    subjects = ds_or_fit.subject_ids
    per_subject: dict[str, list[float]] = {}
    for s, t in zip(subjects, times):
        per_subject.setdefault(s, []).append(float(t))
    lo, hi = float(np.min(times)), float(np.max(times))
    if hi > lo:
        counts, edges = np.histogram(times, bins=bins, range=(lo, hi))
    else:
        counts, edges = np.array([times.size]), np.array([lo, hi])
    return {
        "per_subject": per_subject,
        "hist_edges": edges,
        "hist_counts": counts,
        "rug": np.asarray(times, dtype=float).copy(),
    }
