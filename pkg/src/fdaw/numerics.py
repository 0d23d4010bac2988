"""Shared numerical kernels.

B-spline bases with difference penalties, penalized 1-D and 2-D smoothers
with GCV smoothing-parameter selection, trapezoid quadrature, and a
symmetric eigen-decomposition with a canonical sign convention.  Everything
downstream (mean curves, covariance surfaces, eigenfunctions) is built on
these four primitives.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np
from scipy.interpolate import BSpline

__all__ = [
    "SplineBasis",
    "Smoother1D",
    "Smoother2D",
    "Smooth1DResult",
    "Surface2D",
    "bspline_design",
    "smooth_1d",
    "smooth_2d",
    "sym_eigen",
    "quadrature_weights",
    "difference_matrix",
    "LAMBDA_GRID",
]

# Fixed smoothing-parameter search grid: 50 log-spaced values.
LAMBDA_GRID = np.logspace(-8.0, 4.0, 50)

MAX_BASIS = 35


@dataclass(frozen=True)
class SplineBasis:
    """B-spline basis on a closed interval.

    Knots are uniform and extend ``degree`` intervals beyond each end of the
    domain (P-spline convention), so difference penalties on the
    coefficients have the usual polynomial null space.  Explicit
    ``interior_knots`` may be non-uniform; the exterior extension then
    repeats the boundary gap.
    """

    degree: int = 3
    interior_knots: tuple[float, ...] = ()
    domain: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        a, b = self.domain
        if not (np.isfinite(a) and np.isfinite(b) and a < b):
            raise ValueError(f"invalid domain {self.domain!r}")
        if self.degree < 0:
            raise ValueError("degree must be >= 0")
        kn = np.asarray(self.interior_knots, dtype=float)
        if kn.size and (np.any(np.diff(kn) <= 0) or kn[0] <= a or kn[-1] >= b):
            raise ValueError("interior knots must be strictly increasing inside the domain")

    @property
    def n_basis(self) -> int:
        return len(self.interior_knots) + self.degree + 1

    @classmethod
    def with_n_basis(cls, domain: tuple[float, float], n_basis: int, degree: int = 3) -> "SplineBasis":
        """Basis with ``n_basis`` functions and uniform interior knots."""
        n_interior = n_basis - degree - 1
        if n_interior < 0:
            raise ValueError(f"n_basis={n_basis} too small for degree {degree}")
        a, b = domain
        interior = tuple(np.linspace(a, b, n_interior + 2)[1:-1])
        return cls(degree=degree, interior_knots=interior, domain=(float(a), float(b)))

    @classmethod
    def for_points(cls, points: np.ndarray, degree: int = 3, max_basis: int = MAX_BASIS) -> "SplineBasis":
        """Default basis for a grid: min(35, ceil(D/4) + 4) functions."""
        pts = np.asarray(points, dtype=float)
        n_distinct = np.unique(pts).size
        n_basis = min(max_basis, math.ceil(n_distinct / 4) + 4)
        n_basis = max(n_basis, degree + 1)
        return cls.with_n_basis((float(pts.min()), float(pts.max())), n_basis, degree=degree)

    def knot_vector(self) -> np.ndarray:
        a, b = self.domain
        inner = np.concatenate(([a], np.asarray(self.interior_knots, dtype=float), [b]))
        left_gap = inner[1] - inner[0]
        right_gap = inner[-1] - inner[-2]
        left = a - left_gap * np.arange(self.degree, 0, -1)
        right = b + right_gap * np.arange(1, self.degree + 1)
        return np.concatenate((left, inner, right))


def bspline_design(basis: SplineBasis, points: Union[Sequence[float], np.ndarray]) -> np.ndarray:
    """Evaluate all basis functions at ``points``.

    Returns a dense (len(points) x n_basis) matrix with non-negative rows
    summing to one.  Points outside the basis domain are rejected.
    """
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    a, b = basis.domain
    if pts.size and (pts.min() < a - 1e-12 * max(1.0, abs(a)) or pts.max() > b + 1e-12 * max(1.0, abs(b))):
        raise ValueError(f"evaluation points outside basis domain [{a}, {b}]")
    pts = np.clip(pts, a, b)
    design = BSpline.design_matrix(pts, basis.knot_vector(), basis.degree).toarray()
    return design


def difference_matrix(n: int, order: int = 2) -> np.ndarray:
    """Forward difference operator of the given order, shape (n-order, n)."""
    if order < 0 or n <= order:
        raise ValueError(f"need n > order, got n={n}, order={order}")
    D = np.eye(n)
    for _ in range(order):
        D = np.diff(D, axis=0)
    return D


@dataclass
class Smoother1D:
    """Penalized B-spline smoother settings for one axis."""

    basis: Optional[SplineBasis] = None
    penalty_order: int = 2
    lam: Union[float, str] = "auto"


@dataclass
class Smoother2D:
    """Tensor-product penalized smoother.

    With ``lam='auto'`` and ``tie_lambdas`` the two axis penalties share one
    GCV-selected parameter (this preserves symmetry for symmetric inputs);
    untied, the parameters are chosen by coordinate-wise GCV sweeps over the
    same grid.
    """

    basis_s: Optional[SplineBasis] = None
    basis_t: Optional[SplineBasis] = None
    penalty_order: int = 2
    lam: Union[float, str, tuple[float, float]] = "auto"
    tie_lambdas: bool = True


@dataclass
class Smooth1DResult:
    fitted: np.ndarray
    lam: float
    edf: float
    coef: np.ndarray
    basis: SplineBasis
    gcv_grid: Optional[np.ndarray] = None  # columns (lambda, gcv) when lam='auto'

    def evaluate(self, points) -> np.ndarray:
        return bspline_design(self.basis, points) @ self.coef


@dataclass
class Surface2D:
    """Fitted tensor-product surface, evaluable on any rectangular grid."""

    basis_s: SplineBasis
    basis_t: SplineBasis
    coef: np.ndarray  # (n_basis_s, n_basis_t)
    lam: tuple[float, float]
    edf: float
    gcv_grid: Optional[np.ndarray] = None

    def evaluate(self, s_points, t_points) -> np.ndarray:
        """Surface values on the tensor grid s_points x t_points."""
        Bs = bspline_design(self.basis_s, s_points)
        Bt = bspline_design(self.basis_t, t_points)
        return Bs @ self.coef @ Bt.T

    def evaluate_at(self, s_points, t_points) -> np.ndarray:
        """Surface values at paired nodes (s_i, t_i)."""
        Bs = bspline_design(self.basis_s, s_points)
        Bt = bspline_design(self.basis_t, t_points)
        return np.einsum("ip,pq,iq->i", Bs, self.coef, Bt)


class SingularSmoothError(ValueError):
    """Raised when an unpenalized (lambda = 0) system is singular."""


def _chol_with_ridge(M: np.ndarray, allow_ridge: bool):
    """Cholesky of M, adding an escalating scale-relative ridge if needed."""
    scale = float(np.mean(np.diag(M))) or 1.0
    try:
        return np.linalg.cholesky(M), 0.0
    except np.linalg.LinAlgError:
        if not allow_ridge:
            raise SingularSmoothError(
                "system is singular at lambda=0; supply lambda > 0 or use lam='auto'"
            ) from None
    ridge = 1e-10 * scale
    for _ in range(8):
        try:
            return np.linalg.cholesky(M + ridge * np.eye(M.shape[0])), ridge
        except np.linalg.LinAlgError:
            ridge *= 100.0
    raise SingularSmoothError("could not factor smoothing system even with ridge")


def _penalized_solve(M, b, P, lam, n_obs, yWy, want_grid, M_rss=None):
    """Solve (M + lam*P) c = b for fixed lam or GCV-selected lam over LAMBDA_GRID.

    Uses the Demmler-Reinsch decomposition so the whole grid costs one
    factorization.  ``M_rss`` gives the true data Gram matrix when ``M``
    already carries a frozen penalty from another axis (untied 2-D sweeps);
    RSS and the hat-matrix trace are computed against it.  Returns
    (coef, lam, edf, gcv_grid or None).
    """
    auto = isinstance(lam, str)
    if auto and lam != "auto":
        raise ValueError(f"unknown smoothing parameter spec {lam!r}")
    if not auto and lam < 0:
        raise ValueError("smoothing parameter must be >= 0")

    zero_lam = (not auto) and lam == 0.0 and M_rss is None
    L, _ = _chol_with_ridge(M, allow_ridge=not zero_lam)

    Linv_P = np.linalg.solve(L, P)
    C = np.linalg.solve(L, Linv_P.T).T  # L^-1 P L^-T
    C = (C + C.T) / 2.0
    s, U = np.linalg.eigh(C)
    s = np.clip(s, 0.0, None)
    z = U.T @ np.linalg.solve(L, b)
    if M_rss is None:
        M_rss = M
        h_diag = np.ones_like(s)
    else:
        R = np.linalg.solve(L.T, U).T  # rows: U^T L^-1
        h_diag = np.einsum("ip,pq,iq->i", R, M_rss, R)

    def coef_for(lam_value):
        d = 1.0 / (1.0 + lam_value * s)
        w = U @ (d * z)
        coef = np.linalg.solve(L.T, w)
        edf = float(np.sum(d * h_diag))
        return coef, edf

    gcv_grid = None
    if auto:
        rows = []
        best = (np.inf, None, None, None)
        for lam_value in LAMBDA_GRID:
            coef, edf = coef_for(lam_value)
            rss = max(yWy - 2.0 * coef @ b + coef @ (M_rss @ coef), 0.0)
            denom = n_obs - edf
            gcv = n_obs * rss / (denom * denom) if denom > 1e-8 else np.inf
            rows.append((lam_value, gcv))
            if gcv < best[0]:
                best = (gcv, lam_value, coef, edf)
        gcv_grid = np.asarray(rows)
        if best[1] is None:
            raise SingularSmoothError("GCV objective non-finite over the whole grid")
        _, lam, coef, edf = best
    else:
        coef, edf = coef_for(float(lam))
    if want_grid:
        return coef, float(lam), edf, gcv_grid
    return coef, float(lam), edf, None


def smooth_1d(
    x,
    y,
    w=None,
    smoother: Optional[Smoother1D] = None,
    eval_points=None,
    gcv_n: Optional[int] = None,
) -> Smooth1DResult:
    """Penalized B-spline regression of y on x with weights w.

    Fits ``basis @ argmin ||W^(1/2)(y - B c)||^2 + lam * ||D c||^2`` where D
    is the ``penalty_order`` difference operator.  With ``lam='auto'`` the
    parameter minimizes GCV(lam) = n * RSS_w / (n - tr S)^2 over the fixed
    log-spaced grid.  ``gcv_n`` overrides the sample size n in the GCV
    objective; callers smoothing points pooled from correlated curves pass
    the number of curves to avoid undersmoothing.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise ValueError("x and y must have the same length")
    if w is None:
        w = np.ones_like(x)
    else:
        w = np.asarray(w, dtype=float).ravel()
        if w.size != x.size:
            raise ValueError("weights must match x")
        if np.any(w < 0):
            raise ValueError("weights must be non-negative")
    smoother = smoother or Smoother1D()
    basis = smoother.basis or SplineBasis.for_points(x)

    B = bspline_design(basis, x)
    Bw = B * w[:, None]
    # per-observation scaling keeps the lambda grid's reach independent of n
    M = B.T @ Bw / x.size
    b = Bw.T @ y / x.size
    D = difference_matrix(basis.n_basis, smoother.penalty_order)
    P = D.T @ D
    yWy = float(np.sum(w * y * y)) / x.size

    coef, lam, edf, gcv_grid = _penalized_solve(
        M, b, P, smoother.lam, n_obs=gcv_n or x.size, yWy=yWy, want_grid=True
    )
    pts = x if eval_points is None else np.asarray(eval_points, dtype=float)
    fitted = bspline_design(basis, pts) @ coef
    return Smooth1DResult(fitted=fitted, lam=lam, edf=edf, coef=coef, basis=basis, gcv_grid=gcv_grid)


def smooth_2d(
    s,
    t,
    values,
    mask=None,
    smoother: Optional[Smoother2D] = None,
    gcv_n: Union[int, tuple, None] = None,
) -> Surface2D:
    """Tensor-product penalized fit to scattered nodes (s_i, t_i, v_i).

    Only nodes with ``mask`` true participate.  With identical axis bases,
    symmetric node sets and values give a symmetric surface because `auto`
    ties the two axis penalties to a single GCV-selected value.  ``gcv_n``
    replaces the node count in the GCV objective (see :func:`smooth_1d`);
    with untied penalties a (n_s, n_t) pair sets a per-axis effective sample
    size.
    """
    s = np.asarray(s, dtype=float).ravel()
    t = np.asarray(t, dtype=float).ravel()
    v = np.asarray(values, dtype=float).ravel()
    if not (s.size == t.size == v.size):
        raise ValueError("s, t, values must have the same length")
    if mask is None:
        mask = np.ones(s.size, dtype=bool)
    else:
        mask = np.asarray(mask, dtype=bool).ravel()
    n_in = int(mask.sum())
    if n_in == 0:
        raise ValueError("all nodes are masked out")
    if n_in < 10:
        raise ValueError(f"need at least 10 masked-in nodes, got {n_in}")
    s_in, t_in, v_in = s[mask], t[mask], v[mask]

    smoother = smoother or Smoother2D()
    basis_s = smoother.basis_s or SplineBasis.for_points(s_in)
    basis_t = smoother.basis_t or SplineBasis.for_points(t_in)
    ks, kt = basis_s.n_basis, basis_t.n_basis

    Bs = bspline_design(basis_s, s_in)
    Bt = bspline_design(basis_t, t_in)
    X = np.einsum("ip,iq->ipq", Bs, Bt).reshape(n_in, ks * kt)

    Ds = difference_matrix(ks, smoother.penalty_order)
    Dt = difference_matrix(kt, smoother.penalty_order)
    Ps = np.kron(Ds.T @ Ds, np.eye(kt))
    Pt = np.kron(np.eye(ks), Dt.T @ Dt)

    M = X.T @ X / n_in
    b = X.T @ v_in / n_in
    yWy = float(v_in @ v_in) / n_in

    if isinstance(gcv_n, tuple):
        n_s = gcv_n[0] or n_in
        n_t = gcv_n[1] or n_in
    else:
        n_s = n_t = gcv_n or n_in

    lam = smoother.lam
    if isinstance(lam, tuple):
        lam_s, lam_t = lam
        auto_s = isinstance(lam_s, str)
        auto_t = isinstance(lam_t, str)
        if not auto_s and not auto_t:
            lam_s, lam_t = float(lam_s), float(lam_t)
            if lam_s < 0 or lam_t < 0:
                raise ValueError("smoothing parameters must be >= 0")
            if lam_s == 0.0 and lam_t == 0.0:
                coef, _, edf, grid = _penalized_solve(
                    M, b, Ps + Pt, 0.0, n_obs=n_s, yWy=yWy, want_grid=False
                )
            else:
                P = lam_s * Ps + lam_t * Pt
                coef, _, edf, grid = _penalized_solve(
                    M, b, P, 1.0, n_obs=n_s, yWy=yWy, want_grid=False
                )
        elif auto_s and auto_t:
            raise ValueError("use lam='auto' with tie_lambdas for fully automatic selection")
        elif auto_t:
            lam_s = float(lam_s)
            try:
                coef, lam_t, edf, grid = _penalized_solve(
                    M + lam_s * Ps, b, Pt, "auto", n_obs=n_t, yWy=yWy, want_grid=False, M_rss=M
                )
            except SingularSmoothError:
                # effective sample size too small for any grid point: fall
                # back to the node count
                coef, lam_t, edf, grid = _penalized_solve(
                    M + lam_s * Ps, b, Pt, "auto", n_obs=n_in, yWy=yWy, want_grid=False, M_rss=M
                )
        else:
            lam_t = float(lam_t)
            try:
                coef, lam_s, edf, grid = _penalized_solve(
                    M + lam_t * Pt, b, Ps, "auto", n_obs=n_s, yWy=yWy, want_grid=False, M_rss=M
                )
            except SingularSmoothError:
                coef, lam_s, edf, grid = _penalized_solve(
                    M + lam_t * Pt, b, Ps, "auto", n_obs=n_in, yWy=yWy, want_grid=False, M_rss=M
                )
        lam_pair = (lam_s, lam_t)
    elif isinstance(lam, str) and not smoother.tie_lambdas:
        lam_s = 1e-2
        for _ in range(2):
            _, lam_t, _, _ = _penalized_solve(
                M + lam_s * Ps, b, Pt, "auto", n_obs=n_t, yWy=yWy, want_grid=False, M_rss=M
            )
            _, lam_s, _, _ = _penalized_solve(
                M + lam_t * Pt, b, Ps, "auto", n_obs=n_s, yWy=yWy, want_grid=False, M_rss=M
            )
        coef, _, edf, grid = _penalized_solve(
            M + lam_t * Pt, b, Ps, lam_s, n_obs=n_s, yWy=yWy, want_grid=False, M_rss=M
        )
        lam_pair = (lam_s, lam_t)
    else:
        coef, lam_value, edf, grid = _penalized_solve(
            M, b, Ps + Pt, lam, n_obs=n_s, yWy=yWy, want_grid=True
        )
        lam_pair = (lam_value, lam_value)
    return Surface2D(
        basis_s=basis_s,
        basis_t=basis_t,
        coef=coef.reshape(ks, kt),
        lam=lam_pair,
        edf=edf,
        gcv_grid=grid,
    )


def sym_eigen(A: np.ndarray):
    """Eigen-decomposition of a symmetric matrix.

    Returns eigenvalues in descending order and orthonormal eigenvectors as
    columns.  The input is symmetrized as (A + A^T)/2 first.  Sign
    convention: each vector's largest-magnitude entry is positive, earliest
    index winning ties.
    """
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    S = (A + A.T) / 2.0
    vals, vecs = np.linalg.eigh(S)
    order = np.argsort(vals)[::-1]
    vals = vals[order]
    vecs = vecs[:, order]
    for k in range(vecs.shape[1]):
        idx = int(np.argmax(np.abs(vecs[:, k])))
        if vecs[idx, k] < 0:
            vecs[:, k] = -vecs[:, k]
    return vals, vecs


def quadrature_weights(points) -> np.ndarray:
    """Trapezoid-rule quadrature weights for ordered abscissae."""
    pts = np.asarray(points, dtype=float).ravel()
    if pts.size < 2:
        raise ValueError("need at least 2 points for quadrature")
    if np.any(np.diff(pts) <= 0):
        raise ValueError("points must be strictly increasing")
    w = np.empty(pts.size)
    w[0] = (pts[1] - pts[0]) / 2.0
    w[-1] = (pts[-1] - pts[-2]) / 2.0
    w[1:-1] = (pts[2:] - pts[:-2]) / 2.0
    return w
