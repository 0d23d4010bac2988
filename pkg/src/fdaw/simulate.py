"""Seeded simulators for all four model kinds, with ground truth attached.

Each scenario draws curves as mean + sum of score * eigenfunction + white
noise.  The eigenfunction family is a fixed Fourier sequence (sqrt(2) sin,
sqrt(2) cos at increasing harmonics), orthonormal under the trapezoid
weights of a uniform grid, plus a constant family for degenerate cases.
The same (scenario, config, seed) triple always produces bit-identical
output.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dataset import Covariate, DataError, FunctionalDataset, Grid

__all__ = ["SimConfig", "GroundTruth", "simulate", "fourier_functions", "SCENARIOS"]

SCENARIOS = ("fpca", "mfpca", "fosr", "tvfpca")


def fourier_functions(points: np.ndarray, count: int, offset: int = 0) -> np.ndarray:
    """First ``count`` members (after ``offset``) of the Fourier sequence.

    Sequence: sqrt(2/L) sin(2*pi*u), sqrt(2/L) cos(2*pi*u),
    sqrt(2/L) sin(4*pi*u), ...  with u the position rescaled to [0, 1].
    Returns an array of shape (count, len(points)).
    """
    pts = np.asarray(points, dtype=float)
    a, b = pts[0], pts[-1]
    span = b - a
    u = (pts - a) / span
    out = np.empty((count, pts.size))
    for i in range(count):
        k = offset + i
        harmonic = k // 2 + 1
        phase = np.sin if k % 2 == 0 else np.cos
        out[i] = np.sqrt(2.0 / span) * phase(2.0 * np.pi * harmonic * u)
    return out


def constant_function(points: np.ndarray) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    span = pts[-1] - pts[0]
    return np.full((1, pts.size), 1.0 / np.sqrt(span))


@dataclass
class SimConfig:
    """Scenario sizes, eigenvalues, and noise level.

    Fields beyond the common block apply only to the scenario named in
    ``simulate``; the rest are ignored.
    """

    n_subjects: int = 100
    n_points: int = 50
    domain: tuple[float, float] = (0.0, 1.0)
    eigenvalues: tuple[float, ...] = (4.0, 1.0)
    noise_sd: float = 0.5
    family: str = "fourier"  # or "constant"
    mean_intercept: float = 5.0
    mean_sin_amp: float = 1.0
    zero_scores: bool = False

    # mfpca
    n_visits: int = 4
    level2_eigenvalues: tuple[float, ...] = (1.0,)
    visit_shift_consts: Optional[tuple[float, ...]] = None

    # tvfpca
    visits_min: int = 4
    visits_max: int = 6
    t_range: tuple[float, float] = (0.0, 1.0)
    dyn_intercept_vars: tuple[float, ...] = (1.0, 0.5)
    dyn_slope_vars: tuple[float, ...] = (0.5, 0.25)
    mean_surface_coefs: tuple[float, float, float, float] = (5.0, 1.0, 0.5, 0.5)

    # fosr
    beta_intercept: float = 1.0
    beta_x_amp: float = 1.0


@dataclass
class GroundTruth:
    """Simulation truth used by recovery tests."""

    mean: np.ndarray
    eigenfunctions: np.ndarray  # (K, D)
    eigenvalues: np.ndarray
    scores: np.ndarray
    noise_sd: float
    eigenfunctions2: Optional[np.ndarray] = None
    eigenvalues2: Optional[np.ndarray] = None
    scores2: Optional[np.ndarray] = None
    visit_shifts: Optional[np.ndarray] = None  # (J, D)
    coefficients: Optional[dict[str, np.ndarray]] = None
    dynamics: Optional[dict[str, np.ndarray]] = None
    mean_surface_coefs: Optional[tuple[float, float, float, float]] = None

    def mean_surface(self, points: np.ndarray, T: float) -> np.ndarray:
        c0, ct, cT, ctT = self.mean_surface_coefs
        pts = np.asarray(points, dtype=float)
        return c0 + ct * pts + cT * T + ctT * pts * T


def _check_eigenvalues(values, label: str) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise DataError(f"{label}: need at least one eigenvalue")
    if np.any(arr <= 0):
        raise DataError(f"{label}: eigenvalues must be positive")
    if np.any(np.diff(arr) > 0):
        raise DataError(f"{label}: eigenvalues must be non-increasing")
    return arr


def _check_orthonormal(psi: np.ndarray, weights: np.ndarray) -> None:
    gram = (psi * weights) @ psi.T
    if not np.allclose(gram, np.eye(psi.shape[0]), atol=1e-8):
        raise DataError("simulated eigenfunctions are not orthonormal on this grid")


def _family(config: SimConfig, points: np.ndarray, count: int, offset: int = 0) -> np.ndarray:
    if config.family == "constant":
        if count != 1 or offset != 0:
            raise DataError("constant family provides a single eigenfunction")
        return constant_function(points)
    if config.family == "fourier":
        return fourier_functions(points, count, offset)
    raise DataError(f"unknown eigenfunction family {config.family!r}")


def _subject_ids(n: int) -> list[str]:
    width = max(3, len(str(n)))
    return [f"s{i + 1:0{width}d}" for i in range(n)]


def simulate(scenario: str, config: SimConfig, seed: int) -> tuple[FunctionalDataset, GroundTruth]:
    """Draw a dataset for the given scenario; returns (dataset, truth)."""
    if scenario not in SCENARIOS:
        raise DataError(f"unknown scenario {scenario!r}; expected one of {SCENARIOS}")
    if config.n_subjects < 2:
        raise DataError("need at least 2 curves")
    if config.n_points < 8:
        raise DataError("need at least 8 grid points")
    if config.noise_sd < 0:
        raise DataError("noise_sd must be >= 0")
    rng = np.random.default_rng(seed)
    points = np.linspace(config.domain[0], config.domain[1], config.n_points)
    grid = Grid.from_points(points)
    builder = {
        "fpca": _simulate_fpca,
        "mfpca": _simulate_mfpca,
        "tvfpca": _simulate_tvfpca,
        "fosr": _simulate_fosr,
    }[scenario]
    ds, truth = builder(config, grid, rng)
    _check_orthonormal(truth.eigenfunctions, grid.weights)
    if truth.eigenfunctions2 is not None:
        _check_orthonormal(truth.eigenfunctions2, grid.weights)
    return ds, truth


def _mean_curve(config: SimConfig, points: np.ndarray) -> np.ndarray:
    a, b = points[0], points[-1]
    u = (points - a) / (b - a)
    return config.mean_intercept + config.mean_sin_amp * np.sin(2.0 * np.pi * u)


def _simulate_fpca(config: SimConfig, grid: Grid, rng: np.random.Generator):
    lam = _check_eigenvalues(config.eigenvalues, "fpca")
    K = lam.size
    n = config.n_subjects
    psi = _family(config, grid.points, K)
    mu = _mean_curve(config, grid.points)

    scores = rng.standard_normal((n, K)) * np.sqrt(lam)
    if config.zero_scores:
        scores = np.zeros((n, K))
    noise = rng.standard_normal((n, grid.n_points)) * config.noise_sd
    values = mu + scores @ psi + noise

    ds = FunctionalDataset(
        grid=grid,
        values=values,
        mask=np.ones_like(values, dtype=bool),
        subject_ids=np.array(_subject_ids(n), dtype=object),
        visit_indices=np.ones(n, dtype=int),
    )
    truth = GroundTruth(
        mean=mu, eigenfunctions=psi, eigenvalues=lam, scores=scores, noise_sd=config.noise_sd
    )
    return ds, truth


def _simulate_mfpca(config: SimConfig, grid: Grid, rng: np.random.Generator):
    lam1 = _check_eigenvalues(config.eigenvalues, "mfpca level 1")
    lam2 = _check_eigenvalues(config.level2_eigenvalues, "mfpca level 2")
    K1, K2 = lam1.size, lam2.size
    n, J = config.n_subjects, config.n_visits
    if J < 2:
        raise DataError("mfpca scenario needs at least 2 visits")

    if config.family == "constant":
        psi1 = constant_function(grid.points)
        psi2 = fourier_functions(grid.points, K2, offset=0)
    else:
        psi1 = fourier_functions(grid.points, K1, offset=0)
        psi2 = fourier_functions(grid.points, K2, offset=K1)
    mu = _mean_curve(config, grid.points)

    shifts = np.zeros((J, grid.n_points))
    if config.visit_shift_consts is not None:
        if len(config.visit_shift_consts) != J:
            raise DataError("visit_shift_consts must have one entry per visit")
        shifts = np.array(config.visit_shift_consts, dtype=float)[:, None] * np.ones(grid.n_points)

    c1 = rng.standard_normal((n, K1)) * np.sqrt(lam1)
    c2 = rng.standard_normal((n, J, K2)) * np.sqrt(lam2)
    if config.zero_scores:
        c1 = np.zeros((n, K1))
        c2 = np.zeros((n, J, K2))
    noise = rng.standard_normal((n * J, grid.n_points)) * config.noise_sd

    sids = _subject_ids(n)
    rows, subject_col, visit_col = [], [], []
    r = 0
    for i in range(n):
        base = mu + c1[i] @ psi1
        for j in range(J):
            rows.append(base + shifts[j] + c2[i, j] @ psi2 + noise[r])
            subject_col.append(sids[i])
            visit_col.append(j + 1)
            r += 1
    values = np.vstack(rows)

    ds = FunctionalDataset(
        grid=grid,
        values=values,
        mask=np.ones_like(values, dtype=bool),
        subject_ids=np.array(subject_col, dtype=object),
        visit_indices=np.array(visit_col, dtype=int),
    )
    truth = GroundTruth(
        mean=mu,
        eigenfunctions=psi1,
        eigenvalues=lam1,
        scores=c1,
        noise_sd=config.noise_sd,
        eigenfunctions2=psi2,
        eigenvalues2=lam2,
        scores2=c2.reshape(n * J, K2),
        visit_shifts=shifts if config.visit_shift_consts is not None else None,
    )
    return ds, truth


def _simulate_tvfpca(config: SimConfig, grid: Grid, rng: np.random.Generator):
    K = len(config.dyn_intercept_vars)
    if len(config.dyn_slope_vars) != K:
        raise DataError("dyn_intercept_vars and dyn_slope_vars must have equal length")
    iv = np.asarray(config.dyn_intercept_vars, dtype=float)
    sv = np.asarray(config.dyn_slope_vars, dtype=float)
    if np.any(iv <= 0) or np.any(sv < 0):
        raise DataError("tvfpca dynamics variances must be positive")
    n = config.n_subjects
    if config.visits_min < 1 or config.visits_max < config.visits_min:
        raise DataError("invalid visits_min/visits_max")

    psi = fourier_functions(grid.points, K)
    T0, T1 = config.t_range

    n_visits = rng.integers(config.visits_min, config.visits_max + 1, size=n)
    b0 = rng.standard_normal((n, K)) * np.sqrt(iv)
    b1 = rng.standard_normal((n, K)) * np.sqrt(sv)
    if config.zero_scores:
        b0 = np.zeros((n, K))
        b1 = np.zeros((n, K))
    total = int(n_visits.sum())
    times_flat = rng.uniform(T0, T1, size=total)
    noise = rng.standard_normal((total, grid.n_points)) * config.noise_sd

    truth = GroundTruth(
        mean=np.zeros(grid.n_points),  # filled below from the surface at T midpoint
        eigenfunctions=psi,
        eigenvalues=iv,
        scores=np.zeros((total, K)),
        noise_sd=config.noise_sd,
        dynamics={
            "intercepts": b0,
            "slopes": b1,
            "intercept_vars": iv,
            "slope_vars": sv,
        },
        mean_surface_coefs=config.mean_surface_coefs,
    )

    sids = _subject_ids(n)
    rows, subject_col, visit_col, time_col = [], [], [], []
    raw_scores = []
    pos = 0
    for i in range(n):
        J = int(n_visits[i])
        times = np.sort(times_flat[pos : pos + J])
        for j in range(J):
            T = float(times[j])
            c = b0[i] + b1[i] * T
            raw_scores.append(c)
            rows.append(truth.mean_surface(grid.points, T) + c @ psi + noise[pos + j])
            subject_col.append(sids[i])
            visit_col.append(j + 1)
            time_col.append(T)
        pos += J
    values = np.vstack(rows)
    truth.scores = np.vstack(raw_scores)
    truth.mean = truth.mean_surface(grid.points, 0.5 * (T0 + T1))

    ds = FunctionalDataset(
        grid=grid,
        values=values,
        mask=np.ones_like(values, dtype=bool),
        subject_ids=np.array(subject_col, dtype=object),
        visit_indices=np.array(visit_col, dtype=int),
        visit_times=np.array(time_col, dtype=float),
    )
    return ds, truth


def _simulate_fosr(config: SimConfig, grid: Grid, rng: np.random.Generator):
    lam = _check_eigenvalues(config.eigenvalues, "fosr residual process")
    K = lam.size
    n = config.n_subjects
    points = grid.points
    a, b = points[0], points[-1]
    u = (points - a) / (b - a)

    beta0 = np.full(grid.n_points, config.beta_intercept)
    beta_x = config.beta_x_amp * np.sin(2.0 * np.pi * u)
    # residual eigenfunctions start after the harmonics used by beta_x
    psi = fourier_functions(points, K, offset=2)

    x = np.where(np.arange(n) % 2 == 0, 1.0, -1.0)
    scores = rng.standard_normal((n, K)) * np.sqrt(lam)
    if config.zero_scores:
        scores = np.zeros((n, K))
    noise = rng.standard_normal((n, grid.n_points)) * config.noise_sd

    values = beta0 + np.outer(x, beta_x) + scores @ psi + noise
    ds = FunctionalDataset(
        grid=grid,
        values=values,
        mask=np.ones_like(values, dtype=bool),
        subject_ids=np.array(_subject_ids(n), dtype=object),
        visit_indices=np.ones(n, dtype=int),
        covariates={"x": Covariate(name="x", kind="continuous", values=x.astype(float))},
    )
    truth = GroundTruth(
        mean=beta0,
        eigenfunctions=psi,
        eigenvalues=lam,
        scores=scores,
        noise_sd=config.noise_sd,
        coefficients={"(intercept)": beta0, "x": beta_x},
    )
    return ds, truth
