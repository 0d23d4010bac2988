import numpy as np
import pytest

from fdaw.dataset import DataError, FunctionalDataset, Grid
from fdaw.fpca import raw_covariance
from fdaw.simulate import SimConfig, simulate
from fdaw.tvfpca import (
    ScoreDynamics,
    TvFpcaOptions,
    fit_score_dynamics,
    fit_tvfpca,
    impute_missing,
    predict_scores,
    predict_trajectory,
    visit_time_summary,
)


def make_ds(values, subjects, visits, times, points=None, mask=None):
    values = np.asarray(values, dtype=float)
    n, d = values.shape
    grid = Grid.from_points(points if points is not None else np.linspace(0, 1, d))
    return FunctionalDataset(
        grid=grid,
        values=values,
        mask=np.ones_like(values, dtype=bool) if mask is None else mask,
        subject_ids=np.array(subjects, dtype=object),
        visit_indices=np.array(visits, dtype=int),
        visit_times=np.array(times, dtype=float),
    )


class TestImputeMissing:
    def test_no_missing_identity(self, fpca_sim):
        ds, _ = fpca_sim
        assert impute_missing(ds) is ds

    def test_holdout_imputation(self):
        # constant mean keeps the pooled mean in the penalty null space; the
        # residual imputation error is the held-out subject's score leaking
        # into the pooled mean, which shrinks like 1/n
        cfg = SimConfig(n_subjects=300, n_points=30, eigenvalues=(2.0,), noise_sd=0.0,
                        family="constant", mean_sin_amp=0.0)
        ds, _ = simulate("fpca", cfg, seed=51)
        mask = np.ones_like(ds.values, dtype=bool)
        mask[3, 7] = False
        holey = FunctionalDataset(
            grid=ds.grid, values=np.where(mask, ds.values, np.nan), mask=mask,
            subject_ids=ds.subject_ids, visit_indices=ds.visit_indices,
        )
        filled = impute_missing(holey)
        assert filled.mask.all()
        assert abs(filled.values[3, 7] - ds.values[3, 7]) < 1e-3
        # observed cells untouched
        assert np.array_equal(np.where(mask, filled.values, 0.0), np.where(mask, ds.values, 0.0))

    def test_all_missing_row_rejected(self):
        values = np.array([[1.0, 2.0, 1.5], [np.nan, np.nan, np.nan], [0.5, 1.0, 0.75]])
        mask = ~np.isnan(values)
        ds = FunctionalDataset(
            grid=Grid.from_points([0.0, 0.5, 1.0]), values=values, mask=mask,
            subject_ids=np.array(["a", "b", "c"], dtype=object),
            visit_indices=np.array([1, 1, 1]),
        )
        with pytest.raises(DataError):
            impute_missing(ds)


class TestFitErrors:
    def test_requires_visit_time(self, fpca_sim):
        ds, _ = fpca_sim
        with pytest.raises(DataError, match="visit_time"):
            fit_tvfpca(ds)

    def test_fpca_method_needs_three_distinct_times(self):
        rng = np.random.default_rng(0)
        values = rng.standard_normal((4, 12))
        ds = make_ds(values, ["a", "a", "b", "b"], [1, 2, 1, 2], [0.0, 1.0, 0.0, 1.0])
        with pytest.raises(DataError, match="lme"):
            fit_tvfpca(ds, TvFpcaOptions(method="fpca"))

    def test_constant_data_degenerate(self):
        from fdaw.fpca import DegenerateDataError

        values = np.full((6, 12), 5.0)
        ds = make_ds(values, ["a", "a", "b", "b", "c", "c"], [1, 2, 1, 2, 1, 2],
                     [0.1, 0.5, 0.2, 0.6, 0.3, 0.7])
        with pytest.raises(DegenerateDataError):
            fit_tvfpca(ds)


class TestDegenerateTimeReduction:
    def test_matches_fpca_covariance_path(self):
        # all visit times equal, one visit per subject; n large enough that
        # the raw covariance's own sampling wiggle sits inside the tolerance
        cfg = SimConfig(n_subjects=2000, n_points=30, eigenvalues=(0.5, 0.125), noise_sd=0.05)
        base, _ = simulate("fpca", cfg, seed=53)
        ds = FunctionalDataset(
            grid=base.grid, values=base.values, mask=base.mask,
            subject_ids=base.subject_ids, visit_indices=base.visit_indices,
            visit_times=np.full(base.n_curves, 0.5),
        )
        fit = fit_tvfpca(ds, TvFpcaOptions(method="lme"))
        # mean surface constant in T over the (degenerate) range
        assert fit.t_range == (0.5, 0.5)
        mu_lo = fit.mu_surface.at(ds.grid.points, 0.5)
        # marginal covariance vs the fpca raw covariance of the same demeaned curves
        raw, _ = raw_covariance(ds, mu_lo)
        assert np.max(np.abs(fit.marginal_sigma - raw)) < 0.05

    def test_trajectory_frames_identical_when_degenerate(self):
        cfg = SimConfig(n_subjects=20, n_points=16, eigenvalues=(1.0,), noise_sd=0.05)
        base, _ = simulate("fpca", cfg, seed=54)
        ds = FunctionalDataset(
            grid=base.grid, values=base.values, mask=base.mask,
            subject_ids=base.subject_ids, visit_indices=base.visit_indices,
            visit_times=np.zeros(base.n_curves),
        )
        fit = fit_tvfpca(ds)
        frames = predict_trajectory(fit, fit.subjects()[0])
        assert len(frames) == 21
        curves = np.array([c for _, c in frames])
        assert np.max(np.abs(curves - curves[0])) < 1e-10


class TestScoreDynamicsLme:
    def test_exact_line_recovered(self):
        subjects = np.repeat([f"s{i}" for i in range(10)], 4)
        rng = np.random.default_rng(55)
        times = rng.uniform(0, 1, size=40)
        scores = 1.0 + 2.0 * times
        dyn = fit_score_dynamics(scores, subjects, times, "lme")
        assert dyn.fixed[0] == pytest.approx(1.0, abs=1e-6)
        assert dyn.fixed[1] == pytest.approx(2.0, abs=1e-6)
        assert np.max(np.abs(dyn.re_cov)) < 1e-8

    def test_zero_scores_zero_parameters(self):
        subjects = np.repeat(["a", "b", "c"], 3)
        times = np.tile([0.0, 0.5, 1.0], 3)
        dyn = fit_score_dynamics(np.zeros(9), subjects, times, "lme")
        assert dyn.fixed == (0.0, 0.0)
        assert np.allclose(dyn.re_cov, 0.0)

    def test_random_intercept_variance_recovery(self):
        rng = np.random.default_rng(56)
        n = 100
        b0 = rng.normal(0, 1.0, n)
        subjects, times, scores = [], [], []
        for i in range(n):
            for j in range(4):
                subjects.append(f"s{i}")
                times.append(rng.uniform(0, 1))
                scores.append(b0[i])
        dyn = fit_score_dynamics(np.array(scores), subjects, np.array(times), "lme")
        assert abs(dyn.re_cov[0, 0] - 1.0) < 0.3

    def test_gk_closed_form_matches_re_cov(self, tvfpca_fit):
        dyn = tvfpca_fit.dynamics[0]
        Ts = np.linspace(*tvfpca_fit.t_range, 21)
        G = dyn.gk(Ts)
        v0, c01, v1 = dyn.re_cov[0, 0], dyn.re_cov[0, 1], dyn.re_cov[1, 1]
        expected = v0 + c01 * (Ts[:, None] + Ts[None, :]) + v1 * np.outer(Ts, Ts)
        assert np.array_equal(G, expected)
        assert np.array_equal(G, G.T)
        assert np.all(np.diag(G) >= -1e-12)


class TestScoreDynamicsFpca:
    def test_needs_three_distinct_times(self):
        subjects = ["a", "a", "b", "b"]
        with pytest.raises(DataError, match="lme"):
            fit_score_dynamics(np.ones(4), subjects, np.array([0.0, 1.0, 0.0, 1.0]), "fpca")

    def test_symmetry_and_nonnegative_diagonal(self, tvfpca_sim):
        ds, _ = tvfpca_sim
        fit = fit_tvfpca(ds, TvFpcaOptions(method="fpca"))
        for dyn in fit.dynamics:
            Ts = np.linspace(*fit.t_range, 21)
            G = dyn.gk(Ts)
            assert np.max(np.abs(G - G.T)) < 1e-8
            assert np.all(np.diag(G) >= -1e-12)

    def test_zero_scores_degenerate(self):
        subjects = np.repeat([f"s{i}" for i in range(8)], 3)
        rng = np.random.default_rng(57)
        times = rng.uniform(0, 1, 24)
        dyn = fit_score_dynamics(np.zeros(24), subjects, times, "fpca", t_range=(0.0, 1.0))
        assert dyn.phi.shape[0] == 0
        assert np.allclose(dyn.gk(np.linspace(0, 1, 5)), 0.0)


class TestPrediction:
    def test_prediction_interpolates_noiseless_lines(self, tvfpca_fit):
        fit = tvfpca_fit
        for subject in fit.subjects()[:5]:
            rows = fit.rows_for_subject(subject)
            for k in (1, 2):
                preds = predict_scores(fit, subject, k, fit.visit_times[rows])
                assert np.max(np.abs(preds - fit.raw_scores[rows, k - 1])) < 1e-4

    def test_midpoint_is_average_for_linear_scores(self, tvfpca_fit):
        fit = tvfpca_fit
        subject = fit.subjects()[0]
        rows = fit.rows_for_subject(subject)
        t1, t2 = fit.visit_times[rows[0]], fit.visit_times[rows[1]]
        mid = predict_scores(fit, subject, 1, [(t1 + t2) / 2.0])[0]
        ends = predict_scores(fit, subject, 1, [t1, t2])
        assert mid == pytest.approx(ends.mean(), abs=1e-8)

    def test_unknown_subject(self, tvfpca_fit):
        with pytest.raises(DataError, match="unknown subject"):
            predict_scores(tvfpca_fit, "nobody", 1, [0.5])
        with pytest.raises(DataError, match="unknown subject"):
            predict_trajectory(tvfpca_fit, "nobody")

    def test_extrapolation_warns(self, tvfpca_fit):
        lo, hi = tvfpca_fit.t_range
        with pytest.warns(UserWarning, match="extrapolat"):
            predict_scores(tvfpca_fit, tvfpca_fit.subjects()[0], 1, [hi + 1.0])

    def test_trajectory_default_21_frames(self, tvfpca_fit):
        frames = predict_trajectory(tvfpca_fit, tvfpca_fit.subjects()[0])
        assert len(frames) == 21
        lo, hi = tvfpca_fit.t_range
        assert frames[0][0] == lo
        assert frames[-1][0] == hi

    def test_trajectory_rejects_tiny_nt(self, tvfpca_fit):
        with pytest.raises(DataError):
            predict_trajectory(tvfpca_fit, tvfpca_fit.subjects()[0], 1)

    def test_trajectory_matches_observed_curves(self, tvfpca_sim, tvfpca_fit):
        ds, _ = tvfpca_sim
        fit = tvfpca_fit
        sup = 0.0
        for subject in fit.subjects():
            rows = fit.rows_for_subject(subject)
            for r in rows:
                T = fit.visit_times[r]
                curve = fit.mu_surface.at(fit.grid.points, T)
                for k in range(fit.n_components):
                    curve = curve + predict_scores(fit, subject, k + 1, [T])[0] * fit.psi[k]
                sup = max(sup, np.max(np.abs(curve - ds.values[r])))
        assert sup < 0.05

    def test_adjacent_frames_tighten_with_refinement(self, tvfpca_fit):
        fit = tvfpca_fit
        subject = fit.subjects()[0]

        def max_gap(n):
            frames = predict_trajectory(fit, subject, n)
            curves = np.array([c for _, c in frames])
            return np.max(np.abs(np.diff(curves, axis=0)))

        # halving the step at least halves the largest adjacent gap
        # (nested refinement: 21 -> 41 frames; tiny slack for second-order terms)
        assert max_gap(41) <= 0.5 * max_gap(21) * (1.0 + 1e-6)


class TestVisitTimeSummary:
    def test_two_bins(self):
        values = np.random.default_rng(1).standard_normal((4, 8))
        ds = make_ds(values, ["a", "a", "b", "b"], [1, 2, 1, 2], [0.0, 0.0, 1.0, 1.0])
        out = visit_time_summary(ds, bins=2)
        assert out["hist_counts"].tolist() == [2, 2]

    def test_single_visit(self):
        values = np.random.default_rng(2).standard_normal((1, 8))
        ds = make_ds(values, ["a"], [1], [0.3])
        out = visit_time_summary(ds)
        assert out["hist_counts"].tolist() == [1]

    def test_counts_conserved(self, tvfpca_sim):
        ds, _ = tvfpca_sim
        out = visit_time_summary(ds)
        assert out["hist_counts"].sum() == ds.n_curves
        assert len(out["rug"]) == ds.n_curves

    def test_requires_times(self, fpca_sim):
        ds, _ = fpca_sim
        with pytest.raises(DataError):
            visit_time_summary(ds)


class TestRecovery:
    def test_lme_matches_per_subject_ols(self, tvfpca_fit):
        fit = tvfpca_fit
        worst = 0.0
        for subject in fit.subjects():
            rows = fit.rows_for_subject(subject)
            T = fit.visit_times[rows]
            X = np.column_stack([np.ones(T.size), T])
            for k in range(fit.n_components):
                c = fit.raw_scores[rows, k]
                ols, *_ = np.linalg.lstsq(X, c, rcond=None)
                dyn = fit.dynamics[k]
                V = X @ dyn.re_cov @ X.T + max(dyn.resid_var, 1e-12) * np.eye(T.size)
                b_hat = dyn.re_cov @ X.T @ np.linalg.solve(V, c - X @ np.asarray(dyn.fixed))
                line = np.asarray(dyn.fixed) + b_hat
                worst = max(worst, np.max(np.abs(line - ols)))
        assert worst < 0.05

    def test_pointwise_mean_is_plain_average(self, tvfpca_sim, tvfpca_fit):
        ds, _ = tvfpca_sim
        expected = ds.values.mean(axis=0)  # fully observed
        assert np.allclose(tvfpca_fit.pointwise_mean, expected, atol=1e-12)


class TestEmConvergenceFlag:
    def test_non_convergence_returns_last_iterate_with_flag(self):
        from fdaw.tvfpca import _fit_lme, _group_by_subject

        rng = np.random.default_rng(60)
        subjects = np.repeat([f"s{i}" for i in range(12)], 4)
        times = rng.uniform(0, 1, 48)
        scores = rng.standard_normal(48)
        groups = _group_by_subject(subjects)
        with pytest.warns(UserWarning, match="did not converge"):
            dyn = _fit_lme(scores, times, groups, max_iter=1)
        assert not dyn.converged
        assert np.all(np.isfinite(dyn.re_cov))


class TestZeroScoreTrajectory:
    def test_frames_equal_mean_surface_slices(self, tvfpca_fit):
        import copy

        from fdaw.tvfpca import ScoreDynamics

        fit = copy.copy(tvfpca_fit)
        fit.raw_scores = np.zeros_like(tvfpca_fit.raw_scores)
        fit.dynamics = [
            ScoreDynamics(method="lme", fixed=(0.0, 0.0), re_cov=np.zeros((2, 2)),
                          resid_var=0.0)
            for _ in tvfpca_fit.dynamics
        ]
        frames = predict_trajectory(fit, fit.subjects()[0])
        t_values, slices = fit.mu_slices()
        for j, (T, curve) in enumerate(frames):
            assert T == t_values[j]
            assert np.allclose(curve, slices[:, j], atol=1e-12)
