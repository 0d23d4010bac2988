import numpy as np
import pytest

from fdaw.simulate import SimConfig, simulate


@pytest.fixture(scope="session")
def fpca_sim():
    """Acceptance-scale FPCA draw: n=200, D=80, lam=(4,1), noise sd 0.5."""
    cfg = SimConfig(n_subjects=200, n_points=80, eigenvalues=(4.0, 1.0), noise_sd=0.5)
    return simulate("fpca", cfg, seed=11)


@pytest.fixture(scope="session")
def fpca_fit(fpca_sim):
    from fdaw.fpca import FpcaOptions, fit_fpca

    ds, _ = fpca_sim
    return fit_fpca(ds, FpcaOptions(pve=0.95))


@pytest.fixture(scope="session")
def mfpca_sim():
    cfg = SimConfig(
        n_subjects=60, n_points=50, n_visits=4,
        eigenvalues=(2.0,), level2_eigenvalues=(1.0,), noise_sd=0.3,
    )
    return simulate("mfpca", cfg, seed=5)


@pytest.fixture(scope="session")
def mfpca_fit(mfpca_sim):
    from fdaw.mfpca import MfpcaOptions, fit_mfpca

    ds, _ = mfpca_sim
    return fit_mfpca(ds, MfpcaOptions())


@pytest.fixture(scope="session")
def tvfpca_sim():
    """Noiseless random-line dynamics, 50 subjects with 4-6 visits."""
    cfg = SimConfig(
        n_subjects=50, n_points=40, noise_sd=0.0, visits_min=4, visits_max=6,
        dyn_intercept_vars=(1.0, 0.5), dyn_slope_vars=(0.5, 0.25),
    )
    return simulate("tvfpca", cfg, seed=21)


@pytest.fixture(scope="session")
def tvfpca_fit(tvfpca_sim):
    from fdaw.tvfpca import TvFpcaOptions, fit_tvfpca

    ds, _ = tvfpca_sim
    return fit_tvfpca(ds, TvFpcaOptions(method="lme"))


@pytest.fixture(scope="session")
def fosr_sim():
    cfg = SimConfig(n_subjects=150, n_points=60, eigenvalues=(1.0, 0.25), noise_sd=0.3)
    return simulate("fosr", cfg, seed=3)


@pytest.fixture(scope="session")
def fosr_fit(fosr_sim):
    from fdaw.fosr import FosrOptions, fit_fosr

    ds, _ = fosr_sim
    return fit_fosr(ds, ["x"], FosrOptions())


def sign_align(est: np.ndarray, ref: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """Flip the estimated curve if it anti-correlates with the reference."""
    s = np.sign(np.sum(est * ref * weights))
    return est * (s if s != 0 else 1.0)
