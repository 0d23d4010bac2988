"""fdaw: a functional data analysis workbench.

Fits FPCA, multilevel FPCA, time-varying FPCA, and function-on-scalar
regression models to discretely observed curves, and serves the fitted
components to an interactive browser explorer.
"""

__version__ = "0.1.0"

from .dataset import FunctionalDataset, Grid, ValidationReport, load_csv, validate, write_csv
from .depth import DepthResult, band_depth, depth_order, modified_band_depth
from .fosr import FosrFit, build_design, coef_with_bands, fit_fosr, predict_mean
from .fpca import FpcaFit, component_band, fit_fpca, lincom_curve, scree_data
from .mfpca import MfpcaFit, fit_mfpca
from .simulate import GroundTruth, SimConfig, simulate
from .tvfpca import TvFpcaFit, fit_tvfpca, impute_missing, predict_trajectory, visit_time_summary

__all__ = [
    "Grid",
    "FunctionalDataset",
    "ValidationReport",
    "load_csv",
    "write_csv",
    "validate",
    "simulate",
    "SimConfig",
    "GroundTruth",
    "FpcaFit",
    "fit_fpca",
    "component_band",
    "lincom_curve",
    "scree_data",
    "MfpcaFit",
    "fit_mfpca",
    "TvFpcaFit",
    "fit_tvfpca",
    "impute_missing",
    "predict_trajectory",
    "visit_time_summary",
    "FosrFit",
    "build_design",
    "fit_fosr",
    "coef_with_bands",
    "predict_mean",
    "DepthResult",
    "band_depth",
    "modified_band_depth",
    "depth_order",
]
