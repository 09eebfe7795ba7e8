"""Composite Gaussian process emulators for deterministic computer experiments."""
from .cgp import (
    CgpParams,
    FittedCgp,
    NoiseSpec,
    VolatilityState,
    assemble_Q,
    build_cgp,
    cgp_predict,
    cgp_predict_noisy,
    cgp_predict_sequential,
    posterior_variance,
    prediction_interval,
    update_volatility,
    volatility_fn,
    with_noise,
)
from .data import Dataset
from .design import Design, bundled_design, maximin_lhd, random_lhd, sparse_1d_design
from .errors import (
    ArchiveError,
    CompGPError,
    DataParseError,
    DegenerateDesignError,
    EstimationFailedError,
    IllPosedBasisError,
    InvalidArgumentError,
    SingularMatrixError,
)
from .estimate import FitOptions, FitReport, ProfileObjective, fit_cgp, profile_neg_loglik
from .gls import closed_form_mu_tau2
from .kernels import corr_matrix, corr_vector, design_stats, gaussian_corr, safe_cholesky
from .kriging import Basis, KrigingModel, fit_nugget, fit_ok, fit_uk, predict
from .persistence import load_model, read_dataset_csv, save_model, write_dataset_csv
from .prediction import Prediction

__version__ = "0.1.0"

__all__ = [
    "ArchiveError",
    "Basis",
    "CgpParams",
    "CompGPError",
    "DataParseError",
    "Dataset",
    "DegenerateDesignError",
    "Design",
    "EstimationFailedError",
    "FitOptions",
    "FitReport",
    "FittedCgp",
    "IllPosedBasisError",
    "InvalidArgumentError",
    "KrigingModel",
    "NoiseSpec",
    "Prediction",
    "ProfileObjective",
    "SingularMatrixError",
    "VolatilityState",
    "assemble_Q",
    "build_cgp",
    "bundled_design",
    "cgp_predict",
    "cgp_predict_noisy",
    "cgp_predict_sequential",
    "closed_form_mu_tau2",
    "corr_matrix",
    "corr_vector",
    "design_stats",
    "fit_cgp",
    "fit_nugget",
    "fit_ok",
    "fit_uk",
    "gaussian_corr",
    "load_model",
    "maximin_lhd",
    "posterior_variance",
    "predict",
    "prediction_interval",
    "profile_neg_loglik",
    "random_lhd",
    "read_dataset_csv",
    "safe_cholesky",
    "save_model",
    "sparse_1d_design",
    "update_volatility",
    "volatility_fn",
    "with_noise",
    "write_dataset_csv",
]
