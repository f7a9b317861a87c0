"""Latent Gaussian copula modeling for mixed continuous/truncated/ordinal/binary data.

The package estimates a latent correlation matrix by inverting rank-correlation
bridges, fits mutually consistent latent-space regressions with asymptotic
confidence intervals, predicts subject-level latent variables, and imputes
missing observations.  A small scikit-learn style estimator layer sits on top
of the functional core.
"""

from .bridge import PAIR_KINDS, VariableCutoffs, forward, forward_deriv, inverse
from .cutoffs import CutoffSet, estimate_cutoffs
from .dataio import ColumnSpec, MixedDataset, load_csv, write_report
from .estimators import (CopulaImputer, GaussianCopulaCorrelation,
                         LatentRegression, LatentValues)
from .exceptions import SgcrmError
from .kendall import KendallCovariance, KendallResult, tau_matrix, tau_pair, vk_hat
from .latent import build_transforms, impute_missing, impute_rows, predict_latent, predict_rows
from .latentcorr import LatentCorrelation, bridge_matrix, estimate_latent_correlation, nearest_pd
from .regress import RegressionFit, asymptotic_cov_beta, asymptotic_cov_sigma, fit
from .sim import SimScenario, VariableSpec, coverage_study, glnpn_sample, random_corr, table3_scenario

__version__ = "0.1.0"

__all__ = [
    "PAIR_KINDS", "VariableCutoffs", "forward", "forward_deriv", "inverse",
    "CutoffSet", "estimate_cutoffs",
    "ColumnSpec", "MixedDataset", "load_csv", "write_report",
    "CopulaImputer", "GaussianCopulaCorrelation", "LatentRegression", "LatentValues",
    "SgcrmError",
    "KendallCovariance", "KendallResult", "tau_matrix", "tau_pair", "vk_hat",
    "build_transforms", "impute_missing", "impute_rows", "predict_latent", "predict_rows",
    "LatentCorrelation", "bridge_matrix", "estimate_latent_correlation", "nearest_pd",
    "RegressionFit", "asymptotic_cov_beta", "asymptotic_cov_sigma", "fit",
    "SimScenario", "VariableSpec", "coverage_study", "glnpn_sample", "random_corr",
    "table3_scenario",
    "__version__",
]
