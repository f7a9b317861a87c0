"""scikit-learn style estimators wrapping the functional core.

The estimators accept plain (n, p) arrays with NaN for missing cells plus a
``column_types`` parameter, so they compose with sklearn pipelines and model
selection utilities; ``get_params``/``set_params`` come from BaseEstimator.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError
from sklearn.utils.validation import check_array

from .bridge import ORDINAL
from .cutoffs import estimate_cutoffs
from .dataio import ColumnSpec, MixedDataset, validate_dataset
from .kendall import tau_matrix, vk_hat
from .latent import build_transforms, impute_rows, predict_rows
from .latentcorr import bridge_matrix, nearest_pd
from .regress import (asymptotic_cov_beta, asymptotic_cov_sigma,
                      confidence_intervals, fit as regress_fit)


def _as_dataset(X, column_types, ordinal_levels=None, names=None):
    X = check_array(X, ensure_all_finite="allow-nan", dtype=float)
    if len(column_types) != X.shape[1]:
        raise ValueError(
            f"column_types has {len(column_types)} entries for {X.shape[1]} columns")
    schema = []
    for j, t in enumerate(column_types):
        name = names[j] if names is not None else f"x{j}"
        levels = None
        if t == ORDINAL:
            if ordinal_levels and j in ordinal_levels:
                levels = int(ordinal_levels[j])
            else:
                col = X[:, j]
                levels = int(np.nanmax(col)) + 1 if np.isfinite(np.nanmax(col)) else 2
        schema.append(ColumnSpec(name=name, type=t, levels=levels))
    return validate_dataset(MixedDataset(values=X.copy(), schema=schema))


class GaussianCopulaCorrelation(BaseEstimator):
    """Latent correlation estimator for mixed continuous/truncated/ordinal/binary data.

    Parameters
    ----------
    column_types : list of str
        Per-column type, one of "continuous", "truncated", "ordinal", "binary".
    ordinal_levels : dict, optional
        Column index -> number of ordinal levels; inferred from the data when
        omitted.
    project : bool, default=True
        Project the bridged matrix to the nearest positive-definite
        correlation matrix.
    compute_vcov : bool, default=False
        Also estimate the asymptotic covariance of the latent correlations.

    Attributes
    ----------
    sigma_ : ndarray of shape (p, p)
        Estimated latent correlation matrix.
    tau_ : ndarray of shape (p, p)
        Sample Kendall's tau matrix.
    cutoffs_ : CutoffSet
        Estimated latent thresholds.
    saturated_pairs_ : list of (j, k)
        Pairs whose inversion hit the endpoint of the search interval.
    min_eigenvalue_ : float
        Smallest eigenvalue of ``sigma_``.
    vcov_sigma_ : ndarray, only with ``compute_vcov``
        Asymptotic covariance of sqrt(n) * vecl(sigma-hat).
    """

    def __init__(self, column_types=None, ordinal_levels=None, project=True,
                 compute_vcov=False):
        self.column_types = column_types
        self.ordinal_levels = ordinal_levels
        self.project = project
        self.compute_vcov = compute_vcov

    def fit(self, X, y=None):
        if self.column_types is None:
            raise ValueError("column_types is required")
        data = _as_dataset(X, self.column_types, self.ordinal_levels)
        tau = tau_matrix(data)
        cuts = estimate_cutoffs(data)
        raw = bridge_matrix(tau, cuts, data.types)
        result = nearest_pd(raw) if self.project else raw
        self.tau_ = tau.tau
        self.cutoffs_ = cuts
        self.latent_ = result
        self.sigma_ = result.sigma
        self.saturated_pairs_ = list(result.saturated_pairs)
        self.projected_ = result.projected
        self.min_eigenvalue_ = result.min_eigenvalue
        self.n_features_in_ = data.p
        self.n_samples_ = data.n
        if self.compute_vcov:
            self.vcov_sigma_ = asymptotic_cov_sigma(data, tau, vk_hat(data), cuts)
        return self

    def _check_fitted(self):
        if not hasattr(self, "sigma_"):
            raise NotFittedError("call fit first")


class LatentRegression(BaseEstimator):
    """Mutually consistent latent-space regression with asymptotic intervals.

    Parameters
    ----------
    outcome : int
        Outcome column index.
    column_types : list of str
        Per-column types (see GaussianCopulaCorrelation).
    predictors : list of int, optional
        Predictor column indices; defaults to all non-outcome columns.
    confidence : float, default=0.95
        Confidence level for the coefficient intervals.
    compute_ci : bool, default=True
        Compute the delta-method covariance and intervals (the expensive part).

    Attributes
    ----------
    beta_ : ndarray
        Latent regression coefficients.
    ci_ : ndarray of shape (len(predictors), 2)
        Confidence intervals, with ``compute_ci``.
    r2_latent_ : float
        Variance explained on the latent scale.
    residual_var_ : float
        Latent residual variance, 1 - r2_latent_.
    v_beta_ : ndarray
        Asymptotic covariance of sqrt(n) (beta-hat - beta), with ``compute_ci``.
    """

    def __init__(self, outcome=0, column_types=None, predictors=None,
                 confidence=0.95, compute_ci=True):
        self.outcome = outcome
        self.column_types = column_types
        self.predictors = predictors
        self.confidence = confidence
        self.compute_ci = compute_ci

    def fit(self, X, y=None):
        if self.column_types is None:
            raise ValueError("column_types is required")
        data = _as_dataset(X, self.column_types)
        tau = tau_matrix(data)
        cuts = estimate_cutoffs(data)
        sigma = nearest_pd(bridge_matrix(tau, cuts, data.types))
        predictors = (list(self.predictors) if self.predictors is not None
                      else [j for j in range(data.p) if j != self.outcome])
        result = regress_fit(sigma, self.outcome, predictors)
        self.sigma_ = sigma.sigma
        self.beta_ = result.beta
        self.r2_latent_ = result.r2_latent
        self.residual_var_ = result.residual_var
        self.predictors_ = predictors
        self.n_samples_ = data.n
        if self.compute_ci:
            v_sigma = asymptotic_cov_sigma(data, tau, vk_hat(data), cuts)
            self.v_beta_ = asymptotic_cov_beta(sigma, v_sigma, self.outcome,
                                               predictors)
            self.ci_ = confidence_intervals(result, self.v_beta_, data.n,
                                            self.confidence)
        return self


class LatentValues(TransformerMixin, BaseEstimator):
    """Transformer mapping observed mixed rows to predicted latent coordinates."""

    def __init__(self, column_types=None, ordinal_levels=None):
        self.column_types = column_types
        self.ordinal_levels = ordinal_levels

    def fit(self, X, y=None):
        corr = GaussianCopulaCorrelation(self.column_types, self.ordinal_levels)
        corr.fit(X)
        data = _as_dataset(X, self.column_types, self.ordinal_levels)
        self.correlation_ = corr.latent_
        self.cutoffs_ = corr.cutoffs_
        self.transforms_ = build_transforms(data)
        self.n_features_in_ = data.p
        return self

    def transform(self, X):
        if not hasattr(self, "correlation_"):
            raise NotFittedError("call fit first")
        data = _as_dataset(X, self.column_types, self.ordinal_levels)
        latent, _ = predict_rows(data, self.transforms_, self.cutoffs_,
                                 self.correlation_)
        return latent


class CopulaImputer(TransformerMixin, BaseEstimator):
    """Imputer filling missing cells by latent conditional means."""

    def __init__(self, column_types=None, ordinal_levels=None):
        self.column_types = column_types
        self.ordinal_levels = ordinal_levels

    def fit(self, X, y=None):
        corr = GaussianCopulaCorrelation(self.column_types, self.ordinal_levels)
        corr.fit(X)
        data = _as_dataset(X, self.column_types, self.ordinal_levels)
        self.correlation_ = corr.latent_
        self.cutoffs_ = corr.cutoffs_
        self.transforms_ = build_transforms(data)
        self.n_features_in_ = data.p
        return self

    def transform(self, X):
        if not hasattr(self, "correlation_"):
            raise NotFittedError("call fit first")
        data = _as_dataset(X, self.column_types, self.ordinal_levels)
        completed, _, _ = impute_rows(data, self.transforms_, self.cutoffs_,
                                      self.correlation_)
        return completed
