"""Latent-space regression with asymptotic inference.

Fitting is a deterministic function of the latent correlation matrix:
beta = Sigma_XX^{-1} Sigma_XY, residual variance 1 - Sigma_YX beta, latent
R^2 = Sigma_YX beta.  Inference composes three pieces by the delta method:
the Kendall-tau covariance V_K, the diagonal matrix of inverse-bridge
derivatives (dF^{-1}/dtau = 1 / F'(rho-hat)), and the Jacobian of beta with
respect to the lower-triangle correlation entries, computed by central finite
differences with symmetric matrix perturbations.  Cutoffs are plugged in as
constants, so confidence intervals inherit the paper-level mild undercoverage.
"""

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import bridge, mvn
from .exceptions import SgcrmError, SingularityError
from .kendall import pair_order

_DERIV_RHO_BOUND = 1.0 - 1e-5


@dataclass
class RegressionFit:
    """Latent regression result; covariances appear after the inference step.

    ``v_beta`` is the asymptotic covariance of sqrt(n) (beta-hat - beta);
    finite-sample intervals divide it by n.
    """

    outcome: int
    predictors: list
    beta: np.ndarray
    r2_latent: float
    residual_var: float
    v_beta: np.ndarray | None = None
    ci: np.ndarray | None = None
    confidence: float | None = None


def _solve_beta(sigma, outcome, predictors):
    xx = sigma[np.ix_(predictors, predictors)]
    xy = sigma[np.ix_(predictors, [outcome])].ravel()
    try:
        factor = cho_factor(xx)
    except LinAlgError as exc:
        raise SingularityError(f"predictor block is not positive definite: {exc}")
    return cho_solve(factor, xy), xy


def fit(sigma, outcome, predictors):
    """Fit the latent regression of one column on a set of others.

    Parameters
    ----------
    sigma : LatentCorrelation
        Projected (positive definite) latent correlation estimate.
    outcome : int
        Outcome column index.
    predictors : sequence of int
        Predictor column indices; must not contain the outcome.
    """
    predictors = list(predictors)
    if outcome in predictors:
        raise SgcrmError("outcome cannot be one of the predictors")
    if not predictors:
        raise SgcrmError("at least one predictor is required")
    if not getattr(sigma, "projected", False):
        raise SgcrmError("fit requires a projected (positive definite) correlation")
    S = sigma.sigma
    beta, xy = _solve_beta(S, outcome, predictors)
    explained = float(xy @ beta)
    return RegressionFit(outcome=outcome, predictors=predictors,
                         beta=beta, r2_latent=explained,
                         residual_var=1.0 - explained)


def _inverse_bridge_derivs(tau, cuts, types):
    """dF^{-1}/dtau per lower-triangle pair, evaluated at the sample tau."""
    p = tau.p
    out = np.empty(len(pair_order(p)))
    for idx, (j, k) in enumerate(pair_order(p)):
        kind, swap = bridge.kind_of(types[j], types[k])
        cj, ck = (cuts[k], cuts[j]) if swap else (cuts[j], cuts[k])
        rho = bridge.inverse(kind, tau.tau[j, k], cj, ck)
        rho_c = float(np.clip(rho, -_DERIV_RHO_BOUND, _DERIV_RHO_BOUND))
        out[idx] = 1.0 / bridge.forward_deriv(kind, rho_c, cj, ck)
    return out


def asymptotic_cov_sigma(data, tau, vk, cuts):
    """Asymptotic covariance of sqrt(n) * vecl(sigma-hat): D_g V_K D_g.

    ``D_g`` is the diagonal of inverse-bridge derivatives at the sample tau;
    cutoffs enter as constants.
    """
    types = data.types if hasattr(data, "types") else list(data)
    d = _inverse_bridge_derivs(tau, cuts, types)
    if d.size != vk.dim:
        raise SgcrmError("Kendall covariance dimension does not match the pair count")
    return d[:, None] * vk.matrix * d[None, :]


def _beta_jacobian(sigma, outcome, predictors, step=1e-6):
    """d beta / d vecl(sigma) by central differences with symmetric perturbation.

    Entries not touching the outcome or a predictor leave beta unchanged, so
    their columns are exactly zero and skipped.
    """
    S = np.asarray(sigma.sigma if hasattr(sigma, "sigma") else sigma, dtype=float)
    p = S.shape[0]
    involved = set(predictors) | {outcome}
    pairs = pair_order(p)
    J = np.zeros((len(predictors), len(pairs)))
    for idx, (j, k) in enumerate(pairs):
        if j not in involved or k not in involved:
            continue
        h = step
        for attempt in range(4):
            try:
                Sp = S.copy()
                Sp[j, k] += h
                Sp[k, j] += h
                bp, _ = _solve_beta(Sp, outcome, predictors)
                Sm = S.copy()
                Sm[j, k] -= h
                Sm[k, j] -= h
                bm, _ = _solve_beta(Sm, outcome, predictors)
                J[:, idx] = (bp - bm) / (2.0 * h)
                break
            except SingularityError:
                if attempt == 3:
                    raise
                h *= 0.5
    return J


def asymptotic_cov_beta(sigma, v_sigma, outcome, predictors):
    """Asymptotic covariance of sqrt(n) (beta-hat - beta): J V_Sigma J^T."""
    J = _beta_jacobian(sigma, outcome, list(predictors))
    V = J @ v_sigma @ J.T
    return 0.5 * (V + V.T)


def confidence_intervals(fit_result, v_beta, n, confidence=0.95):
    """Per-coefficient normal-theory intervals at the given confidence level."""
    z = mvn.phi_inv(0.5 + confidence / 2.0)
    se = np.sqrt(np.maximum(np.diag(v_beta), 0.0) / n)
    lo = fit_result.beta - z * se
    hi = fit_result.beta + z * se
    return np.column_stack([lo, hi])


def fit_with_inference(data, sigma, tau, cuts, outcome, predictors, confidence=0.95):
    """Fit plus the full delta-method covariance and confidence intervals."""
    from .kendall import vk_hat

    result = fit(sigma, outcome, predictors)
    vk = vk_hat(data)
    v_sigma = asymptotic_cov_sigma(data, tau, vk, cuts)
    v_beta = asymptotic_cov_beta(sigma, v_sigma, outcome, result.predictors)
    result.v_beta = v_beta
    result.ci = confidence_intervals(result, v_beta, data.n, confidence)
    result.confidence = confidence
    return result
