"""Data generation from the latent-threshold model and the replication harness.

Latent rows are drawn as correlated standard normals (identity marginal
transforms) and pushed through the per-column thresholds: indicators for
binary columns, interval counting for ordinal ones, zero-censoring for
truncated ones.  Random correlation matrices come from the partial-correlation
vine construction that is uniform over the space of correlation matrices,
rejected until the spectral condition number is below a cap.  All randomness
uses counter-based Philox streams keyed by user seeds, so results are portable
and reproducible; replicate r of a study uses key ``seed ^ r``.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .bridge import BINARY, CONTINUOUS, ORDINAL, TRUNCATED
from .dataio import ColumnSpec, MixedDataset
from .exceptions import RetryExhaustedError, SgcrmError, ValidationError

DEFAULT_SEED = 20240001


@dataclass
class VariableSpec:
    """One simulated column: a type plus its latent cutpoints."""

    type: str
    cutpoints: tuple = ()
    name: str | None = None

    def __post_init__(self):
        self.cutpoints = tuple(float(c) for c in self.cutpoints)
        if self.type == CONTINUOUS and self.cutpoints:
            raise ValidationError("cutpoints", "continuous variables take no cutpoints")
        if self.type in (BINARY, TRUNCATED) and len(self.cutpoints) != 1:
            raise ValidationError("cutpoints", f"{self.type} variables take one cutpoint")
        if self.type == TRUNCATED and self.cutpoints[0] < 0:
            # identity marginal transforms would otherwise emit negative
            # "truncated" values, breaking the nonnegativity invariant
            raise ValidationError("cutpoints", "truncated cutpoint must be >= 0")
        if self.type == ORDINAL:
            if len(self.cutpoints) < 1 or any(
                    b <= a for a, b in zip(self.cutpoints, self.cutpoints[1:])):
                raise ValidationError(
                    "cutpoints", "ordinal cutpoints must be strictly increasing")


@dataclass
class SimScenario:
    variables: list
    n: int = 1000
    seed: int = DEFAULT_SEED
    condition_cap: float = 10.0

    def __post_init__(self):
        if self.n < 2:
            raise ValidationError("n", "scenario needs n >= 2")
        if len(self.variables) < 2:
            raise ValidationError("variables", "scenario needs at least 2 variables")

    @property
    def p(self):
        return len(self.variables)

    def schema(self):
        out = []
        for i, v in enumerate(self.variables):
            name = v.name or f"X{i + 1}"
            levels = len(v.cutpoints) + 1 if v.type == ORDINAL else None
            out.append(ColumnSpec(name=name, type=v.type, levels=levels))
        return out


def table3_variables():
    """The eight-variable mixed scenario used throughout the simulations:
    binary at 0.3 and 1 (high/low entropy), a continuous column, 3- and
    4-level ordinals at mixed entropies, and a zero-truncated column."""
    return [
        VariableSpec(BINARY, (0.3,)),
        VariableSpec(CONTINUOUS),
        VariableSpec(BINARY, (1.0,)),
        VariableSpec(ORDINAL, (-0.1, 0.6)),
        VariableSpec(ORDINAL, (-1.0, 1.0)),
        VariableSpec(ORDINAL, (-0.7, 0.1, 0.6)),
        VariableSpec(ORDINAL, (-0.3, 0.1, 0.2)),
        VariableSpec(TRUNCATED, (0.0,)),
    ]


def table3_scenario(n=1000, seed=DEFAULT_SEED):
    return SimScenario(variables=table3_variables(), n=n, seed=seed)


def _rng(seed):
    return np.random.Generator(np.random.Philox(key=int(seed) & (2**64 - 1)))


def _vine_corr(p, rng):
    """Uniform random correlation matrix by the partial-correlation C-vine."""
    beta0 = 1.0 + (p - 1) / 2.0
    partials = np.zeros((p, p))
    S = np.eye(p)
    for k in range(p - 1):
        beta0 -= 0.5
        for i in range(k + 1, p):
            partials[k, i] = 2.0 * rng.beta(beta0, beta0) - 1.0
            r = partials[k, i]
            for l in range(k - 1, -1, -1):
                r = (r * math.sqrt((1 - partials[l, i] ** 2) * (1 - partials[l, k] ** 2))
                     + partials[l, i] * partials[l, k])
            S[k, i] = S[i, k] = r
    return S


def random_corr(p, seed, condition_cap=10.0, max_tries=10_000):
    """Uniform-over-correlation-matrices draw with a condition-number cap.

    Deterministic given the seed; raises RetryExhaustedError if no draw meets
    the spectral condition-number cap within ``max_tries`` attempts.
    """
    if p < 2:
        raise SgcrmError("random correlation needs p >= 2")
    rng = _rng(seed)
    for _ in range(max_tries):
        S = _vine_corr(p, rng)
        w = np.linalg.eigvalsh(S)
        if w.min() > 0 and w.max() / w.min() < condition_cap:
            return S
    raise RetryExhaustedError(
        f"no correlation matrix with condition number < {condition_cap} in {max_tries} draws")


def threshold_latent(z, variables):
    """Apply the per-column observation maps to a matrix of latent draws."""
    out = np.empty_like(z)
    for j, v in enumerate(variables):
        col = z[:, j]
        if v.type == CONTINUOUS:
            out[:, j] = col
        elif v.type == BINARY:
            out[:, j] = (col > v.cutpoints[0]).astype(float)
        elif v.type == TRUNCATED:
            out[:, j] = np.where(col > v.cutpoints[0], col, 0.0)
        else:
            out[:, j] = np.searchsorted(np.asarray(v.cutpoints), col, side="right")
    return out


def glnpn_sample(sigma, scenario, return_latent=False):
    """Draw a MixedDataset of ``scenario.n`` rows with latent correlation ``sigma``."""
    sigma = np.asarray(sigma, dtype=float)
    if sigma.shape != (scenario.p, scenario.p):
        raise SgcrmError("correlation matrix does not match the variable count")
    rng = _rng(scenario.seed)
    L = np.linalg.cholesky(sigma)
    z = rng.standard_normal((scenario.n, scenario.p)) @ L.T
    values = threshold_latent(z, scenario.variables)
    ds = MixedDataset(values=values, schema=scenario.schema())
    return (ds, z) if return_latent else ds


def mask_cells(dataset, fraction, seed):
    """Set a random fraction of cells to missing; returns (masked copy, mask)."""
    rng = _rng(seed)
    mask = rng.random(dataset.values.shape) < fraction
    # a row must keep at least one observed cell
    all_gone = mask.all(axis=1)
    mask[all_gone, 0] = False
    vals = dataset.values.copy()
    vals[mask] = np.nan
    return MixedDataset(values=vals, schema=dataset.schema), mask


def entropy(proportions):
    """Shannon entropy -sum p log p of a discrete distribution (natural log)."""
    p = np.asarray(proportions, dtype=float)
    p = p[p > 0]
    return float(-(p * np.log(p)).sum())


@dataclass
class CoverageReport:
    """Per-coefficient CI coverage over replicated fits of one scenario."""

    beta_true: np.ndarray
    coverage: np.ndarray
    hits: np.ndarray                  # replicates x coefficients, -1 marks failures
    estimates: np.ndarray             # replicates x coefficients, NaN on failure
    intervals: np.ndarray             # replicates x coefficients x 2
    failures: list = field(default_factory=list)
    replicates: int = 0
    confidence: float = 0.95

    def recount(self):
        """Independent recount of coverage from the stored hit flags."""
        ok = self.hits >= 0
        return np.where(ok.sum(axis=0) > 0,
                        (self.hits == 1).sum(axis=0) / np.maximum(ok.sum(axis=0), 1),
                        np.nan)


def _fit_replicate(sigma_true, scenario, rep_index, outcome, confidence, with_ci):
    from .cutoffs import estimate_cutoffs
    from .kendall import tau_matrix
    from .latentcorr import bridge_matrix, nearest_pd
    from .regress import fit, fit_with_inference

    rep = SimScenario(variables=scenario.variables, n=scenario.n,
                      seed=scenario.seed ^ rep_index,
                      condition_cap=scenario.condition_cap)
    data = glnpn_sample(sigma_true, rep)
    tau = tau_matrix(data)
    cuts = estimate_cutoffs(data)
    sigma = nearest_pd(bridge_matrix(tau, cuts, data.types))
    predictors = [j for j in range(scenario.p) if j != outcome]
    if with_ci:
        return fit_with_inference(data, sigma, tau, cuts, outcome, predictors,
                                  confidence)
    return fit(sigma, outcome, predictors)


def coverage_study(scenario, replicates, confidence=0.95, outcome=0, progress=None):
    """Replicated CI coverage for the latent regression of one outcome.

    One true correlation matrix is drawn from the scenario seed; each
    replicate resamples data (seed ^ replicate index, 1-based), refits, and
    records whether each coefficient's interval covers the truth.
    Per-replicate failures are recorded and skipped, not fatal.
    """
    if replicates < 50:
        raise SgcrmError("coverage study needs >= 50 replicates")
    sigma_true = random_corr(scenario.p, scenario.seed, scenario.condition_cap)
    predictors = [j for j in range(scenario.p) if j != outcome]
    xx = sigma_true[np.ix_(predictors, predictors)]
    xy = sigma_true[np.ix_(predictors, [outcome])].ravel()
    beta_true = np.linalg.solve(xx, xy)

    q = len(predictors)
    hits = np.full((replicates, q), -1, dtype=int)
    estimates = np.full((replicates, q), np.nan)
    intervals = np.full((replicates, q, 2), np.nan)
    failures = []
    for r in range(1, replicates + 1):
        try:
            res = _fit_replicate(sigma_true, scenario, r, outcome, confidence, True)
        except SgcrmError as exc:
            failures.append((r, str(exc)))
            continue
        estimates[r - 1] = res.beta
        intervals[r - 1] = res.ci
        hits[r - 1] = ((res.ci[:, 0] <= beta_true) & (beta_true <= res.ci[:, 1])).astype(int)
        if progress:
            progress(r)
    ok = hits >= 0
    coverage = np.where(ok.sum(axis=0) > 0,
                        (hits == 1).sum(axis=0) / np.maximum(ok.sum(axis=0), 1), np.nan)
    return CoverageReport(beta_true=beta_true, coverage=coverage, hits=hits,
                          estimates=estimates, intervals=intervals,
                          failures=failures, replicates=replicates,
                          confidence=confidence)
