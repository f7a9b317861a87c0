"""Subject-level latent variable prediction and missing-data imputation.

Continuous and positive truncated observations pin their latent coordinates
through rank-based transform estimates f-hat = Phi^{-1}(F_n) with the
(n + 1)-denominator empirical CDF; discrete observations restrict their
latent coordinates to cutoff intervals.  Prediction conditions the latent
normal on the pinned coordinates and takes the truncated-normal mean over the
box; imputation maps predicted observed-coordinate latents through the
conditional-expectation identity E[L_M | X_O] = S_MO S_OO^{-1} E[L_O | X_O]
and back-transforms to the observed scale.

Boxes of dimension <= 4 use the deterministic boundary-integral reduction;
larger boxes fall back to the seeded Gibbs sampler.  Every row's Gibbs chain
consumes the same fixed uniform stream, so a row's prediction never depends
on which other rows are processed alongside it.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve, LinAlgError

from . import mvn
from .bridge import BINARY, CONTINUOUS, TRUNCATED
from .exceptions import (AllMissingError, DegenerateColumnError, SgcrmError,
                         SingularityError)

_COV_EIG_FLOOR = 1e-10


@dataclass
class ColumnTransform:
    """Rank-based estimate of one column's monotone transform."""

    kind: str
    n: int
    sorted_values: np.ndarray
    n_zero: int = 0

    def latent(self, x):
        """f-hat(x) = Phi^{-1}(F_n(x)); truncated columns require x > 0.

        Counts are clamped to [1, n] so queries below the sample minimum stay
        inside the open unit interval.
        """
        if self.kind == TRUNCATED:
            if x <= 0:
                raise SgcrmError("truncated transform is defined for x > 0 only")
            count = self.n_zero + np.searchsorted(self.sorted_values, x, side="right")
        else:
            count = np.searchsorted(self.sorted_values, x, side="right")
        count = min(max(int(count), 1), self.n)
        return mvn.phi_inv(count / (self.n + 1))

    def invert(self, lhat):
        """Observed value at the nearest sample quantile of Phi(lhat)."""
        rank = math.ceil((self.n + 1) * mvn.phi(lhat))
        if self.kind == TRUNCATED:
            rank -= self.n_zero
            rank = min(max(rank, 1), self.sorted_values.size)
            return max(0.0, float(self.sorted_values[rank - 1]))
        rank = min(max(rank, 1), self.sorted_values.size)
        return float(self.sorted_values[rank - 1])


@dataclass
class EmpiricalTransform:
    """Per-column transforms; discrete columns carry None."""

    columns: list

    def __getitem__(self, j):
        return self.columns[j]


def build_transforms(data):
    """Estimate the monotone transforms of continuous and truncated columns.

    Missing cells are ignored; a truncated column must have at least one
    positive value.
    """
    if data.n < 2:
        raise SgcrmError("transform estimation needs n >= 2")
    cols = []
    for j, spec in enumerate(data.schema):
        x = data.values[:, j]
        obs = x[~np.isnan(x)]
        if spec.type == CONTINUOUS:
            cols.append(ColumnTransform(CONTINUOUS, obs.size, np.sort(obs)))
        elif spec.type == TRUNCATED:
            pos = obs[obs > 0]
            if pos.size == 0:
                raise DegenerateColumnError(spec.name, "truncated column has no positive values")
            cols.append(ColumnTransform(TRUNCATED, obs.size, np.sort(pos),
                                        n_zero=int(np.sum(obs == 0))))
        else:
            cols.append(None)
    return EmpiricalTransform(columns=cols)


@dataclass
class LatentPrediction:
    """Predicted latent coordinates for one subject."""

    latent: np.ndarray
    truncated_cases: dict          # column index -> "zero" | "positive"
    method: str                    # "deterministic" | "gibbs"


def _box_for(col_type, value, cut):
    """Latent interval implied by one observed discrete value."""
    t = cut.thresholds
    if col_type == BINARY:
        return (t[0], np.inf) if value == 1 else (-np.inf, t[0])
    if col_type == TRUNCATED:
        return (-np.inf, t[0])
    level = int(value)
    lo = -np.inf if level == 0 else t[level - 1]
    hi = np.inf if level == cut.levels - 1 else t[level]
    return (lo, hi)


def _split_row(row, types, transforms, cuts, observed):
    """Classify coordinates: pinned latents vs boxed intervals."""
    pinned_idx, pinned_val = [], []
    boxed_idx, boxes, cases = [], [], {}
    for j in np.flatnonzero(observed):
        x = row[j]
        if types[j] == CONTINUOUS:
            pinned_idx.append(j)
            pinned_val.append(transforms[j].latent(x))
        elif types[j] == TRUNCATED:
            if x > 0:
                pinned_idx.append(j)
                pinned_val.append(transforms[j].latent(x))
                cases[j] = "positive"
            else:
                boxed_idx.append(j)
                boxes.append(_box_for(TRUNCATED, x, cuts[j]))
                cases[j] = "zero"
        else:
            boxed_idx.append(j)
            boxes.append(_box_for(types[j], x, cuts[j]))
    return pinned_idx, np.array(pinned_val), boxed_idx, boxes, cases


def _conditional_law(S, boxed, pinned):
    """Mean map and covariance of the boxed block given the pinned block."""
    B = S[np.ix_(boxed, boxed)]
    if not pinned:
        return np.zeros((len(boxed), 0)), B
    C = S[np.ix_(boxed, pinned)]
    P = S[np.ix_(pinned, pinned)]
    try:
        factor = cho_factor(P)
    except LinAlgError as exc:
        raise SingularityError(f"conditioning block is not positive definite: {exc}")
    W = cho_solve(factor, C.T).T
    cov = B - W @ C.T
    cov = 0.5 * (cov + cov.T)
    w, V = np.linalg.eigh(cov)
    if w.min() < _COV_EIG_FLOOR:
        cov = (V * np.maximum(w, _COV_EIG_FLOOR)) @ V.T
        cov = 0.5 * (cov + cov.T)
    return W, cov


def predict_latent(row, transforms, cuts, sigma, types=None):
    """E[L | X] for one complete observed row.

    Continuous coordinates are f-hat values; each truncated coordinate is
    pinned when positive and boxed below its cutoff when zero; ordinal and
    binary coordinates are boxed between their adjacent cutoffs.
    """
    S = sigma.sigma if hasattr(sigma, "sigma") else np.asarray(sigma, dtype=float)
    row = np.asarray(row, dtype=float).ravel()
    if types is None:
        types = [c.kind for c in cuts]
    if np.any(np.isnan(row)):
        raise SgcrmError("predict_latent requires a complete row; use impute_missing")
    observed = np.ones(row.size, dtype=bool)
    pinned_idx, pinned_val, boxed_idx, boxes, cases = _split_row(
        row, types, transforms, cuts, observed)
    latent = np.zeros(row.size)
    latent[pinned_idx] = pinned_val
    method = "deterministic"
    if boxed_idx:
        W, cov = _conditional_law(S, boxed_idx, pinned_idx)
        mean = W @ pinned_val if pinned_idx else np.zeros(len(boxed_idx))
        lo = np.array([b[0] for b in boxes])
        hi = np.array([b[1] for b in boxes])
        if len(boxed_idx) <= 4:
            latent[boxed_idx] = mvn.trunc_mvn_mean(lo, hi, mean, cov)
        else:
            method = "gibbs"
            latent[boxed_idx] = _gibbs_rows(S, row[None, :], [pinned_idx],
                                            [pinned_val], [boxed_idx], [boxes])[0]
    return LatentPrediction(latent=latent, truncated_cases=cases, method=method)


def _gibbs_rows(S, rows, pinned_idx, pinned_val, boxed_idx, boxes):
    """Shared-uniform Gibbs means of the boxed coordinates, one chain per row.

    Coordinates absent from both the pinned and boxed sets (missing cells
    during imputation) are sampled unconstrained, which marginalizes them out
    exactly.
    """
    B, p = rows.shape
    lower = np.full((B, p), -np.inf)
    upper = np.full((B, p), np.inf)
    start = np.zeros((B, p))
    update = np.ones((B, p), dtype=bool)
    for i in range(B):
        for j, v in zip(pinned_idx[i], pinned_val[i]):
            start[i, j] = v
            update[i, j] = False
        for j, (lo, hi) in zip(boxed_idx[i], boxes[i]):
            lower[i, j] = lo
            upper[i, j] = hi
            if np.isfinite(lo) and np.isfinite(hi):
                start[i, j] = 0.5 * (lo + hi)
            elif np.isfinite(lo):
                start[i, j] = lo + 0.5
            elif np.isfinite(hi):
                start[i, j] = hi - 0.5
            else:
                start[i, j] = 0.0
    means = mvn.gibbs_conditional_means(lower, upper, np.zeros((B, p)), S,
                                        update=update, start=start)
    return [means[i, boxed_idx[i]] for i in range(B)]


def predict_rows(data, transforms, cuts, sigma):
    """Latent predictions for every row of a complete dataset.

    Rows whose boxed block exceeds dimension 4 share one batched Gibbs pass;
    each chain only depends on its own row, so results match row-at-a-time
    calls bit for bit.
    """
    S = sigma.sigma if hasattr(sigma, "sigma") else np.asarray(sigma, dtype=float)
    types = data.types
    out = np.zeros_like(data.values)
    methods = [None] * data.n
    gibbs = {"rows": [], "pin_i": [], "pin_v": [], "box_i": [], "box_b": []}
    for i in range(data.n):
        row = data.values[i]
        if np.any(np.isnan(row)):
            raise SgcrmError(f"row {i} has missing cells; use impute_rows")
        pinned_idx, pinned_val, boxed_idx, boxes, _ = _split_row(
            row, types, transforms, cuts, np.ones(data.p, dtype=bool))
        out[i, pinned_idx] = pinned_val
        if not boxed_idx:
            methods[i] = "deterministic"
        elif len(boxed_idx) <= 4:
            W, cov = _conditional_law(S, boxed_idx, pinned_idx)
            mean = W @ pinned_val if pinned_idx else np.zeros(len(boxed_idx))
            lo = np.array([b[0] for b in boxes])
            hi = np.array([b[1] for b in boxes])
            out[i, boxed_idx] = mvn.trunc_mvn_mean(lo, hi, mean, cov)
            methods[i] = "deterministic"
        else:
            gibbs["rows"].append(i)
            gibbs["pin_i"].append(pinned_idx)
            gibbs["pin_v"].append(pinned_val)
            gibbs["box_i"].append(boxed_idx)
            gibbs["box_b"].append(boxes)
            methods[i] = "gibbs"
    if gibbs["rows"]:
        res = _gibbs_rows(S, data.values[gibbs["rows"]], gibbs["pin_i"],
                          gibbs["pin_v"], gibbs["box_i"], gibbs["box_b"])
        for i, boxed, vals in zip(gibbs["rows"], gibbs["box_i"], res):
            out[i, boxed] = vals
    return out, methods


def _back_transform(lhat, col_type, transform, cut):
    if col_type == CONTINUOUS:
        return transform.invert(lhat)
    if col_type == TRUNCATED:
        if lhat <= cut.thresholds[0]:
            return 0.0
        return transform.invert(lhat)
    if col_type == BINARY:
        return 1.0 if lhat > cut.thresholds[0] else 0.0
    return float(np.searchsorted(cut.thresholds, lhat, side="right"))


def _finish_impute(row, latent, obs_idx, mis_idx, S, transforms, cuts, types):
    """Propagate observed-coordinate latents to the missing block and
    back-transform to the observed scale."""
    try:
        factor = cho_factor(S[np.ix_(obs_idx, obs_idx)])
    except LinAlgError as exc:
        raise SingularityError(f"observed block is not positive definite: {exc}")
    latent[mis_idx] = (S[np.ix_(mis_idx, obs_idx)]
                       @ cho_solve(factor, latent[obs_idx]))
    completed = row.copy()
    for j in mis_idx:
        completed[j] = _back_transform(latent[j], types[j], transforms[j], cuts[j])
    return completed, latent


def impute_missing(row, transforms, cuts, sigma, types=None):
    """Impute one row's missing cells through the latent conditional mean.

    The observed coordinates are predicted exactly as in ``predict_latent``
    (the conditional law of boxed-given-pinned coordinates involves only their
    own submatrices, so missing coordinates never enter); the missing block is
    then the linear image S_MO S_OO^{-1} of the observed latent means, and the
    result is mapped back to the observed scale per column type.

    Returns (completed observed row, full latent mean vector).
    """
    S = sigma.sigma if hasattr(sigma, "sigma") else np.asarray(sigma, dtype=float)
    row = np.asarray(row, dtype=float).ravel()
    if types is None:
        types = [c.kind for c in cuts]
    observed = ~np.isnan(row)
    if not observed.any():
        raise AllMissingError("row has no observed cells")

    pinned_idx, pinned_val, boxed_idx, boxes, _ = _split_row(
        row, types, transforms, cuts, observed)
    latent = np.zeros(row.size)
    latent[pinned_idx] = pinned_val
    if boxed_idx:
        if len(boxed_idx) <= 4:
            W, cov = _conditional_law(S, boxed_idx, pinned_idx)
            mean = W @ pinned_val if pinned_idx else np.zeros(len(boxed_idx))
            lo = np.array([b[0] for b in boxes])
            hi = np.array([b[1] for b in boxes])
            latent[boxed_idx] = mvn.trunc_mvn_mean(lo, hi, mean, cov)
        else:
            # Gibbs over the full vector with missing coordinates sampled
            # unconstrained, which integrates them out exactly
            latent[boxed_idx] = _gibbs_rows(S, row[None, :], [pinned_idx],
                                            [pinned_val], [boxed_idx], [boxes])[0]
    if observed.all():
        return row.copy(), latent
    return _finish_impute(row, latent, np.flatnonzero(observed),
                          np.flatnonzero(~observed), S, transforms, cuts, types)


def impute_rows(data, transforms, cuts, sigma):
    """Impute every incomplete row of a dataset.

    Rows needing the stochastic path share one batched Gibbs pass (results
    are row-independent by construction).

    Returns (completed values, latent means, list of imputed (row, col) cells).
    """
    S = sigma.sigma if hasattr(sigma, "sigma") else np.asarray(sigma, dtype=float)
    types = data.types
    completed = data.values.copy()
    latents = np.zeros_like(data.values)
    cells = []
    gibbs = {"rows": [], "pin_i": [], "pin_v": [], "box_i": [], "box_b": []}
    for i in range(data.n):
        row = data.values[i]
        observed = ~np.isnan(row)
        if not observed.any():
            raise AllMissingError(f"row {i} has no observed cells")
        pinned_idx, pinned_val, boxed_idx, boxes, _ = _split_row(
            row, types, transforms, cuts, observed)
        latents[i, pinned_idx] = pinned_val
        if boxed_idx and len(boxed_idx) <= 4:
            W, cov = _conditional_law(S, boxed_idx, pinned_idx)
            mean = W @ pinned_val if pinned_idx else np.zeros(len(boxed_idx))
            lo = np.array([b[0] for b in boxes])
            hi = np.array([b[1] for b in boxes])
            latents[i, boxed_idx] = mvn.trunc_mvn_mean(lo, hi, mean, cov)
        elif boxed_idx:
            gibbs["rows"].append(i)
            gibbs["pin_i"].append(pinned_idx)
            gibbs["pin_v"].append(pinned_val)
            gibbs["box_i"].append(boxed_idx)
            gibbs["box_b"].append(boxes)
    if gibbs["rows"]:
        res = _gibbs_rows(S, data.values[gibbs["rows"]], gibbs["pin_i"],
                          gibbs["pin_v"], gibbs["box_i"], gibbs["box_b"])
        for i, boxed, vals in zip(gibbs["rows"], gibbs["box_i"], res):
            latents[i, boxed] = vals
    for i in range(data.n):
        row = data.values[i]
        observed = ~np.isnan(row)
        if observed.all():
            continue
        completed[i], latents[i] = _finish_impute(
            row, latents[i], np.flatnonzero(observed), np.flatnonzero(~observed),
            S, transforms, cuts, types)
        for j in np.flatnonzero(~observed):
            cells.append((i, int(j)))
    return completed, latents, cells
