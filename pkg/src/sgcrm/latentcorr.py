"""Latent correlation assembly (pairwise bridge inversion) and nearest-PD projection.

The bridged matrix is built entrywise by inverting each pair's bridging
function at the sample tau; nothing guarantees the result is positive
definite, so a second step projects it to the nearest correlation matrix by
alternating projections with Dykstra's correction (eigenvalue clipping onto
the PSD cone, unit-diagonal restoration).
"""

from dataclasses import dataclass, field

import numpy as np

from . import bridge
from .exceptions import NonConvergenceError, SgcrmError
from .kendall import pair_order

PD_FLOOR = 1e-8


@dataclass
class LatentCorrelation:
    """Estimated latent correlation matrix with estimation provenance."""

    sigma: np.ndarray
    saturated_pairs: list = field(default_factory=list)
    projected: bool = False
    min_eigenvalue: float = float("nan")

    @property
    def p(self):
        return self.sigma.shape[0]


def bridge_matrix(tau, cuts, types):
    """Invert the bridging function for every pair of columns.

    Parameters
    ----------
    tau : KendallResult
        Pairwise sample Kendall's tau.
    cuts : CutoffSet
        Estimated thresholds per column.
    types : sequence of str
        Column types aligned with the tau matrix.

    Returns
    -------
    LatentCorrelation
        Raw (unprojected) matrix with per-pair saturation flags.
    """
    p = tau.p
    if len(cuts) != p or len(types) != p:
        raise SgcrmError("tau matrix, cutoffs and types disagree in dimension")
    sigma = np.eye(p)
    saturated = []
    for j, k in pair_order(p):
        kind, swap = bridge.kind_of(types[j], types[k])
        cj, ck = (cuts[k], cuts[j]) if swap else (cuts[j], cuts[k])
        try:
            r = bridge.inverse(kind, tau.tau[j, k], cj, ck)
        except SgcrmError as exc:
            raise type(exc)(f"pair ({j}, {k}) [{types[j]}/{types[k]}]: {exc}") from exc
        sigma[j, k] = sigma[k, j] = float(r)
        if r.saturated:
            saturated.append((j, k))
    eig = np.linalg.eigvalsh(sigma) if p > 1 else np.array([1.0])
    return LatentCorrelation(sigma=sigma, saturated_pairs=saturated,
                             projected=False, min_eigenvalue=float(eig.min()))


def nearest_pd(raw, pd_floor=PD_FLOOR, tol=1e-9, max_iter=200):
    """Project onto the nearest positive-definite correlation matrix.

    Alternating projections with Dykstra's correction: clip eigenvalues at
    ``pd_floor``, restore the unit diagonal, repeat until the Frobenius
    change is below ``tol``.  Already-PD input is returned unchanged (fixed
    point), which also makes the operation idempotent.
    """
    A = np.array(raw.sigma if isinstance(raw, LatentCorrelation) else raw, dtype=float)
    if not np.allclose(A, A.T, atol=1e-10) or not np.allclose(np.diag(A), 1.0, atol=1e-10):
        raise SgcrmError("nearest_pd expects a symmetric unit-diagonal matrix")
    sat = list(raw.saturated_pairs) if isinstance(raw, LatentCorrelation) else []
    eig = np.linalg.eigvalsh(0.5 * (A + A.T))
    if eig.min() >= pd_floor:
        # already positive definite: exact fixed point
        return LatentCorrelation(sigma=A, saturated_pairs=sat,
                                 projected=True, min_eigenvalue=float(eig.min()))

    Y = 0.5 * (A + A.T)
    ds = np.zeros_like(A)
    prev = Y.copy()
    for _ in range(max_iter):
        R = Y - ds
        w, V = np.linalg.eigh(0.5 * (R + R.T))
        X = (V * np.maximum(w, pd_floor)) @ V.T
        X = 0.5 * (X + X.T)
        ds = X - R
        Y = X.copy()
        np.fill_diagonal(Y, 1.0)
        change = np.linalg.norm(Y - prev)
        prev = Y.copy()
        if change <= tol:
            break
    else:
        raise NonConvergenceError(
            f"nearest-PD projection did not converge in {max_iter} iterations",
            residual=float(change))

    # final clean-up: the diagonal restoration can nudge the smallest
    # eigenvalue below the floor by ~tol; one last clip keeps Cholesky safe
    w, V = np.linalg.eigh(Y)
    if w.min() < pd_floor:
        Y = (V * np.maximum(w, pd_floor)) @ V.T
        d = np.sqrt(np.diag(Y))
        Y = Y / np.outer(d, d)
        w = np.linalg.eigvalsh(Y)
    Y = 0.5 * (Y + Y.T)
    np.fill_diagonal(Y, 1.0)
    Y = np.clip(Y, -1.0, 1.0)
    return LatentCorrelation(sigma=Y, saturated_pairs=sat,
                             projected=True, min_eigenvalue=float(w.min()))


def estimate_latent_correlation(data, project=True):
    """Full pipeline: tau matrix, cutoffs, bridging, optional projection."""
    from .cutoffs import estimate_cutoffs
    from .kendall import tau_matrix

    tau = tau_matrix(data)
    cuts = estimate_cutoffs(data)
    raw = bridge_matrix(tau, cuts, data.types)
    return (nearest_pd(raw) if project else raw), tau, cuts
