"""Sample Kendall's tau (tau-a) and the O(n^2) estimator of its asymptotic covariance.

tau-a counts concordant minus discordant pairs over all C(n,2) pairs; tied
pairs contribute zero and no tie correction is applied, because the bridging
functions are derived for exactly this population functional.  The matrix
version runs in O(n log n) per pair via merge-sort inversion counting and is
exactly equal (same integer numerator) to the quadratic-time definition.
"""

from dataclasses import dataclass

import numpy as np

from .exceptions import InsufficientSampleError, LengthMismatchError

# lower-triangle pairs (j, k), j > k, enumerated row by row:
# (1,0), (2,0), (2,1), (3,0), ...  This single ordering convention is shared
# by the Kendall covariance, the latent-correlation delta method and the
# regression Jacobian.


def pair_order(p):
    """Ordered (row, col) lower-triangle index pairs."""
    rows, cols = np.tril_indices(p, -1)
    return list(zip(rows.tolist(), cols.tolist()))


@dataclass
class KendallResult:
    """Pairwise tau-a matrix with unit diagonal."""

    tau: np.ndarray
    n: int

    @property
    def p(self):
        return self.tau.shape[0]


@dataclass
class KendallCovariance:
    """Asymptotic covariance of sqrt(n) * vecl(tau-hat), in pair_order."""

    matrix: np.ndarray

    @property
    def dim(self):
        return self.matrix.shape[0]


def _inversions(values):
    """Number of strictly decreasing pairs (i < j, v_i > v_j), O(n log n)."""
    a = np.asarray(values)

    def rec(a):
        if a.size <= 32:
            # quadratic on tiny blocks; cheaper than recursing further
            cnt = 0
            for i in range(1, a.size):
                cnt += int(np.sum(a[:i] > a[i]))
            return np.sort(a, kind="stable"), cnt
        mid = a.size // 2
        left, cl = rec(a[:mid])
        right, cr = rec(a[mid:])
        pos = np.searchsorted(left, right, side="right")
        cross = int((left.size - pos).sum())
        merged = np.concatenate((left, right))
        merged.sort(kind="stable")
        return merged, cl + cr + cross

    return rec(a)[1]


def _tie_pairs(sorted_vals):
    """Sum of C(t, 2) over runs of equal values in a sorted array."""
    if sorted_vals.size == 0:
        return 0
    change = np.flatnonzero(np.diff(sorted_vals) != 0)
    runs = np.diff(np.concatenate(([0], change + 1, [sorted_vals.size])))
    return int((runs * (runs - 1) // 2).sum())


def _tau_numerator(x, y):
    """Concordant minus discordant count (integer), Knight's algorithm."""
    n = x.size
    order = np.lexsort((y, x))
    xs = x[order]
    ys = y[order]
    # within equal-x runs y is nondecreasing, so strict y-inversions count
    # exactly the discordant pairs
    discordant = _inversions(ys)
    n0 = n * (n - 1) // 2
    n1 = _tie_pairs(xs)
    n2 = _tie_pairs(np.sort(y, kind="stable"))
    if n > 1:
        same = (np.diff(xs) == 0) & (np.diff(ys) == 0)
        runs = np.diff(np.concatenate(([0], np.flatnonzero(~same) + 1, [n])))
        n3 = int((runs * (runs - 1) // 2).sum())
    else:
        n3 = 0
    return n0 - n1 - n2 + n3 - 2 * discordant


def tau_pair(x, y):
    """Sample Kendall's tau-a of two equal-length vectors.

    Exactly equals the average of sgn((x_i - x_j)(y_i - y_j)) over all pairs
    i < j; ties contribute zero.
    """
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size != y.size:
        raise LengthMismatchError(f"length mismatch: {x.size} vs {y.size}")
    if x.size < 2:
        raise InsufficientSampleError("tau needs at least 2 observations")
    n0 = x.size * (x.size - 1) // 2
    return _tau_numerator(x, y) / n0


def tau_matrix(data):
    """Pairwise tau-a matrix of a dataset.

    Accepts a MixedDataset or a plain (n, p) array.  Missing cells (NaN) are
    handled pairwise: each entry uses the rows complete in both columns.
    """
    values = np.asarray(getattr(data, "values", data), dtype=float)
    n, p = values.shape
    if n < 2:
        raise InsufficientSampleError("tau matrix needs at least 2 rows")
    tau = np.eye(p)
    for j, k in pair_order(p):
        ok = ~(np.isnan(values[:, j]) | np.isnan(values[:, k]))
        tau[j, k] = tau[k, j] = tau_pair(values[ok, j], values[ok, k])
    return KendallResult(tau=tau, n=n)


def h_function(x, y, a, b):
    """Empirical H estimate: mean of sgn((x_i - a)(y_i - b))."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    return float(np.mean(np.sign(x - a) * np.sign(y - b)))


def _h_profile(x, y):
    """H evaluated at every sample point: H_m = h_function(x, y, x_m, y_m).

    Tie-free columns use 2-d dominance counting in O(n log n); the integer
    identity  sum_i sgn(x_i - x_m) sgn(y_i - y_m) = 4 A_m - 2 r_m - 2 s_m + n - 1
    (A_m dominated points, r_m/s_m coordinate ranks) makes the fast path
    bit-identical to direct summation.  Columns with ties fall back to
    blockwise direct summation, O(n^2) with small constants.
    """
    n = x.size
    if np.unique(x).size == n and np.unique(y).size == n:
        order = np.argsort(x, kind="stable")
        yr = np.argsort(np.argsort(y[order], kind="stable"), kind="stable")
        counts = np.zeros(n, dtype=np.int64)

        def rec(idx):
            if idx.size <= 1:
                return np.sort(yr[idx], kind="stable")
            mid = idx.size // 2
            left = rec(idx[:mid])
            right_idx = idx[mid:]
            counts[right_idx] += np.searchsorted(left, yr[right_idx], side="left")
            right = rec(right_idx)
            merged = np.concatenate((left, right))
            merged.sort(kind="stable")
            return merged

        rec(np.arange(n))
        a_m = np.empty(n, dtype=np.int64)
        a_m[order] = counts
        rx = np.argsort(np.argsort(x, kind="stable"), kind="stable")
        ry = np.argsort(np.argsort(y, kind="stable"), kind="stable")
        total = 4 * a_m - 2 * rx - 2 * ry + (n - 1)
        return total / n

    out = np.empty(n)
    block = max(1, int(4_000_000 // max(n, 1)))
    for start in range(0, n, block):
        stop = min(start + block, n)
        sx = np.sign(x[None, :] - x[start:stop, None])
        sy = np.sign(y[None, :] - y[start:stop, None])
        out[start:stop] = np.einsum("ij,ij->i", sx, sy) / n
    return out


def vk_hat(data):
    """O(n^2) estimator of the asymptotic covariance of sqrt(n) * vecl(tau-hat).

    Entry ((j,k),(l,m)) is
    4 * ( mean_r H_jk(X_jr, X_kr) * H_lm(X_lr, X_mr) - tau_jk * tau_lm ),
    with the H profiles cached per pair.  Rows with any missing cell are
    dropped (the estimator needs jointly complete rows).
    """
    values = np.asarray(getattr(data, "values", data), dtype=float)
    complete = ~np.isnan(values).any(axis=1)
    values = values[complete]
    n, p = values.shape
    if n < 3:
        raise InsufficientSampleError("covariance estimator needs n >= 3 complete rows")
    pairs = pair_order(p)
    npairs = len(pairs)
    profiles = np.empty((npairs, n))
    taus = np.empty(npairs)
    for idx, (j, k) in enumerate(pairs):
        profiles[idx] = _h_profile(values[:, j], values[:, k])
        taus[idx] = tau_pair(values[:, j], values[:, k])
    cross = profiles @ profiles.T / n
    vk = 4.0 * (cross - np.outer(taus, taus))
    vk = 0.5 * (vk + vk.T)
    return KendallCovariance(matrix=vk)
