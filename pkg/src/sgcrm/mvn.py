"""Deterministic multivariate normal CDFs (dims 1-4) and truncated-MVN first moments.

Every bridging function and every latent prediction reduces to the handful of
primitives in this module, so evaluations must be smooth in their arguments,
reproducible bit-for-bit, and reasonably fast.  Bivariate probabilities use the
single-integral Drezner-Wesolowsky form evaluated with fixed Gauss-Legendre
rules; tri- and quadrivariate probabilities integrate the conditional bivariate
law over fixed composite Gauss-Legendre panels.  No randomness is involved for
dimensions up to 4; above 4 the truncated mean falls back to a seeded Gibbs
sampler and is documented as stochastic.
"""

import math

import numpy as np
from scipy.special import ndtr, ndtri

from .exceptions import DegenerateRegionError, DomainError, NumericalError

# off-diagonal correlations are clamped to +-RHO_CLAMP before CDF evaluation so
# root finding near the bracket edges never conditions on a singular matrix
RHO_CLAMP = 1.0 - 1e-9
PSD_TOL = -1e-10
# integration beyond |z| = 8.5 contributes < 1e-17 and is dropped
_ZMAX = 8.5

GIBBS_SEED = 20240001
GIBBS_SWEEPS = 100_000
GIBBS_BURN = 1_000

_SQRT2PI = math.sqrt(2.0 * math.pi)

# fixed quadrature rules; generated once so repeated calls are bit-identical
_BVN_X, _BVN_W = np.polynomial.legendre.leggauss(20)
_GL_X, _GL_W = np.polynomial.legendre.leggauss(14)
_PANEL_WIDTH = 1.0  # target panel length for the composite outer integrals
_QVN_INNER_PANELS = 10  # inner panels of the 4-dim reduction span [-ZMAX, u(z)]


def phi(x):
    """Standard normal CDF; accepts +-inf and arrays."""
    return ndtr(x)


def norm_pdf(x):
    """Standard normal density."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x) / _SQRT2PI


def phi_inv(p):
    """Inverse standard normal CDF on the open interval (0, 1).

    Raises
    ------
    DomainError
        If any entry of ``p`` lies outside (0, 1).
    """
    arr = np.asarray(p, dtype=float)
    if np.any(arr <= 0.0) or np.any(arr >= 1.0):
        raise DomainError(f"phi_inv requires 0 < p < 1, got {p!r}")
    out = ndtri(arr)
    return float(out) if np.isscalar(p) or arr.ndim == 0 else out


def _as_corr(corr, max_dim=4):
    """Validate a small correlation matrix (symmetry, unit diagonal, PSD)."""
    r = np.array(corr, dtype=float)
    if r.ndim != 2 or r.shape[0] != r.shape[1]:
        raise NumericalError(f"correlation matrix must be square, got shape {r.shape}")
    d = r.shape[0]
    if not 1 <= d <= max_dim:
        raise NumericalError(f"dimension {d} outside supported range 1..{max_dim}")
    if not np.allclose(r, r.T, atol=1e-10):
        raise NumericalError("correlation matrix is not symmetric")
    if not np.allclose(np.diag(r), 1.0, atol=1e-10):
        raise NumericalError("correlation matrix must have unit diagonal")
    off = r - np.eye(d)
    if np.any(np.abs(off) > 1.0 + 1e-9):
        raise NumericalError("off-diagonal correlation outside [-1, 1]")
    r = 0.5 * (r + r.T)
    np.fill_diagonal(r, 1.0)
    if d > 1 and np.linalg.eigvalsh(np.clip(r, -1.0, 1.0)).min() < PSD_TOL:
        raise NumericalError("correlation matrix is not positive semi-definite")
    return r


def _bvn_upper(h, k, r):
    """P(X > h, Y > k) for a standard bivariate normal with correlation ``r``.

    Vectorized over ``h`` and ``k`` (``r`` is scalar).  Port of the classic
    Drezner-Wesolowsky/Genz algorithm with fixed 20-point Gauss-Legendre
    nodes; absolute accuracy is ~5e-16 away from |r| = 1.
    """
    h, k = np.broadcast_arrays(np.asarray(h, dtype=float), np.asarray(k, dtype=float))
    h = h.astype(float, copy=True).ravel()
    k = k.astype(float, copy=True).ravel()
    r = float(r)

    if r >= 1.0:
        out = ndtr(-np.maximum(h, k))
    elif r <= -1.0:
        out = np.maximum(0.0, ndtr(-h) - ndtr(k))
    elif r == 0.0:
        out = ndtr(-h) * ndtr(-k)
    elif abs(r) < 0.925:
        hk = h * k
        hs = 0.5 * (h * h + k * k)
        asr = math.asin(r)
        sn = np.sin(asr * 0.5 * (_BVN_X + 1.0))
        with np.errstate(under="ignore"):
            vals = np.exp((np.outer(sn, hk) - hs[None, :]) / (1.0 - sn * sn)[:, None])
        out = _BVN_W @ vals * (asr / (4.0 * math.pi)) + ndtr(-h) * ndtr(-k)
    else:
        # expansion about |r| = 1, Drezner-Wesolowsky second branch
        k2 = -k if r < 0.0 else k
        hk = h * k2
        ass = (1.0 - r) * (1.0 + r)
        a = math.sqrt(ass)
        bs = (h - k2) ** 2
        c = (4.0 - hk) / 8.0
        d = (12.0 - hk) / 16.0
        asr0 = -(bs / ass + hk) / 2.0
        with np.errstate(under="ignore", over="ignore", invalid="ignore"):
            t1 = a * np.exp(asr0) * (1.0 - c * (bs - ass) * (1.0 - d * bs / 5.0) / 3.0
                                     + c * d * ass * ass / 5.0)
            bvn = np.where(asr0 > -100.0, t1, 0.0)
            b = np.sqrt(bs)
            t2 = (np.exp(-hk / 2.0) * _SQRT2PI * ndtr(-b / a) * b
                  * (1.0 - c * bs * (1.0 - d * bs / 5.0) / 3.0))
            bvn = bvn - np.where(-hk < 100.0, t2, 0.0)
            a2 = a / 2.0
            xs = (a2 * (_BVN_X + 1.0)) ** 2
            rs = np.sqrt(1.0 - xs)
            asrn = -(bs[None, :] / xs[:, None] + hk[None, :]) / 2.0
            ep = np.exp(-hk[None, :] * (1.0 - rs[:, None]) / (2.0 * (1.0 + rs[:, None])))
            ep = ep / rs[:, None]
            sp = (1.0 + c[None, :] * xs[:, None] * (1.0 + d[None, :] * xs[:, None]))
            terms = np.where(asrn > -100.0, np.exp(asrn) * (ep - sp), 0.0)
            bvn = bvn + a2 * (_BVN_W @ terms)
        bvn = -bvn / (2.0 * math.pi)
        if r > 0.0:
            out = bvn + ndtr(-np.maximum(h, k2))
        else:
            out = -bvn + np.maximum(0.0, ndtr(-h) - ndtr(-k2))
    return np.clip(out, 0.0, 1.0).reshape(-1)


def _bvn_cdf(a, b, r):
    """P(X <= a, Y <= b), vectorized over a, b with scalar correlation."""
    return _bvn_upper(-np.asarray(a, dtype=float), -np.asarray(b, dtype=float), r)


def _panels(lo, hi, width=None, cap=150):
    """Composite Gauss-Legendre nodes/weights on [lo, hi] with ~unit panels."""
    if width is None:
        width = _PANEL_WIDTH
    n_panels = min(cap, max(2, int(math.ceil((hi - lo) / width))))
    edges = np.linspace(lo, hi, n_panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    x = (mid[:, None] + half[:, None] * _GL_X[None, :]).ravel()
    w = (half[:, None] * _GL_W[None, :]).ravel()
    return x, w


def _cond_pair(R, i1, i2, given):
    """Conditional 2x2 law of (i1, i2) given the coordinates in ``given``.

    Returns slope matrix K (2 x len(given)), conditional standard deviations
    and the conditional correlation, clamped away from +-1.
    """
    idx = np.array([i1, i2])
    g = np.array(given)
    C = R[np.ix_(g, g)]
    A = R[np.ix_(idx, g)]
    K = A @ np.linalg.inv(C)
    V = R[np.ix_(idx, idx)] - K @ A.T
    s1 = math.sqrt(max(V[0, 0], 1e-18))
    s2 = math.sqrt(max(V[1, 1], 1e-18))
    rc = max(-RHO_CLAMP, min(RHO_CLAMP, V[0, 1] / (s1 * s2)))
    return K, s1, s2, rc


def _tvn_cdf(b, R):
    """Trivariate CDF by integrating the conditional bivariate law.

    The integrated coordinate is the one least correlated with the others so
    the conditional limits vary slowly along the integration axis; when even
    that coordinate is strongly correlated the panels are refined in
    proportion to the conditional steepness.
    """
    steep = [max(abs(R[i, j]) for j in range(3) if j != i) for i in range(3)]
    i3 = int(np.argmin(steep))
    i1, i2 = (j for j in range(3) if j != i3)
    b1, b2, b3 = b[i1], b[i2], b[i3]
    r13, r23 = R[i1, i3], R[i2, i3]
    s1 = math.sqrt(max(1.0 - r13 * r13, 1e-18))
    s2 = math.sqrt(max(1.0 - r23 * r23, 1e-18))
    rc = max(-RHO_CLAMP, min(RHO_CLAMP, (R[i1, i2] - r13 * r23) / (s1 * s2)))
    hi = min(b3, _ZMAX)
    if hi <= -_ZMAX:
        return 0.0
    slope = max(abs(r13) / s1, abs(r23) / s2)
    width = _PANEL_WIDTH / max(1.0, slope / 2.0)
    z, w = _panels(-_ZMAX, hi, width)
    c1 = (b1 - r13 * z) / s1
    c2 = (b2 - r23 * z) / s2
    vals = _bvn_cdf(c1, c2, rc)
    return float(np.clip(np.dot(w * norm_pdf(z), vals), 0.0, 1.0))


def _qvn_cdf(b, R):
    """Quadrivariate CDF by a double integral over the conditional bivariate law.

    The two integrated coordinates are the least-correlated pair, which keeps
    the conditional slope matrix bounded; panels refine deterministically with
    the worst conditional steepness so near-singular matrices (bridging
    matrices evaluated at |rho| -> 1) stay accurate.
    """
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    i3, i4 = min(pairs, key=lambda p: abs(R[p[0], p[1]]))
    i1, i2 = (j for j in range(4) if j not in (i3, i4))
    b1, b2, b3, b4 = b[i1], b[i2], b[i3], b[i4]
    r34 = R[i3, i4]
    s34 = math.sqrt(max(1.0 - r34 * r34, 1e-18))
    K, s1, s2, rc = _cond_pair(R, i1, i2, (i3, i4))

    hi4 = min(b4, _ZMAX)
    if hi4 <= -_ZMAX:
        return 0.0
    slope_u = max(abs(K[0, 0]) * s34 / s1, abs(K[1, 0]) * s34 / s2)
    slope_z = max(abs(K[0, 0] * r34 + K[0, 1]) / s1,
                  abs(K[1, 0] * r34 + K[1, 1]) / s2,
                  abs(r34) / s34)
    refine_out = max(1.0, slope_z / 2.0)
    refine_in = max(1.0, slope_u / 2.0)
    z4, w4 = _panels(-_ZMAX, hi4, _PANEL_WIDTH / refine_out, cap=80)

    # inner (standardized) upper limits depend on the outer node
    u_hi = np.minimum((b3 - r34 * z4) / s34, _ZMAX)
    alive = u_hi > -_ZMAX
    if not np.any(alive):
        return 0.0
    z4 = z4[alive]
    w4 = w4[alive]
    u_hi = u_hi[alive]
    n_out = z4.size

    n_inner = min(int(math.ceil(_QVN_INNER_PANELS * refine_in)), 48)
    m = n_inner * _GL_X.size
    edges = np.linspace(np.full(n_out, -_ZMAX), u_hi, n_inner + 1, axis=1)
    half = 0.5 * np.diff(edges, axis=1)
    mid = 0.5 * (edges[:, :-1] + edges[:, 1:])
    u = (mid[:, :, None] + half[:, :, None] * _GL_X[None, None, :]).reshape(n_out, m)
    wu = (half[:, :, None] * _GL_W[None, None, :]).reshape(n_out, m)

    z3 = r34 * z4[:, None] + s34 * u
    c1 = (b1 - K[0, 0] * z3 - K[0, 1] * z4[:, None]) / s1
    c2 = (b2 - K[1, 0] * z3 - K[1, 1] * z4[:, None]) / s2
    vals = _bvn_cdf(c1.ravel(), c2.ravel(), rc).reshape(n_out, m)
    inner = np.einsum("ij,ij->i", wu * norm_pdf(u), vals)
    return float(np.clip(np.dot(w4 * norm_pdf(z4), inner), 0.0, 1.0))


_MERGE_TOL = 1.0 - 1e-8


def _cdf_dispatch(b, R, merge_tol=None):
    """CDF after validation: marginalize infinities, analytically collapse
    near-perfectly correlated pairs, clamp the rest, then integrate."""
    if merge_tol is None:
        merge_tol = _MERGE_TOL
    if np.any(b == -np.inf):
        return 0.0
    finite = b < np.inf
    if not np.any(finite):
        return 1.0
    b = b[finite]
    R = R[np.ix_(finite, finite)]
    d = b.size
    if d == 1:
        return float(ndtr(b[0]))

    # |r| close enough to 1 means the two coordinates are (anti)comonotone to
    # within the accuracy target; reduce the dimension instead of integrating
    # across a near-singular conditional law
    for i in range(d - 1):
        for j in range(i + 1, d):
            if R[i, j] >= merge_tol:
                keep = [k for k in range(d) if k != j]
                b2 = b[keep].copy()
                b2[keep.index(i)] = min(b[i], b[j])
                return _cdf_dispatch(b2, R[np.ix_(keep, keep)], merge_tol)
            if R[i, j] <= -merge_tol:
                if -b[j] >= b[i]:
                    return 0.0
                keep = [k for k in range(d) if k != j]
                Rk = R[np.ix_(keep, keep)]
                hi_b = b[keep].copy()
                lo_b = hi_b.copy()
                lo_b[keep.index(i)] = -b[j]
                return max(0.0, _cdf_dispatch(hi_b, Rk, merge_tol)
                           - _cdf_dispatch(lo_b, Rk, merge_tol))

    R = np.clip(R, -RHO_CLAMP, RHO_CLAMP)
    np.fill_diagonal(R, 1.0)
    if d == 2:
        return float(_bvn_cdf(b[0], b[1], R[0, 1])[0])
    if d == 3:
        return _tvn_cdf(b, R)
    return _qvn_cdf(b, R)


def mvn_cdf(upper, corr, merge_tol=None):
    """CDF of a standard multivariate normal in dimension 1..4.

    Parameters
    ----------
    upper : array-like of extended reals
        Upper integration limits; +-inf allowed.
    corr : array-like
        Correlation matrix matching ``upper`` in dimension.
    merge_tol : float, optional
        Correlations at or above this value are treated as exactly +-1 and the
        pair collapsed analytically.  Callers that evaluate at deliberately
        saturated correlations lower it to trade ~1e-4 accuracy for speed.

    Returns
    -------
    float
        P(Z_1 <= upper_1, ..., Z_d <= upper_d), deterministic across calls.
    """
    b = np.asarray(upper, dtype=float).ravel()
    R = _as_corr(corr)
    if b.size != R.shape[0]:
        raise NumericalError(f"limit vector length {b.size} != matrix dim {R.shape[0]}")
    if np.any(np.isnan(b)):
        raise NumericalError("NaN integration limit")
    return _cdf_dispatch(b, R, merge_tol)


def rect_prob(lower, upper, corr):
    """Probability of the hyper-rectangle {lower < Z < upper} in dim <= 4.

    Inclusion-exclusion over ``mvn_cdf`` corner evaluations; corners with any
    -inf coordinate vanish, so only finite lower bounds are enumerated.
    """
    lo = np.asarray(lower, dtype=float).ravel()
    hi = np.asarray(upper, dtype=float).ravel()
    if lo.size != hi.size:
        raise NumericalError("box bounds have different lengths")
    if np.any(lo >= hi):
        raise NumericalError("box requires lower < upper elementwise")
    R = _as_corr(corr)
    fin = np.flatnonzero(np.isfinite(lo))
    total = 0.0
    for mask in range(1 << fin.size):
        corner = hi.copy()
        sign = 1.0
        for j in range(fin.size):
            if mask >> j & 1:
                corner[fin[j]] = lo[fin[j]]
                sign = -sign
        total += sign * mvn_cdf(corner, R)
    return min(1.0, max(0.0, total))


def _rect_prob_general(lower, upper, cov):
    """Rectangle probability for N(0, cov) by standardizing to a correlation."""
    sd = np.sqrt(np.maximum(np.diag(cov), 1e-18))
    corr = cov / np.outer(sd, sd)
    np.fill_diagonal(corr, 1.0)
    return rect_prob(np.asarray(lower) / sd, np.asarray(upper) / sd, corr)


def _validate_box(lower, upper, dim):
    lo = np.asarray(lower, dtype=float).ravel()
    hi = np.asarray(upper, dtype=float).ravel()
    if lo.size != dim or hi.size != dim:
        raise NumericalError("box dimension does not match mean dimension")
    if np.any(lo >= hi):
        raise NumericalError("box requires lower < upper elementwise")
    return lo, hi


def trunc_mvn_mean(lower, upper, mean, cov):
    """E[W | lower < W < upper] for W ~ N(mean, cov).

    Dimensions up to 4 use the deterministic reduction to boundary integrals
    (each boundary term is a (d-1)-dimensional rectangle probability of the
    conditional law); higher dimensions fall back to a seeded Gibbs sampler
    with ``GIBBS_SWEEPS`` averaged sweeps, which is stochastic but fixed-seed
    reproducible.

    Raises
    ------
    DegenerateRegionError
        If the box probability is <= 1e-12.
    """
    mu = np.asarray(mean, dtype=float).ravel()
    S = np.asarray(cov, dtype=float)
    d = mu.size
    if S.shape != (d, d):
        raise NumericalError(f"covariance shape {S.shape} does not match mean length {d}")
    lo, hi = _validate_box(lower, upper, d)
    a = lo - mu
    b = hi - mu

    if d <= 4:
        alpha = _rect_prob_general(a, b, S)
    else:
        # exact mass is unavailable above dim 4; the smallest marginal mass is
        # an upper bound on it and catches boxes pushed into the far tail
        sd = np.sqrt(np.diag(S))
        alpha = float(np.min(ndtr(b / sd) - ndtr(a / sd)))
    if alpha <= 1e-12:
        raise DegenerateRegionError(
            f"truncation region has probability {alpha:.3e} <= 1e-12")

    if d == 1:
        s = math.sqrt(S[0, 0])
        za, zb = a[0] / s, b[0] / s
        num = norm_pdf(za) - norm_pdf(zb)
        out = mu + s * num / alpha
        return np.clip(out, lo, hi)

    if d <= 4:
        e = np.zeros(d)
        for k in range(d):
            skk = S[k, k]
            sk = math.sqrt(skk)
            rest = [j for j in range(d) if j != k]
            Srk = S[np.ix_(rest, [k])].ravel()
            Scond = S[np.ix_(rest, rest)] - np.outer(Srk, Srk) / skk
            Scond = 0.5 * (Scond + Scond.T)
            for x, sign in ((a[k], 1.0), (b[k], -1.0)):
                if not np.isfinite(x):
                    continue
                dens = norm_pdf(x / sk) / sk
                if dens == 0.0:
                    continue
                cm = Srk * x / skk
                fk = _rect_prob_general(a[rest] - cm, b[rest] - cm, Scond)
                e[k] += sign * dens * fk
        out = mu + S @ e / alpha
        return np.clip(out, lo, hi)

    means = gibbs_conditional_means(
        lo[None, :], hi[None, :], mu[None, :], S,
        update=np.ones((1, d), dtype=bool), start=None)
    return np.clip(means[0], lo, hi)


def gibbs_conditional_means(lower, upper, mean, cov, update, start=None,
                            seed=GIBBS_SEED, sweeps=GIBBS_SWEEPS, burn=GIBBS_BURN):
    """Rao-Blackwellized Gibbs estimate of E[W | W in box] per row.

    Runs one chain per row of ``lower``/``upper``/``mean``; all chains share
    the same covariance ``cov`` and the same fixed uniform stream, so a row's
    result does not depend on which other rows are in the batch.  Coordinates
    with ``update`` false are held at their ``start`` (or mean) value and act
    as conditioning values, which lets callers condition and truncate with a
    single shared precision matrix.

    Stochastic but reproducible: the uniform stream is a counter-based Philox
    generator with a fixed key.
    """
    lo = np.asarray(lower, dtype=float)
    hi = np.asarray(upper, dtype=float)
    mu = np.asarray(mean, dtype=float)
    upd = np.asarray(update, dtype=bool)
    B, d = mu.shape
    prec = np.linalg.inv(cov)
    cond_var = 1.0 / np.diag(prec)
    cond_sd = np.sqrt(cond_var)

    if start is None:
        start = np.clip(mu, np.where(np.isfinite(lo), lo, -np.inf),
                        np.where(np.isfinite(hi), hi, np.inf))
    x = np.array(start, dtype=float, copy=True)

    rng = np.random.Generator(np.random.Philox(key=seed))
    u_all = rng.random((sweeps + burn, d))

    acc = np.zeros((B, d))
    tiny = 1e-15
    for t in range(sweeps + burn):
        for i in range(d):
            mask = upd[:, i]
            if not mask.any():
                continue
            # fixed-order reduction: results must not depend on batch width
            m = mu[:, i] + x[:, i] - np.einsum("ij,j->i", x - mu, prec[i],
                                               optimize=False) * cond_var[i]
            za = (lo[:, i] - m) / cond_sd[i]
            zb = (hi[:, i] - m) / cond_sd[i]
            pa = ndtr(za)
            pb = ndtr(zb)
            width = np.maximum(pb - pa, tiny)
            if t >= burn:
                tm = m + cond_sd[i] * (norm_pdf(za) - norm_pdf(zb)) / width
                tm = np.clip(tm, lo[:, i], hi[:, i])
                acc[:, i] += np.where(mask, tm, 0.0)
            p = np.clip(pa + u_all[t, i] * (pb - pa), tiny, 1.0 - tiny)
            draw = np.clip(m + cond_sd[i] * ndtri(p), lo[:, i], hi[:, i])
            x[:, i] = np.where(mask, draw, x[:, i])
    means = acc / sweeps
    return np.where(upd, means, np.asarray(start, dtype=float))
