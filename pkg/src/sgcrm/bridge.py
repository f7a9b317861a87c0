"""Bridging functions between latent correlation and population Kendall's tau.

For every ordered pair of variable types (continuous, truncated, ordinal,
binary) there is a map F with  tau = F(rho; cutoffs);  F is strictly
increasing in rho, so latent correlations are recovered by bracketed root
finding on the sample tau.  The ten functions below were validated against
seeded Monte Carlo population-tau oracles; boundary threshold conventions for
the ordinal sums are cutoff_0 = -inf and cutoff_{levels} = +inf.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import mvn
from .exceptions import KindMismatchError, NonConvergenceError, NumericalError

_SQ2 = 1.0 / math.sqrt(2.0)

# canonical unordered pair tags; mirrored orderings are resolved by swapping
# arguments at dispatch
PAIR_KINDS = ("cc", "cb", "ct", "co", "bb", "tb", "tt", "ob", "oo", "to")

CONTINUOUS = "continuous"
TRUNCATED = "truncated"
ORDINAL = "ordinal"
BINARY = "binary"

_KIND_LETTER = {CONTINUOUS: "c", TRUNCATED: "t", ORDINAL: "o", BINARY: "b"}

# rho endpoints used by the root finder; sample tau beyond the achievable
# range saturates at these values
RHO_MAX = 1.0 - 1e-6
_BRACKET_EPS = 1e-6


@dataclass(frozen=True)
class VariableCutoffs:
    """Latent thresholds of one variable.

    ``thresholds`` is empty for continuous variables, a single value for
    binary and truncated ones, and the ``levels - 1`` strictly increasing
    interior thresholds for an ordinal variable.
    """

    kind: str
    thresholds: np.ndarray = field(default_factory=lambda: np.empty(0))

    def __post_init__(self):
        object.__setattr__(self, "thresholds",
                           np.asarray(self.thresholds, dtype=float).ravel())
        t = self.thresholds
        if self.kind not in _KIND_LETTER:
            raise KindMismatchError(f"unknown variable kind {self.kind!r}")
        if np.any(~np.isfinite(t)):
            raise KindMismatchError("cutoffs must be finite")
        if self.kind == CONTINUOUS and t.size != 0:
            raise KindMismatchError("continuous variables carry no cutoffs")
        if self.kind in (BINARY, TRUNCATED) and t.size != 1:
            raise KindMismatchError(f"{self.kind} variables carry exactly one cutoff")
        if self.kind == ORDINAL:
            if t.size < 1:
                raise KindMismatchError("ordinal variables need >= 1 interior cutoff")
            if np.any(np.diff(t) <= 0):
                raise KindMismatchError("ordinal cutoffs must be strictly increasing")

    @property
    def levels(self):
        return self.thresholds.size + 1


class InverseResult(float):
    """Inverted correlation; ``saturated`` marks endpoint solutions."""

    saturated: bool

    def __new__(cls, rho, saturated):
        obj = super().__new__(cls, rho)
        obj.saturated = bool(saturated)
        return obj


def kind_of(type_j, type_k):
    """Canonical pair tag plus whether the arguments must be swapped."""
    a, b = _KIND_LETTER[type_j], _KIND_LETTER[type_k]
    if a + b in PAIR_KINDS:
        return a + b, False
    if b + a in PAIR_KINDS:
        return b + a, True
    raise KindMismatchError(f"no bridging function for pair {type_j}/{type_k}")


def _phi2(a, b, rho):
    if a == -math.inf or b == -math.inf:
        return 0.0
    if a == math.inf:
        return float(mvn.phi(b))
    if b == math.inf:
        return float(mvn.phi(a))
    return float(mvn._bvn_cdf(a, b, max(-mvn.RHO_CLAMP, min(mvn.RHO_CLAMP, rho)))[0])


def _phi3(b1, b2, b3, R, mt=None):
    return mvn.mvn_cdf([b1, b2, b3], R, merge_tol=mt)


def _phi4(b1, b2, b3, b4, R, mt=None):
    return mvn.mvn_cdf([b1, b2, b3, b4], R, merge_tol=mt)


def _padded(t):
    """Ordinal thresholds with the -inf / +inf boundary conventions."""
    return np.concatenate(([-np.inf], t, [np.inf]))


def _f_cc(rho):
    return 2.0 / math.pi * math.asin(rho)


def _f_cb(rho, d_b):
    return 4.0 * _phi2(d_b, 0.0, rho * _SQ2) - 2.0 * mvn.phi(d_b)


def _f_ct(rho, d_t, mt=None):
    # matches the MC oracle and reduces exactly to the truncated-truncated
    # bridge with the second cutoff at -inf
    R = np.array([[1.0, rho, rho * _SQ2],
                  [rho, 1.0, _SQ2],
                  [rho * _SQ2, _SQ2, 1.0]])
    return -2.0 * _phi2(-d_t, 0.0, _SQ2) + 4.0 * _phi3(-d_t, 0.0, 0.0, R, mt)


def _f_co(rho, t_o, mt=None):
    # rectangle representation over (L_o, L_o', (L_c' - L_c)/sqrt(2)); the
    # printed closed form lost its correlation matrices in transmission, so
    # the function is evaluated from its defining concordance probabilities
    cuts = _padded(t_o)
    m = np.array([[1.0, 0.0, -rho * _SQ2],
                  [0.0, 1.0, rho * _SQ2],
                  [-rho * _SQ2, rho * _SQ2, 1.0]])
    mflip = m.copy()
    mflip[:2, 2] *= -1.0
    mflip[2, :2] *= -1.0
    total = 0.0
    for r in range(1, cuts.size - 1):
        lo, hi = cuts[r], cuts[r + 1]
        conc = _phi3(hi, lo, 0.0, m, mt) - _phi3(lo, lo, 0.0, m, mt)
        disc = _phi3(hi, lo, 0.0, mflip, mt) - _phi3(lo, lo, 0.0, mflip, mt)
        total += conc - disc
    return 2.0 * total


def _f_bb(rho, d_j, d_k):
    return 2.0 * (_phi2(d_j, d_k, rho) - mvn.phi(d_j) * mvn.phi(d_k))


def _f_tb(rho, d_t, d_b, mt=None):
    # second matrix is the 2-level reduction of the truncated-ordinal bridge;
    # both terms vanish against each other at rho = 0
    s3a = np.array([[1.0, 0.0, rho * _SQ2],
                    [0.0, 1.0, _SQ2],
                    [rho * _SQ2, _SQ2, 1.0]])
    s3b = np.array([[1.0, -rho, -rho * _SQ2],
                    [-rho, 1.0, _SQ2],
                    [-rho * _SQ2, _SQ2, 1.0]])
    return 2.0 * _phi3(d_b, -d_t, 0.0, s3a, mt) - 2.0 * _phi3(d_b, -d_t, 0.0, s3b, mt)


def _f_tt(rho, d_j, d_k, mt=None):
    s4a = np.array([[1.0, 0.0, _SQ2, -rho * _SQ2],
                    [0.0, 1.0, -rho * _SQ2, _SQ2],
                    [_SQ2, -rho * _SQ2, 1.0, -rho],
                    [-rho * _SQ2, _SQ2, -rho, 1.0]])
    s4b = np.array([[1.0, rho, _SQ2, rho * _SQ2],
                    [rho, 1.0, rho * _SQ2, _SQ2],
                    [_SQ2, rho * _SQ2, 1.0, rho],
                    [rho * _SQ2, _SQ2, rho, 1.0]])
    return (-2.0 * _phi4(-d_j, -d_k, 0.0, 0.0, s4a, mt)
            + 2.0 * _phi4(-d_j, -d_k, 0.0, 0.0, s4b, mt))


def _f_ob(rho, t_o, d_b):
    cuts = _padded(t_o)
    total = 0.0
    for r in range(1, cuts.size - 1):
        total += (_phi2(cuts[r], d_b, rho) * mvn.phi(cuts[r + 1])
                  - mvn.phi(cuts[r]) * _phi2(cuts[r + 1], d_b, rho))
    return 2.0 * total


def _f_oo(rho, t_j, t_k):
    cj = _padded(t_j)
    ck = _padded(t_k)
    lj = t_j.size + 1
    lk = t_k.size + 1
    total = 0.0
    for r in range(1, lj):
        for s in range(1, lk):
            total += _phi2(cj[r], ck[s], rho) * (
                _phi2(cj[r + 1], ck[s + 1], rho) - _phi2(cj[r + 1], ck[s - 1], rho))
    tail = 0.0
    for r in range(1, lj):
        tail += mvn.phi(cj[r]) * _phi2(cj[r + 1], ck[lk - 1], rho)
    return 2.0 * total - 2.0 * tail


def _f_to(rho, d_t, t_o, mt=None):
    cuts = _padded(t_o)
    lo = t_o.size + 1
    s3a = np.array([[1.0, 0.0, rho * _SQ2],
                    [0.0, 1.0, _SQ2],
                    [rho * _SQ2, _SQ2, 1.0]])
    s5 = np.array([[1.0, 0.0, 0.0, rho * _SQ2],
                   [0.0, 1.0, -rho, -rho * _SQ2],
                   [0.0, -rho, 1.0, _SQ2],
                   [rho * _SQ2, -rho * _SQ2, _SQ2, 1.0]])
    total = 2.0 * _phi3(cuts[lo - 1], -d_t, 0.0, s3a, mt)
    for r in range(1, lo):
        total -= 2.0 * (_phi4(cuts[r + 1], cuts[r], -d_t, 0.0, s5, mt)
                        - _phi4(cuts[r - 1], cuts[r], -d_t, 0.0, s5, mt))
    return total


def _check_shapes(kind, cut_j, cut_k):
    expect = {"c": CONTINUOUS, "t": TRUNCATED, "o": ORDINAL, "b": BINARY}
    for tag, cut in ((kind[0], cut_j), (kind[1], cut_k)):
        if cut.kind != expect[tag]:
            raise KindMismatchError(
                f"kind {kind!r} expects a {expect[tag]} cutoff, got {cut.kind!r}")


def forward(kind, rho, cut_j=None, cut_k=None):
    """Population Kendall's tau F(rho) for the given pair kind.

    Parameters
    ----------
    kind : str
        One of ``PAIR_KINDS``; the letter order fixes the argument order
        (e.g. ``"to"`` means ``cut_j`` truncated, ``cut_k`` ordinal).
    rho : float in (-1, 1)
        Latent correlation.
    cut_j, cut_k : VariableCutoffs
        Thresholds for the two variables; may be omitted for continuous ones.
    """
    if kind not in PAIR_KINDS:
        raise KindMismatchError(f"unknown pair kind {kind!r}")
    cut_j = cut_j if cut_j is not None else VariableCutoffs(CONTINUOUS)
    cut_k = cut_k if cut_k is not None else VariableCutoffs(CONTINUOUS)
    _check_shapes(kind, cut_j, cut_k)
    rho = float(np.clip(rho, -mvn.RHO_CLAMP, mvn.RHO_CLAMP))
    # deliberately saturated evaluations (the root-finder bracket ends) would
    # otherwise hit the slowest quadrature regime; collapsing the +-rho
    # entries analytically costs ~1e-4 accuracy, which only gates the
    # saturation classification
    mt = abs(rho) - 1e-12 if abs(rho) >= 0.9995 else None
    tj, tk = cut_j.thresholds, cut_k.thresholds
    if kind == "cc":
        return _f_cc(rho)
    if kind == "cb":
        return _f_cb(rho, tk[0])
    if kind == "ct":
        return _f_ct(rho, tk[0], mt)
    if kind == "co":
        return _f_co(rho, tk, mt)
    if kind == "bb":
        return _f_bb(rho, tj[0], tk[0])
    if kind == "tb":
        return _f_tb(rho, tj[0], tk[0], mt)
    if kind == "tt":
        return _f_tt(rho, tj[0], tk[0], mt)
    if kind == "ob":
        return _f_ob(rho, tj, tk[0])
    if kind == "oo":
        return _f_oo(rho, tj, tk)
    return _f_to(rho, tj[0], tk, mt)


def inverse(kind, tau, cut_j=None, cut_k=None):
    """Latent correlation recovering the given tau: bracketed root finding.

    The root is isolated on [-1 + 1e-6, 1 - 1e-6]; sample tau outside the
    achievable range returns the matching endpoint with ``saturated`` set.

    Returns
    -------
    InverseResult
        A float subclass carrying the ``saturated`` flag.
    """
    tau = float(tau)
    lo, hi = -RHO_MAX, RHO_MAX
    f_lo = forward(kind, lo, cut_j, cut_k) - tau
    if f_lo >= 0.0:
        return InverseResult(lo, True)
    f_hi = forward(kind, hi, cut_j, cut_k) - tau
    if f_hi <= 0.0:
        return InverseResult(hi, True)
    try:
        root, info = brentq(lambda r: forward(kind, r, cut_j, cut_k) - tau,
                            lo, hi, xtol=5e-9, maxiter=200, full_output=True)
    except RuntimeError as exc:
        raise NonConvergenceError(f"bridging inversion failed for kind {kind!r}: {exc}")
    if not info.converged:
        raise NonConvergenceError(
            f"bridging inversion for kind {kind!r} hit the iteration cap",
            residual=forward(kind, root, cut_j, cut_k) - tau)
    return InverseResult(root, False)


def forward_deriv(kind, rho, cut_j=None, cut_k=None, step=1e-5):
    """Central finite difference dF/drho; strictly positive for valid kernels."""
    hi = min(rho + step, RHO_MAX)
    lo = max(rho - step, -RHO_MAX)
    diff = forward(kind, hi, cut_j, cut_k) - forward(kind, lo, cut_j, cut_k)
    deriv = diff / (hi - lo)
    if not deriv > 0.0:
        raise NumericalError(
            f"nonpositive bridging derivative {deriv:.3e} for kind {kind!r} at rho={rho}")
    return deriv
