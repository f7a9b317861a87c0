import numpy as np
import pytest

from sgcrm.bridge import VariableCutoffs


@pytest.fixture
def rng():
    return np.random.default_rng(20240001)


# representative cutoff choices per pair kind, drawn from the simulation
# scenario's cutpoints (binary 0.3 / 1, ordinals (-0.1, 0.6), (-1, 1),
# (-0.7, 0.1, 0.6), truncation at 0)
KIND_CUTOFFS = {
    "cc": (None, None),
    "cb": (None, VariableCutoffs("binary", [0.3])),
    "ct": (None, VariableCutoffs("truncated", [0.0])),
    "co": (None, VariableCutoffs("ordinal", [-0.7, 0.1, 0.6])),
    "bb": (VariableCutoffs("binary", [0.3]), VariableCutoffs("binary", [1.0])),
    "tb": (VariableCutoffs("truncated", [0.0]), VariableCutoffs("binary", [0.3])),
    "tt": (VariableCutoffs("truncated", [0.0]), VariableCutoffs("truncated", [0.0])),
    "ob": (VariableCutoffs("ordinal", [-0.1, 0.6]), VariableCutoffs("binary", [0.3])),
    "oo": (VariableCutoffs("ordinal", [-0.1, 0.6]), VariableCutoffs("ordinal", [-1.0, 1.0])),
    "to": (VariableCutoffs("truncated", [0.0]), VariableCutoffs("ordinal", [-0.7, 0.1, 0.6])),
}


def observe_column(z, cut):
    """Apply one variable's observation map to latent draws."""
    if cut is None or cut.kind == "continuous":
        return z
    if cut.kind == "binary":
        return (z > cut.thresholds[0]).astype(float)
    if cut.kind == "truncated":
        return np.where(z > cut.thresholds[0], z, 0.0)
    return np.searchsorted(cut.thresholds, z, side="right").astype(float)


def mc_population_tau(rho, cut_j, cut_k, n=1_000_000, seed=20240001):
    """Monte Carlo estimate of the population Kendall's tau of one pair kind.

    Draws n independent pairs of observation couples and averages the sign
    product; returns (estimate, standard error).
    """
    gen = np.random.default_rng(seed)
    L = np.linalg.cholesky([[1.0, rho], [rho, 1.0]])
    a = gen.standard_normal((n, 2)) @ L.T
    b = gen.standard_normal((n, 2)) @ L.T
    s = (np.sign(observe_column(a[:, 0], cut_j) - observe_column(b[:, 0], cut_j))
         * np.sign(observe_column(a[:, 1], cut_k) - observe_column(b[:, 1], cut_k)))
    return float(s.mean()), float(s.std() / np.sqrt(n))


@pytest.fixture
def kind_cutoffs():
    return KIND_CUTOFFS
