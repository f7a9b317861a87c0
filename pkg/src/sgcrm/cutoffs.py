"""Method-of-moments estimation of latent thresholds for discrete columns.

For a binary or truncated column the threshold is the normal quantile of the
observed zero proportion; for an ordinal column with levels 0..l-1 the r-th
threshold is the normal quantile of the cumulative proportion at or below
level r-1.  Any cumulative proportion of 0 or 1 would put a threshold at
+-infinity, where the bridging functions are undefined, so degenerate columns
are hard errors.
"""

from dataclasses import dataclass

import numpy as np

from . import mvn
from .bridge import BINARY, CONTINUOUS, ORDINAL, TRUNCATED, VariableCutoffs
from .exceptions import DegenerateColumnError


@dataclass
class CutoffSet:
    """Per-column VariableCutoffs, aligned to dataset column order."""

    cutoffs: list

    def __getitem__(self, j):
        return self.cutoffs[j]

    def __len__(self):
        return len(self.cutoffs)

    def __iter__(self):
        return iter(self.cutoffs)


def _column_cutoffs(x, col_type, levels, name):
    obs = x[~np.isnan(x)]
    n = obs.size
    if n == 0:
        raise DegenerateColumnError(name, "no observed values")
    if col_type == CONTINUOUS:
        return VariableCutoffs(CONTINUOUS)
    if col_type in (BINARY, TRUNCATED):
        zeros = int(np.sum(obs == 0.0))
        if zeros == 0 or zeros == n:
            what = "zeros" if zeros == 0 else "nonzeros"
            raise DegenerateColumnError(name, f"no {what}; threshold would be infinite")
        return VariableCutoffs(col_type, [mvn.phi_inv(zeros / n)])
    # ordinal: every level 0..levels-1 must appear, otherwise two thresholds
    # coincide and their bridging interval collapses
    counts = np.array([np.sum(obs == r) for r in range(levels)], dtype=int)
    if counts.sum() != n:
        raise DegenerateColumnError(name, "codes outside 0..levels-1 after remapping")
    if np.any(counts == 0):
        missing = int(np.flatnonzero(counts == 0)[0])
        raise DegenerateColumnError(name, f"level {missing} has no observations")
    cum = np.cumsum(counts)[:-1] / n
    return VariableCutoffs(ORDINAL, mvn.phi_inv(cum))


def estimate_cutoffs(data):
    """Estimate the CutoffSet of a MixedDataset (per-column, moment matching)."""
    out = []
    for j, col in enumerate(data.schema):
        out.append(_column_cutoffs(data.values[:, j], col.type,
                                   col.levels, col.name))
    return CutoffSet(out)
