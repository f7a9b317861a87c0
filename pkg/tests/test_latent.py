import numpy as np
import pytest

from sgcrm import latent, mvn, sim
from sgcrm.bridge import VariableCutoffs
from sgcrm.cutoffs import estimate_cutoffs
from sgcrm.dataio import ColumnSpec, MixedDataset
from sgcrm.exceptions import AllMissingError, DegenerateColumnError, SgcrmError
from sgcrm.latentcorr import LatentCorrelation


def proj(S):
    return LatentCorrelation(sigma=np.asarray(S, dtype=float), projected=True)


class TestTransforms:
    def test_median_maps_to_zero(self):
        ds = MixedDataset(values=np.array([[1.0], [2.0], [3.0]]),
                          schema=[ColumnSpec("x", "continuous")])
        tr = latent.build_transforms(ds)
        assert tr[0].latent(2.0) == 0.0

    def test_range_strictly_inside_unit(self, rng):
        x = rng.standard_normal(40)
        ds = MixedDataset(values=x[:, None], schema=[ColumnSpec("x", "continuous")])
        tr = latent.build_transforms(ds)
        for q in np.linspace(x.min() - 1, x.max() + 1, 23):
            f = mvn.phi(tr[0].latent(q))
            assert 0.0 < f < 1.0

    def test_monotone_on_grid(self, rng):
        x = rng.standard_normal(60)
        ds = MixedDataset(values=x[:, None], schema=[ColumnSpec("x", "continuous")])
        tr = latent.build_transforms(ds)
        grid = np.sort(rng.uniform(x.min(), x.max(), 50))
        vals = [tr[0].latent(g) for g in grid]
        assert np.all(np.diff(vals) >= 0)

    def test_truncated_counts_zeros(self):
        vals = np.array([0, 0, 1.0, 2.0, 3.0])
        ds = MixedDataset(values=vals[:, None], schema=[ColumnSpec("t", "truncated")])
        tr = latent.build_transforms(ds)
        # F_tn(1) counts the two zeros and the one positive <= 1 over n+1
        assert mvn.phi(tr[0].latent(1.0)) == pytest.approx(3 / 6)
        with pytest.raises(SgcrmError):
            tr[0].latent(0.0)

    def test_positive_case_exceeds_cutoff(self):
        vals = np.array([0, 0, 0, 1.0, 2.0, 3.0, 4.0])
        ds = MixedDataset(values=vals[:, None], schema=[ColumnSpec("t", "truncated")])
        tr = latent.build_transforms(ds)
        cut = mvn.phi_inv(3 / 7)
        for x in (1.0, 2.5, 4.0):
            assert tr[0].latent(x) > cut

    def test_all_zero_truncated_degenerate(self):
        ds = MixedDataset(values=np.zeros((5, 1)), schema=[ColumnSpec("t", "truncated")])
        with pytest.raises(DegenerateColumnError):
            latent.build_transforms(ds)


def mixed_fixture(rng, n=500):
    S = sim.random_corr(5, 99)
    variables = [sim.VariableSpec("binary", (0.3,)),
                 sim.VariableSpec("continuous"),
                 sim.VariableSpec("ordinal", (-0.1, 0.6)),
                 sim.VariableSpec("ordinal", (-0.7, 0.1, 0.6)),
                 sim.VariableSpec("truncated", (0.0,))]
    scen = sim.SimScenario(variables=variables, n=n, seed=int(rng.integers(1, 1 << 30)))
    ds = sim.glnpn_sample(S, scen)
    tr = latent.build_transforms(ds)
    cuts = estimate_cutoffs(ds)
    return ds, tr, cuts, S


class TestPredict:
    def test_independent_binary_closed_form(self):
        vals = np.column_stack([np.tile([0.0, 1.0], 10), np.linspace(-1, 1, 20)])
        ds = MixedDataset(values=vals, schema=[ColumnSpec("b", "binary"),
                                               ColumnSpec("c", "continuous")])
        tr = latent.build_transforms(ds)
        cuts = [VariableCutoffs("binary", [0.0]), VariableCutoffs("continuous")]
        pred = latent.predict_latent(np.array([1.0, 0.3]), tr, cuts, proj(np.eye(2)),
                                     ["binary", "continuous"])
        expected = float(mvn.norm_pdf(0) / (1 - mvn.phi(0)))
        assert pred.latent[0] == pytest.approx(expected, abs=1e-4)

    def test_independent_continuous_passthrough(self, rng):
        ds, tr, cuts, _ = mixed_fixture(rng)
        row = ds.values[4]
        pred = latent.predict_latent(row, tr, cuts, proj(np.eye(5)), ds.types)
        assert pred.latent[1] == tr[1].latent(row[1])

    def test_boxing_invariant(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng)
        for i in range(12):
            row = ds.values[i]
            pred = latent.predict_latent(row, tr, cuts, proj(S), ds.types)
            for j, t in enumerate(ds.types):
                if t == "binary":
                    thr = cuts[j].thresholds[0]
                    if row[j] == 1:
                        assert pred.latent[j] > thr
                    else:
                        assert pred.latent[j] < thr
                elif t == "ordinal":
                    lo, hi = latent._box_for("ordinal", row[j], cuts[j])
                    assert lo < pred.latent[j] < hi

    def test_truncated_case_consistency(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng)
        thr = cuts[4].thresholds[0]
        zero_rows = np.flatnonzero(ds.values[:, 4] == 0)[:5]
        pos_rows = np.flatnonzero(ds.values[:, 4] > 0)[:5]
        for i in zero_rows:
            pred = latent.predict_latent(ds.values[i], tr, cuts, proj(S), ds.types)
            assert pred.truncated_cases[4] == "zero"
            assert pred.latent[4] <= thr
        for i in pos_rows:
            pred = latent.predict_latent(ds.values[i], tr, cuts, proj(S), ds.types)
            assert pred.truncated_cases[4] == "positive"
            assert pred.latent[4] >= thr

    def test_rejection_oracle_five_vars(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng)
        row = ds.values[7]
        pred = latent.predict_latent(row, tr, cuts, proj(S), ds.types)
        pinned = [j for j, t in enumerate(ds.types)
                  if t == "continuous" or (t == "truncated" and row[j] > 0)]
        boxed = [j for j in range(5) if j not in pinned]
        pv = np.array([tr[j].latent(row[j]) for j in pinned])
        W = S[np.ix_(boxed, pinned)] @ np.linalg.inv(S[np.ix_(pinned, pinned)])
        cm = W @ pv
        cv = S[np.ix_(boxed, boxed)] - W @ S[np.ix_(pinned, boxed)]
        L = np.linalg.cholesky(0.5 * (cv + cv.T))
        lo = np.array([latent._box_for(ds.types[j], row[j], cuts[j])[0] for j in boxed])
        hi = np.array([latent._box_for(ds.types[j], row[j], cuts[j])[1] for j in boxed])
        total = np.zeros(len(boxed))
        total_sq = np.zeros(len(boxed))
        count = 0
        for _ in range(4):
            z = rng.standard_normal((250_000, len(boxed))) @ L.T + cm
            ok = np.all((z > lo) & (z <= hi), axis=1)
            total += z[ok].sum(axis=0)
            total_sq += (z[ok] ** 2).sum(axis=0)
            count += int(ok.sum())
        mc = total / count
        se = np.sqrt(total_sq / count - mc ** 2) / np.sqrt(count)
        assert np.all(np.abs(pred.latent[boxed] - mc) <= 3 * se)

    def test_monotone_transform_leaves_discrete_alone(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng)
        vals2 = ds.values.copy()
        vals2[:, 1] = vals2[:, 1] ** 3
        ds2 = MixedDataset(values=vals2, schema=ds.schema)
        tr2 = latent.build_transforms(ds2)
        for i in range(6):
            p1 = latent.predict_latent(ds.values[i], tr, cuts, proj(S), ds.types)
            p2 = latent.predict_latent(ds2.values[i], tr2, cuts, proj(S), ds2.types)
            discrete = [j for j, t in enumerate(ds.types) if t != "continuous"]
            assert np.array_equal(p1.latent[discrete], p2.latent[discrete])

    def test_complete_row_required(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng)
        row = ds.values[0].copy()
        row[2] = np.nan
        with pytest.raises(SgcrmError):
            latent.predict_latent(row, tr, cuts, proj(S), ds.types)


class TestImpute:
    def test_independence_forces_zero_latent(self):
        vals = np.column_stack([np.tile([0.0, 1.0], 15), np.linspace(-1, 1, 30),
                                np.tile([0, 1, 2.0], 10)])
        schema = [ColumnSpec("b", "binary"), ColumnSpec("c", "continuous"),
                  ColumnSpec("o", "ordinal", levels=3)]
        ds = MixedDataset(values=vals, schema=schema)
        tr = latent.build_transforms(ds)
        cuts = estimate_cutoffs(ds)
        row = ds.values[0].copy()
        row[0] = np.nan
        completed, lat = latent.impute_missing(row, tr, cuts, proj(np.eye(3)), ds.types)
        assert lat[0] == 0.0
        expected = 1.0 if 0.0 > cuts[0].thresholds[0] else 0.0
        assert completed[0] == expected

    def test_two_continuous_conditional_mean(self, rng):
        rho = 0.6
        X = rng.standard_normal((400, 2)) @ np.linalg.cholesky(
            [[1, rho], [rho, 1]]).T
        ds = MixedDataset(values=X, schema=[ColumnSpec("a", "continuous"),
                                            ColumnSpec("b", "continuous")])
        tr = latent.build_transforms(ds)
        cuts = estimate_cutoffs(ds)
        row = np.array([X[3, 0], np.nan])
        completed, lat = latent.impute_missing(row, tr, cuts,
                                               proj([[1, rho], [rho, 1]]), ds.types)
        assert lat[1] == pytest.approx(rho * tr[0].latent(X[3, 0]), abs=1e-12)
        assert not np.isnan(completed[1])

    def test_all_missing_error(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng)
        with pytest.raises(AllMissingError):
            latent.impute_missing(np.full(5, np.nan), tr, cuts, proj(S), ds.types)

    def test_imputed_values_respect_types(self, rng):
        ds, tr, cuts, S = mixed_fixture(rng, n=200)
        masked, _ = sim.mask_cells(ds, 0.25, 4321)
        completed, lats, cells = latent.impute_rows(masked, tr, cuts, proj(S))
        assert not np.isnan(completed).any()
        for i, j in cells:
            v = completed[i, j]
            t = ds.types[j]
            if t == "binary":
                assert v in (0.0, 1.0)
            elif t == "ordinal":
                assert v == int(v) and 0 <= v < cuts[j].levels
            elif t == "truncated":
                assert v >= 0.0
        # unmasked cells unchanged
        obs = ~np.isnan(masked.values)
        assert np.array_equal(completed[obs], masked.values[obs])
