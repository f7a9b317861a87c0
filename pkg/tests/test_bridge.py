import math

import numpy as np
import pytest

from conftest import KIND_CUTOFFS, mc_population_tau
from sgcrm import bridge
from sgcrm.bridge import VariableCutoffs
from sgcrm.exceptions import KindMismatchError


class TestForward:
    def test_cc_closed_form(self):
        assert bridge.forward("cc", 0.5) == pytest.approx(1 / 3, abs=1e-12)

    def test_independence_gives_zero(self):
        for kind, (cj, ck) in KIND_CUTOFFS.items():
            assert abs(bridge.forward(kind, 0.0, cj, ck)) < 1e-8

    def test_bb_closed_form(self):
        d0 = VariableCutoffs("binary", [0.0])
        expected = math.asin(0.5) / math.pi
        assert bridge.forward("bb", 0.5, d0, d0) == pytest.approx(expected, abs=1e-8)

    @pytest.mark.parametrize("kind", list(KIND_CUTOFFS))
    def test_mc_oracle(self, kind):
        cj, ck = KIND_CUTOFFS[kind]
        for rho in (-0.6, 0.45):
            val = bridge.forward(kind, rho, cj, ck)
            mc, se = mc_population_tau(rho, cj, ck, n=400_000, seed=777)
            assert abs(val - mc) <= 3 * se + 1e-9

    def test_oo_example_cutoffs(self):
        cj = VariableCutoffs("ordinal", [-0.1, 0.6])
        ck = VariableCutoffs("ordinal", [-1.0, 1.0])
        val = bridge.forward("oo", 0.5, cj, ck)
        mc, se = mc_population_tau(0.5, cj, ck, n=1_000_000, seed=4242)
        assert abs(val - mc) <= 3 * se

    def test_to_example_cutoffs(self):
        cj = VariableCutoffs("truncated", [0.0])
        ck = VariableCutoffs("ordinal", [-0.7, 0.1, 0.6])
        val = bridge.forward("to", 0.3, cj, ck)
        mc, se = mc_population_tau(0.3, cj, ck, n=1_000_000, seed=4243)
        assert abs(val - mc) <= 3 * se

    def test_sign_matches_rho(self):
        for kind, (cj, ck) in KIND_CUTOFFS.items():
            for rho in (-0.5, -0.1, 0.1, 0.5):
                assert np.sign(bridge.forward(kind, rho, cj, ck)) == np.sign(rho)

    def test_symmetry_under_argument_swap(self):
        # unordered pair semantics: the dispatch maps both variable orders to
        # the same canonical tag, and same-type kinds are symmetric in their
        # cutoff arguments
        for kind, (cj, ck) in KIND_CUTOFFS.items():
            tj = cj.kind if cj else "continuous"
            tk = ck.kind if ck else "continuous"
            tag, swap = bridge.kind_of(tj, tk)
            assert tag == kind and not swap
            mirror_tag, mirror_swap = bridge.kind_of(tk, tj)
            assert mirror_tag == kind
            assert mirror_swap == (tj != tk)
        for kind in ("bb", "oo", "tt"):
            cj, ck = KIND_CUTOFFS[kind]
            assert (bridge.forward(kind, 0.37, cj, ck)
                    == pytest.approx(bridge.forward(kind, 0.37, ck, cj), abs=1e-8))

    def test_kind_mismatch(self):
        with pytest.raises(KindMismatchError):
            bridge.forward("bb", 0.3, VariableCutoffs("binary", [0.0]),
                           VariableCutoffs("ordinal", [-1.0, 1.0]))
        with pytest.raises(KindMismatchError):
            bridge.forward("zz", 0.3)


class TestReductions:
    def test_oo_two_levels_equals_bb(self):
        bj = VariableCutoffs("binary", [0.3])
        bk = VariableCutoffs("binary", [1.0])
        oj = VariableCutoffs("ordinal", [0.3])
        ok_ = VariableCutoffs("ordinal", [1.0])
        for rho in np.linspace(-0.9, 0.9, 13):
            assert (bridge.forward("oo", rho, oj, ok_)
                    == pytest.approx(bridge.forward("bb", rho, bj, bk), abs=1e-8))

    def test_oo_one_binary_equals_ob(self):
        oj = VariableCutoffs("ordinal", [-0.1, 0.6])
        ok_ = VariableCutoffs("ordinal", [0.3])
        bk = VariableCutoffs("binary", [0.3])
        for rho in np.linspace(-0.9, 0.9, 13):
            assert (bridge.forward("oo", rho, oj, ok_)
                    == pytest.approx(bridge.forward("ob", rho, oj, bk), abs=1e-8))

    def test_to_two_levels_equals_tb(self):
        t = VariableCutoffs("truncated", [0.0])
        o2 = VariableCutoffs("ordinal", [0.3])
        b = VariableCutoffs("binary", [0.3])
        for rho in np.linspace(-0.9, 0.9, 13):
            assert (bridge.forward("to", rho, t, o2)
                    == pytest.approx(bridge.forward("tb", rho, t, b), abs=1e-8))


class TestInverse:
    def test_cc_closed_form(self):
        r = bridge.inverse("cc", 1 / 3)
        assert float(r) == pytest.approx(0.5, abs=1e-6)
        assert not r.saturated

    def test_zero_everywhere(self):
        for kind, (cj, ck) in KIND_CUTOFFS.items():
            r = bridge.inverse(kind, 0.0, cj, ck)
            assert abs(float(r)) < 1e-6

    @pytest.mark.parametrize("kind", list(KIND_CUTOFFS))
    def test_round_trip(self, kind):
        cj, ck = KIND_CUTOFFS[kind]
        for rho in (-0.8, -0.3, 0.3, 0.8):
            tau = bridge.forward(kind, rho, cj, ck)
            back = bridge.inverse(kind, tau, cj, ck)
            assert float(back) == pytest.approx(rho, abs=1e-4)
            assert not back.saturated

    def test_saturation(self):
        r = bridge.inverse("cc", 0.99999)
        assert r.saturated and float(r) == pytest.approx(1 - 1e-6)
        r = bridge.inverse("cc", -0.99999)
        assert r.saturated and float(r) == pytest.approx(-(1 - 1e-6))
        # discrete kinds saturate well inside (-1, 1)
        cj, ck = KIND_CUTOFFS["bb"]
        r = bridge.inverse("bb", 0.9, cj, ck)
        assert r.saturated


class TestForwardDeriv:
    def test_cc_at_zero(self):
        assert bridge.forward_deriv("cc", 0.0) == pytest.approx(2 / math.pi, abs=1e-4)

    def test_bb_at_zero(self):
        d0 = VariableCutoffs("binary", [0.0])
        assert (bridge.forward_deriv("bb", 0.0, d0, d0)
                == pytest.approx(1 / math.pi, abs=1e-3))

    @pytest.mark.parametrize("kind", ["cc", "cb", "ct", "co", "bb", "ob", "oo"])
    def test_coarse_cross_check(self, kind):
        cj, ck = KIND_CUTOFFS[kind]
        for rho in np.linspace(-0.9, 0.9, 7):
            fine = bridge.forward_deriv(kind, rho, cj, ck)
            h = 1e-3
            coarse = (bridge.forward(kind, min(rho + h, 1 - 1e-6), cj, ck)
                      - bridge.forward(kind, max(rho - h, -1 + 1e-6), cj, ck)) / (2 * h)
            assert fine == pytest.approx(coarse, rel=1e-2)

    def test_positive_everywhere(self):
        for kind, (cj, ck) in KIND_CUTOFFS.items():
            for rho in (-0.95, -0.4, 0.0, 0.4, 0.95):
                assert bridge.forward_deriv(kind, rho, cj, ck) > 0


class TestMonotonicity:
    @pytest.mark.parametrize("kind", ["cc", "cb", "ct", "co", "bb", "tb", "ob", "oo"])
    def test_strictly_increasing_cheap_kinds(self, kind):
        cj, ck = KIND_CUTOFFS[kind]
        grid = np.arange(-0.99, 0.991, 0.01)
        vals = [bridge.forward(kind, r, cj, ck) for r in grid]
        assert np.all(np.diff(vals) > 0)
