import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sofdma.params import (SystemParams, ceil_log2, check_eta_admissible, codelength,
                           derive_simulation_params, derive_theorem_params, plan_grouping,
                           refinement_constants)


def theorem(K=4, N=16, S=1, M=2, R=0.5, D=3, beta0=7, beta1=1, beta2=1,
            a_lo=1.0, a_hi=2.0, sigma2=0.0):
    return derive_theorem_params(K, N, S, M, R, D, beta0, beta1, beta2, a_lo, a_hi, sigma2)


def hand_c2(K, M, ratio, beta2=1.0):
    # evaluated independently of the library with plain floats
    return M + math.ceil(beta2 * ratio ** 2 * math.log2(K) ** 4 * K * math.log2(K * M + 1))


class TestTheoremParams:
    def test_worked_example(self):
        # a_hi/a_lo -> 1 from above; the strict range check forbids equality
        p = theorem(a_hi=1.0 + 1e-9)
        assert (p.B, p.C0, p.C1, p.C2) == (28, 9, 2, 205)
        assert p.C2 == 2 + math.ceil(16 * 4 * math.log2(9))

    def test_eta_is_a_lo_squared(self):
        assert theorem(a_lo=0.5).eta == 0.25

    def test_k1_rejected(self):
        with pytest.raises(ValueError, match="K >= 2"):
            theorem(K=1)

    @pytest.mark.parametrize("kwargs", [dict(beta0=6), dict(D=2), dict(a_lo=2.0, a_hi=2.0),
                                        dict(a_lo=3.0, a_hi=2.0), dict(beta1=0)])
    def test_invalid_inputs(self, kwargs):
        with pytest.raises(ValueError):
            theorem(**kwargs)

    @settings(max_examples=60, deadline=None)
    @given(K=st.integers(2, 512), logN=st.integers(1, 40), logS=st.integers(0, 6),
           M=st.integers(0, 20), D=st.integers(3, 5), beta1=st.floats(0.5, 3),
           ratio=st.floats(1.01, 30))
    def test_expansion_matches_definitions(self, K, logN, logS, M, D, beta1, ratio):
        N, S = 2 ** logN, 2 ** logS
        beta0 = D * (D - 1) + 1
        if M >= beta0 * K:
            M = beta0 * K - 1
        p = derive_theorem_params(K, N, S, M, 0.5, D, beta0, beta1, 1.0, 1.0, ratio, 0.0)
        assert p.B == beta0 * K
        assert p.C0 == 2 * (logN + logS) + 1
        assert p.C1 == math.ceil(beta1 * math.log2(K))
        assert p.C2 == hand_c2(K, M, ratio)
        assert codelength(p) == (p.B + p.M) * (p.C0 + p.C1) + p.C2


class TestSimulationParams:
    @pytest.mark.parametrize("K, B, C1", [(50, 300, 6), (20, 120, 5), (64, 384, 6)])
    def test_operating_points(self, K, B, C1):
        p = derive_simulation_params(K, 2 ** 38, 20, 1.0, 1.0, 2.0, C2=2000)
        assert (p.B, p.C0, p.C1, p.D) == (B, 78, C1, 3)

    def test_smallest_system(self):
        p = derive_simulation_params(2, 2, 2, 0.0, 1.0, 2.0)
        assert (p.B, p.C0, p.C1) == (12, 4, 1)
        assert p.C2 is None

    def test_c2_is_an_input(self):
        p = derive_simulation_params(50, 2 ** 38, 20, 1.0, 1.0, 2.0)
        with pytest.raises(ValueError, match="C2"):
            codelength(p)
        assert codelength(p.with_c2(2000)) == 320 * 84 + 2000

    def test_m_must_fit_in_b(self):
        with pytest.raises(ValueError, match="smaller than B"):
            derive_simulation_params(3, 2 ** 10, 20, 1.0, 1.0, 2.0)

    def test_defaults(self):
        p = derive_simulation_params(50, 2 ** 38, 20, 1.0, 2.0, 4.0, C2=2000)
        assert p.eta == 4.0 and p.eta_verify == 4.0
        assert p.rho == p.T / 8
        assert p.varrho == pytest.approx(2.0 / 8)
        assert p.f * p.B * p.T == pytest.approx(1.0)


class TestCodelength:
    def test_k50_operating_point(self):
        p = derive_simulation_params(50, 2 ** 38, 20, 1.0, 1.0, 2.0, C2=2000)
        assert codelength(p) == 28880

    def test_k20_undivided(self):
        p = derive_simulation_params(20, 2 ** 38, 20, 1.0, 1.0, 100.0, C2=20000)
        assert codelength(p) == 31620

    def test_zero_subcarriers_rejected(self):
        with pytest.raises(ValueError):
            SystemParams(K=1, N=2, S=1, B=0, M=0, D=3, C0=3, C1=1, C2=2, R=0.5,
                         sigma2=0, a_lo=1, a_hi=2, eta=1)

    @settings(max_examples=80, deadline=None)
    @given(field=st.sampled_from(["B", "M", "C0", "C1", "C2"]), bump=st.integers(1, 50))
    def test_monotone_in_every_dimension(self, field, bump):
        base = dict(K=10, N=2 ** 20, S=1, B=120, M=10, D=3, C0=42, C1=4, C2=500, R=0.5,
                    sigma2=1.0, a_lo=1.0, a_hi=2.0, eta=1.0)
        bigger = dict(base, **{field: base[field] + bump})
        assert codelength(SystemParams(**bigger)) > codelength(SystemParams(**base))


class TestGrouping:
    ranges = [(1.0, 10.0), (10.0, 100.0)]

    def test_per_group_sizing(self):
        plan = plan_grouping(20, 2 ** 38, 20, 1.0, self.ranges, [10, 10], [3000, 3000],
                             hash_width_mode="per-group")
        assert [g.codelength for g in plan.groups] == [9560, 9560]
        assert plan.total_codelength == 19120

    def test_shared_hash_width(self):
        plan = plan_grouping(20, 2 ** 38, 20, 1.0, self.ranges, [10, 10], [3000, 3000])
        assert [g.codelength for g in plan.groups] == [14620, 14620]
        assert plan.total_codelength == 29240

    def test_single_group_is_undivided(self):
        plan = plan_grouping(20, 2 ** 38, 20, 1.0, [(1.0, 100.0)], [20], [20000])
        und = derive_simulation_params(20, 2 ** 38, 20, 1.0, 1.0, 100.0, C2=20000)
        assert plan.total_codelength == codelength(und)

    def test_group_lookup(self):
        plan = plan_grouping(20, 2 ** 38, 20, 1.0, self.ranges, [10, 10], [3000, 3000])
        assert plan.group_of(1.0) == 0
        assert plan.group_of(10.0) == 1
        assert plan.group_of(100.0) is None

    @pytest.mark.parametrize("sizes, c2, ranges", [
        ([20, 0], [3000, 3000], ranges),
        ([10, 9], [3000, 3000], ranges),
        ([10, 10], [3000], ranges),
        ([10, 10], [3000, 3000], [(1.0, 10.0), (11.0, 100.0)]),
    ])
    def test_invalid_plans(self, sizes, c2, ranges):
        with pytest.raises(ValueError):
            plan_grouping(20, 2 ** 38, 20, 1.0, ranges, sizes, c2)

    def test_unknown_mode(self):
        with pytest.raises(ValueError, match="hash_width_mode"):
            plan_grouping(20, 2 ** 38, 20, 1.0, self.ranges, [10, 10], [3000, 3000],
                          hash_width_mode="other")


class TestEtaAdmissibility:
    def test_noiseless_always_admissible(self):
        ok, margin = check_eta_admissible(theorem(K=64, a_lo=0.5, sigma2=0.0))
        assert ok and margin == pytest.approx(0.25)

    def test_noise_floor_at_k64(self):
        p = theorem(K=64, N=2 ** 10, a_lo=0.5, a_hi=1.0, sigma2=1.0)
        ok, margin = check_eta_admissible(p)
        bound = 32 * 6 * math.log(64) / (7 * 64)
        assert bound == pytest.approx(1.783, abs=1e-3)
        assert not ok and margin == pytest.approx(0.25 - bound)

    def test_large_k_becomes_admissible(self):
        p = theorem(K=2 ** 20, N=2 ** 10, M=20, a_lo=0.5, a_hi=1.0, sigma2=1.0)
        assert check_eta_admissible(p)[0]

    def test_simulation_defaults_miss_the_theorem_floor(self):
        # beta0=6 sits below D(D-1)+1, and the floor is far above eta at 0 dB
        p = derive_simulation_params(50, 2 ** 38, 20, 1.0, math.sqrt(2), 2.0, C2=2000)
        assert not check_eta_admissible(p)[0]


class TestHelpers:
    @pytest.mark.parametrize("x, want", [(1, 0), (2, 1), (3, 2), (4, 2), (5, 3),
                                         (2 ** 38, 38), (2 ** 38 + 1, 39)])
    def test_ceil_log2(self, x, want):
        assert ceil_log2(x) == want

    def test_refinement_constants_scale_with_sqrt_eta(self):
        p = theorem(a_lo=1.0)
        q = theorem(a_lo=1.5, a_hi=3.0)
        rho_p, vr_p = refinement_constants(p, alpha=2.0)
        rho_q, vr_q = refinement_constants(q, alpha=2.0)
        assert vr_q / vr_p == pytest.approx(1.5)
        # rho also carries 1/a_hi
        assert rho_q / rho_p == pytest.approx(1.5 * 2.0 / 3.0)

    def test_provenance_recorded(self):
        p = theorem()
        assert set(p.provenance) >= {"B", "C0", "C1", "C2", "eta"}
        assert dict(p.as_rows())["B"] == 28
