"""Domain types, kernel, worst-case errors, and bound calculators."""

import json
import math
from math import gcd

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from redlat.errors import ConfigError, GuardError, NumericsError, SmoothnessError
from redlat.spaces import (
    GeneralWeights,
    GeneratingVector,
    ProductWeights,
    ReductionSchedule,
    SpaceParams,
    clamp_squared_error,
    corollary_constant,
    lattice_points,
    omega,
    omega_at_residue,
    reduced_search_space,
    scs_error_bound,
    search_space_size,
    sobolev_weight_map,
    sstar,
    tent,
    two_zeta,
    vector_from_dict,
    vector_to_dict,
    wce_dual_oracle,
    wce_dual_oracle_raw,
    wce_product,
    wce_product_raw,
    weights_from_dict,
    weights_to_dict,
)


def brute_search_space(b, m, w):
    if w >= m:
        return [1]
    return [z for z in range(1, b ** (m - w)) if gcd(z, b ** m) == 1]


class TestSearchSpace:
    def test_counts_by_enumeration(self):
        # size 18 for (b=3, m=4, w=1): integers in [1, 27) coprime to 3
        assert len(brute_search_space(3, 4, 1)) == 18
        assert reduced_search_space(3, 4, 1).size == 18

    def test_degenerate_w_at_least_m(self):
        assert reduced_search_space(2, 3, 3).tolist() == [1]
        assert reduced_search_space(2, 3, 7).tolist() == [1]

    def test_odd_residues(self):
        assert reduced_search_space(2, 3, 0).tolist() == [1, 3, 5, 7]

    @pytest.mark.parametrize("b", [2, 3, 5])
    def test_cardinality_formula(self, b):
        for m in range(1, 9):
            for w in range(0, m):
                zs = reduced_search_space(b, m, w)
                assert zs.tolist() == brute_search_space(b, m, w)
                assert zs.size == b ** (m - w - 1) * (b - 1)
                assert search_space_size(b, m, w) == zs.size


class TestSstar:
    def test_log_families(self):
        # the largest j with floor(c*log_b j) < m
        sched = ReductionSchedule.log_family(2, 2000, 1.5)
        assert sstar(sched, 10) == 101
        sched = ReductionSchedule.log_family(2, 2000, 3.0)
        assert sstar(sched, 10) == 10
        assert sstar(sched, 20) == 101

    def test_all_below(self):
        sched = ReductionSchedule.zeros(3, 50)
        assert sstar(sched, 1) == 50

    def test_none_below(self):
        sched = ReductionSchedule(2, (3, 3, 4))
        assert sstar(sched, 3) == 0

    def test_monotonicity_required(self):
        with pytest.raises(ConfigError):
            ReductionSchedule(2, (1, 0))


class TestOmega:
    def test_endpoints(self):
        assert omega(0.0) == pytest.approx(math.pi ** 2 / 3, rel=1e-15)
        assert omega(0.5) == pytest.approx(-math.pi ** 2 / 6, rel=1e-15)

    def test_mirror_pair(self):
        assert omega(0.25) == pytest.approx(omega(0.75), rel=1e-15)

    def test_symmetry_random(self):
        rng = np.random.default_rng(42)
        x = rng.uniform(0.0, 1.0, size=10_000)
        np.testing.assert_allclose(omega(x), omega(1.0 - x), rtol=5e-15, atol=1e-14)

    def test_residue_folding_is_exact(self):
        # folded evaluation makes mirrored residues bitwise identical
        for N in (8, 27, 125):
            r = np.arange(1, N)
            a = omega_at_residue(r, N)
            b = omega_at_residue(N - r, N)
            assert np.array_equal(a, b)

    def test_unsupported_alpha(self):
        with pytest.raises(SmoothnessError):
            omega(0.3, alpha=3.0)


class TestWceProduct:
    def test_one_dim_analytic(self):
        # dual lattice of z=1, N=4 is 4Z \ {0}: e^2 = 2*zeta(2)/16 = pi^2/48
        params = SpaceParams(2, 2, 2.0, ProductWeights((1.0,)))
        vec = GeneratingVector(2, 2, (0,), (1,))
        assert wce_product(vec, params) == pytest.approx(math.pi ** 2 / 48, rel=1e-12)

    def test_zero_weights_limit(self):
        params = SpaceParams(3, 3, 2.0, ProductWeights((1e-300, 1e-300)))
        vec = GeneratingVector(3, 3, (0, 0), (1, 5))
        assert wce_product(vec, params) == pytest.approx(0.0, abs=1e-290)

    def test_permutation_invariance_1d(self):
        # any z coprime to N permutes the point set {k/N}
        params = SpaceParams(3, 3, 2.0, ProductWeights((0.8,)))
        vals = [
            wce_product_raw([z], params)
            for z in reduced_search_space(3, 3, 0)
        ]
        np.testing.assert_allclose(vals, vals[0], rtol=1e-12)

    def test_rejects_general_weights(self):
        gw = GeneralWeights(((frozenset({1}), 0.5),))
        params = SpaceParams(2, 3, 2.0, gw)
        with pytest.raises(ConfigError):
            wce_product_raw([1], params)

    def test_negative_clamp_guard(self):
        with pytest.raises(NumericsError):
            clamp_squared_error(-1e-9, "test")
        assert clamp_squared_error(-1e-14, "test") == 0.0


class TestDualOracle:
    def test_one_dim_converges_to_analytic(self):
        params = SpaceParams(2, 2, 2.0, ProductWeights((1.0,)))
        vec = GeneratingVector(2, 2, (0,), (1,))
        target = math.pi ** 2 / 48
        prev = 0.0
        for H in (16, 64, 256, 1024, 4096):
            val = wce_dual_oracle(vec, params, H)
            assert prev <= val + 1e-15
            assert val <= target + 1e-12
            prev = val
        assert prev == pytest.approx(target, rel=1e-3)

    def test_two_dim_matches_product_formula(self):
        # the truncated sum has an O(N/H) tail; completing it from the
        # H and 2H values recovers the closed form at the tight tolerance
        gammas = ProductWeights((1.0, 0.5))
        params = SpaceParams(2, 3, 2.0, gammas)
        vec = GeneratingVector(2, 3, (0, 0), (1, 3))
        closed = wce_product(vec, params)
        half = wce_dual_oracle(vec, params, 1000)
        trunc = wce_dual_oracle(vec, params, 2000)
        assert half <= trunc <= closed + 1e-12
        assert trunc == pytest.approx(closed, rel=3e-3)
        assert 2 * trunc - half == pytest.approx(closed, rel=1e-4)

    def test_monotone_from_below_band(self):
        gammas = ProductWeights((0.9, 0.4))
        for b, m in ((2, 4), (2, 6), (3, 3)):
            params = SpaceParams(b, m, 2.0, gammas)
            vec = GeneratingVector(b, m, (0, 0), (1, b + 1))
            closed = wce_product(vec, params)
            lo = wce_dual_oracle(vec, params, 200)
            hi = wce_dual_oracle(vec, params, 400)
            assert lo <= hi + 1e-15
            assert hi <= closed + 1e-12
            assert closed - hi <= closed - lo + 1e-15

    def test_general_weights_zero_map(self):
        gw = GeneralWeights(())
        params = SpaceParams(2, 3, 2.0, gw)
        assert wce_dual_oracle_raw([1, 3], params, 50) == 0.0

    def test_general_vs_product_subsets(self):
        # explicit map replicating product weights must agree
        g1, g2 = 0.9, 0.5
        gw = GeneralWeights(
            (
                (frozenset({1}), g1),
                (frozenset({2}), g2),
                (frozenset({1, 2}), g1 * g2),
            )
        )
        pw = ProductWeights((g1, g2))
        pg = SpaceParams(2, 4, 2.0, gw)
        pp = SpaceParams(2, 4, 2.0, pw)
        assert wce_dual_oracle_raw([1, 7], pg, 100) == pytest.approx(
            wce_dual_oracle_raw([1, 7], pp, 100), rel=1e-13
        )

    def test_dimension_guard(self):
        params = SpaceParams(2, 3, 2.0, ProductWeights((1.0,) * 5))
        with pytest.raises(GuardError):
            wce_dual_oracle_raw([1, 3, 5, 7, 1], params, 10)

    def test_alpha_three_supported(self):
        params = SpaceParams(2, 2, 3.0, ProductWeights((1.0,)))
        # multiples of 4: 2 * zeta(3) / 64
        target = 2 * float(two_zeta(3.0)) / 2 / 64
        assert wce_dual_oracle_raw([1], params, 4000) == pytest.approx(
            target, rel=1e-6
        )


def subset_bound_brute(params, schedule, lam):
    """Independent subset enumeration of the construction bound."""
    s = schedule.s
    gam = params.weights.first(s)
    k = two_zeta(params.alpha * lam)
    total = 0.0
    for d in range(1, s + 1):
        for mask in range(1, 1 << s):
            u = [j + 1 for j in range(s) if mask >> j & 1]
            if d not in u:
                continue
            gamma_u = np.prod([gam[j - 1] for j in u]) ** lam
            total += (
                gamma_u
                * 2.0
                * k ** len(u)
                / params.b ** max(0, params.m - schedule.w[d - 1])
            )
    return total ** (1.0 / lam)


class TestBounds:
    def test_single_dim_value(self):
        # s=1, b=2, m=3, gamma=1, w=0, lam=1: 4*zeta(2)/8 = pi^2/12
        params = SpaceParams(2, 3, 2.0, ProductWeights((1.0,)))
        sched = ReductionSchedule(2, (0,))
        assert scs_error_bound(params, sched, 1.0) == pytest.approx(
            math.pi ** 2 / 12, rel=1e-12
        )

    def test_w_at_least_m_denominators(self):
        params = SpaceParams(2, 2, 2.0, ProductWeights((0.5, 0.5)))
        sched = ReductionSchedule(2, (3, 4))
        got = scs_error_bound(params, sched, 1.0)
        assert got == pytest.approx(subset_bound_brute(params, sched, 1.0), rel=1e-12)

    def test_factorized_matches_enumeration(self):
        params = SpaceParams(2, 4, 2.0, ProductWeights((0.5, 0.5, 0.25)))
        sched = ReductionSchedule(2, (0, 1, 1))
        for lam in (0.6, 0.8, 1.0):
            assert scs_error_bound(params, sched, lam) == pytest.approx(
                subset_bound_brute(params, sched, lam), rel=1e-12
            )

    def test_general_weights_path(self):
        gw = GeneralWeights(
            ((frozenset({1}), 0.5), (frozenset({2}), 0.5), (frozenset({1, 2}), 0.25))
        )
        pw = ProductWeights((0.5, 0.5))
        sched = ReductionSchedule(2, (0, 1))
        bg = scs_error_bound(SpaceParams(2, 4, 2.0, gw), sched, 1.0)
        bp = scs_error_bound(SpaceParams(2, 4, 2.0, pw), sched, 1.0)
        assert bg == pytest.approx(bp, rel=1e-12)

    def test_lambda_validation(self):
        params = SpaceParams(2, 3, 2.0, ProductWeights((1.0,)))
        sched = ReductionSchedule(2, (0,))
        for lam in (0.5, 0.0, 1.1):
            with pytest.raises(ConfigError):
                scs_error_bound(params, sched, lam)


class TestCorollaryConstant:
    def test_single_subset_value(self):
        # (2 * 2*zeta(2))^(1/2) at s=1, gamma=1, w=0, b=2, alpha=2, delta=1/2
        params = SpaceParams(2, 3, 2.0, ProductWeights((1.0,)))
        sched = ReductionSchedule(2, (0,))
        got = corollary_constant(params, sched, 0.5, mode="general")
        assert got == pytest.approx((2.0 * two_zeta(2.0)) ** 0.5, rel=1e-12)

    def test_vanishing_weights(self):
        params = SpaceParams(2, 3, 2.0, ProductWeights((1e-200, 1e-200)))
        sched = ReductionSchedule(2, (0, 0))
        assert corollary_constant(params, sched, 0.5, mode="product") < 1e-50

    def test_modes_agree_for_equal_weights(self):
        # with equal product weights the relaxed product form is exact
        params = SpaceParams(2, 4, 2.0, ProductWeights((0.5, 0.5, 0.5)))
        sched = ReductionSchedule(2, (0, 1, 2))
        cg = corollary_constant(params, sched, 0.25, mode="general")
        cp = corollary_constant(params, sched, 0.25, mode="product")
        assert cg == pytest.approx(cp, rel=1e-12)

    def test_general_below_product_for_decaying(self):
        params = SpaceParams(2, 4, 2.0, ProductWeights((0.9, 0.5, 0.1)))
        sched = ReductionSchedule(2, (0, 0, 1))
        cg = corollary_constant(params, sched, 0.25, mode="general")
        cp = corollary_constant(params, sched, 0.25, mode="product")
        assert cg <= cp * (1 + 1e-12)

    def test_delta_validation(self):
        params = SpaceParams(2, 3, 2.0, ProductWeights((1.0,)))
        sched = ReductionSchedule(2, (0,))
        for delta in (0.0, 0.51, -0.1):
            with pytest.raises(ConfigError):
                corollary_constant(params, sched, delta)


class TestLatticePoints:
    def test_one_dim_quarter_grid(self):
        vec = GeneratingVector(2, 2, (0,), (1,))
        np.testing.assert_allclose(
            lattice_points(vec).ravel(), [0.0, 0.25, 0.5, 0.75]
        )

    def test_two_dim_component(self):
        vec = GeneratingVector(2, 3, (0, 0), (1, 3))
        pts = lattice_points(vec)
        # point n=5: (5/8, 5*3 mod 8 = 7 -> 7/8)
        np.testing.assert_allclose(pts[5], [5 / 8, 7 / 8])

    def test_tent_values(self):
        assert tent(0.25) == pytest.approx(0.5)
        assert tent(0.5) == pytest.approx(1.0)
        assert tent(0.0) == pytest.approx(0.0)
        vec = GeneratingVector(2, 2, (0,), (1,))
        np.testing.assert_allclose(
            lattice_points(vec, tent_transform=True).ravel(), [0.0, 0.5, 1.0, 0.5]
        )


class TestSobolevMap:
    def test_product_scaling(self):
        w = sobolev_weight_map(ProductWeights((1.0, 1.0)), 2 * math.pi ** 2)
        assert w.gammas == pytest.approx((2 * math.pi ** 2,) * 2)

    def test_identity(self):
        w0 = ProductWeights((0.3, 0.2))
        assert sobolev_weight_map(w0, 1.0).gammas == w0.gammas

    def test_general_subset_power(self):
        gw = GeneralWeights(((frozenset({1, 2}), 0.5),))
        out = sobolev_weight_map(gw, math.pi ** 2)
        assert out.terms[0][1] == pytest.approx(0.5 * math.pi ** 4, rel=1e-15)


class TestSerialization:
    def test_vector_round_trip(self):
        vec = GeneratingVector(3, 4, (0, 1, 2), (5, 11, 2))
        d = vector_to_dict(vec, 2.0)
        assert d["effective"] == list(vec.effective)
        back = vector_from_dict(json.loads(json.dumps(d)))
        assert back == vec

    def test_effective_consistency_checked(self):
        vec = GeneratingVector(3, 4, (0, 1), (5, 11))
        d = vector_to_dict(vec, 2.0)
        d["effective"][0] += 1
        with pytest.raises(ConfigError):
            vector_from_dict(d)

    def test_weights_round_trip(self):
        for w in (
            ProductWeights((0.5, 0.25)),
            GeneralWeights(((frozenset({1, 3}), 0.5), (frozenset({2}), 1.5))),
        ):
            d = json.loads(json.dumps(weights_to_dict(w)))
            assert weights_from_dict(d) == w

    def test_vector_invariants_enforced(self):
        with pytest.raises(ConfigError):
            GeneratingVector(2, 3, (0,), (4,))  # even residue
        with pytest.raises(ConfigError):
            GeneratingVector(2, 3, (3,), (3,))  # z must be 1 when w >= m
        with pytest.raises(ConfigError):
            GeneratingVector(2, 3, (1,), (5,))  # above b^(m-w)


@given(
    b=st.sampled_from([2, 3, 5]),
    m=st.integers(min_value=1, max_value=6),
    data=st.data(),
)
@settings(max_examples=60, deadline=None)
def test_search_space_members_are_units(b, m, data):
    w = data.draw(st.integers(min_value=0, max_value=m - 1))
    zs = reduced_search_space(b, m, w)
    assert all(gcd(int(z), b ** m) == 1 for z in zs)
    assert all(1 <= int(z) < b ** (m - w) for z in zs)
    assert np.all(np.diff(zs) > 0)
