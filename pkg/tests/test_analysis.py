import numpy as np
import pytest

from aggeq import analysis
from aggeq.solver import EquilibriumResult


def result_with_aggregate(agg):
    agg = np.asarray(agg, dtype=float)
    return EquilibriumResult(profile=np.zeros((1, agg.size)), aggregate=agg,
                             duals=np.zeros(0), iterations=0, wall_time_s=0.0,
                             residual=0.0, converged=True, mode="svwe",
                             weights=np.ones(1))


def by_kind(certs):
    return {c.kind: c for c in certs}


class TestLargeGameBounds:
    def test_strong_case_values(self):
        certs = by_kind(analysis.vne_svwe_bounds(1.0, 100, alpha=2.0))
        assert certs["vne_svwe_individual"].value == pytest.approx(0.05)
        assert certs["vne_svwe_aggregate"].value == pytest.approx(0.005)
        assert certs["vne_svwe_mean"].value == pytest.approx(0.005)

    def test_one_over_n_scaling(self):
        a = by_kind(analysis.vne_svwe_bounds(1.0, 50, alpha=2.0))
        b = by_kind(analysis.vne_svwe_bounds(1.0, 200, alpha=2.0))
        assert b["vne_svwe_aggregate"].value == pytest.approx(a["vne_svwe_aggregate"].value / 4)

    def test_aggregative_case(self):
        certs = by_kind(analysis.vne_svwe_bounds(1.0, 50, beta=2.0, radius=1.0))
        assert certs["vne_svwe_aggregate_aggr"].value == pytest.approx(np.sqrt(2.0 / 100.0))
        assert not certs["vne_svwe_aggregate"].validity
        assert certs["vne_svwe_aggregate"].value == float("inf")

    def test_missing_constants_invalidate(self):
        certs = by_kind(analysis.vne_svwe_bounds(1.0, 10))
        assert all(not c.validity for c in certs.values())


class TestReductionBounds:
    def test_zero_error_constant(self):
        certs = analysis.reduction_bounds(0.0, 100, alpha=2.0, beta=0.1)
        assert all(c.value == 0.0 for c in certs if c.validity)

    def test_strong_case_values(self):
        certs = by_kind(analysis.reduction_bounds(2.5, 100, alpha=2.0))
        assert certs["reduction_individual"].value == pytest.approx(np.sqrt(125.0))
        assert certs["reduction_aggregate_strong"].value == pytest.approx(np.sqrt(1.25))

    def test_individual_grows_aggregate_flat(self):
        small = by_kind(analysis.reduction_bounds(1.0, 10, alpha=1.0))
        big = by_kind(analysis.reduction_bounds(1.0, 1000, alpha=1.0))
        assert big["reduction_individual"].value > small["reduction_individual"].value
        assert big["reduction_aggregate_strong"].value == pytest.approx(
            small["reduction_aggregate_strong"].value)

    def test_aggregative_value(self):
        certs = by_kind(analysis.reduction_bounds(0.5, 10, beta=2.0))
        assert certs["reduction_aggregate_aggr"].value == pytest.approx(0.5)


class TestCombinedBounds:
    def test_strong_is_triangle_sum(self):
        big = by_kind(analysis.combined_bounds(1.0, 100, 2.5, alpha=2.0))
        first = by_kind(analysis.vne_svwe_bounds(1.0, 100, alpha=2.0))
        second = by_kind(analysis.reduction_bounds(2.5, 100, alpha=2.0))
        assert big["combined_aggregate"].value == pytest.approx(
            first["vne_svwe_aggregate"].value + second["reduction_aggregate_strong"].value)

    def test_vanishes_in_the_exact_large_limit(self):
        cert = by_kind(analysis.combined_bounds(1.0, 10 ** 9, 0.0, alpha=2.0))
        assert cert["combined_aggregate"].value == pytest.approx(0.0, abs=1e-8)

    def test_aggregative_with_curvature_constant(self):
        certs = by_kind(analysis.combined_bounds(1.0, 50, 0.5, beta=2.0, radius=1.5,
                                                 horizon=24, agg_curvature=0.3))
        expected = 1.5 * np.sqrt(2 * 24 * 0.3 / (50 * 2.0)) + np.sqrt(0.5 / 2.0)
        assert certs["combined_aggregate_aggr"].value == pytest.approx(expected)

    def test_aggregative_fallback_flagged(self):
        certs = by_kind(analysis.combined_bounds(1.0, 50, 0.5, beta=2.0, radius=1.5))
        assert "fallback" in certs["combined_aggregate_aggr"].inputs["first_term"]


class TestSimilarityBound:
    def test_identical_players(self):
        assert analysis.similarity_bound(1.0, 1.0, 1.0, 0.0, 0.0, 1.0) == 0.0

    def test_direct_substitution(self):
        assert analysis.similarity_bound(1.0, 1.0, 1.0, 0.5, 0.0, 1.0) == pytest.approx(1.0)

    def test_monotone_in_radius(self):
        lo = analysis.similarity_bound(1.0, 1.0, 1.0, 0.1, 0.2, 1.0)
        hi = analysis.similarity_bound(1.0, 1.0, 1.0, 0.1, 0.2, 3.0)
        assert hi > lo

    def test_requires_positive_alpha(self):
        with pytest.raises(ValueError):
            analysis.similarity_bound(0.0, 1.0, 1.0, 0.1, 0.1, 1.0)


class TestRelativeAggregateError:
    def test_identical(self):
        r = result_with_aggregate([1.0, 2.0])
        assert analysis.relative_aggregate_error(r, r) == 0.0

    def test_proportional(self):
        ref = result_with_aggregate([1.0, 2.0, 2.0])
        approx = result_with_aggregate([1.02, 2.04, 2.04])
        assert analysis.relative_aggregate_error(ref, approx) == pytest.approx(0.02)

    def test_zero_reference_rejected(self):
        ref = result_with_aggregate([0.0, 0.0])
        with pytest.raises(ValueError):
            analysis.relative_aggregate_error(ref, ref)


class TestFitRate:
    def test_exact_inverse_law(self):
        xs = np.array([5.0, 10.0, 20.0, 50.0, 100.0])
        a, r2 = analysis.fit_rate(xs, 1.0 / xs)
        assert a == pytest.approx(1.0)
        assert r2 == pytest.approx(1.0)

    def test_constant_series(self):
        xs = np.array([5.0, 10.0, 20.0])
        a, r2 = analysis.fit_rate(xs, np.full(3, 0.7))
        assert a == pytest.approx(0.0)
        assert r2 == pytest.approx(1.0)

    def test_power_law_with_noise(self):
        rng = np.random.default_rng(41)
        xs = np.array([5.0, 10.0, 20.0, 50.0, 100.0])
        ys = 3.0 * xs ** -0.37 * np.exp(rng.normal(0, 0.02, xs.size))
        a, r2 = analysis.fit_rate(xs, ys)
        assert a == pytest.approx(0.37, abs=0.05)
        assert r2 > 0.95

    def test_degenerate_inputs_rejected(self):
        with pytest.raises(ValueError):
            analysis.fit_rate([1.0, 1.0, 1.0], [1.0, 2.0, 3.0])
        with pytest.raises(ValueError):
            analysis.fit_rate([1.0, 2.0], [1.0, 2.0])
