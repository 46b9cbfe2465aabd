import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate

from selfsim.exceptions import ParameterDomainError
from selfsim.sampling import (
    INFINITE_VARIANCE,
    ParetoParams,
    UniformSource,
    derive_seed,
    pareto_icdf,
    pareto_mean,
    pareto_pdf,
    pareto_variance,
    sample_pareto,
    truncated_mean,
)


def pareto_cdf(x, a, b):
    return 1.0 - (b / x) ** a if x >= b else 0.0


class TestPdf:
    def test_at_minimum(self):
        assert pareto_pdf(1.0, ParetoParams(1.0, 1.0)) == 1.0

    def test_below_support(self):
        assert pareto_pdf(0.5, ParetoParams(1.5, 1.0)) == 0.0

    def test_hand_value(self):
        assert pareto_pdf(2.0, ParetoParams(1.5, 1.0)) == pytest.approx(1.5 / 2**2.5, rel=1e-15)
        assert pareto_pdf(2.0, ParetoParams(1.5, 1.0)) == pytest.approx(0.265165, abs=1e-6)

    @pytest.mark.parametrize("a,b,x", [(1.5, 1.0, 2.0), (1.2, 0.3, 0.9), (3.0, 2.0, 5.0)])
    def test_matches_cdf_derivative(self, a, b, x):
        h = 1e-6 * x
        fd = (pareto_cdf(x + h, a, b) - pareto_cdf(x - h, a, b)) / (2 * h)
        assert pareto_pdf(x, ParetoParams(a, b)) == pytest.approx(fd, rel=1e-6)

    def test_integrates_to_one(self):
        p = ParetoParams(1.5, 2.0)
        total, _ = integrate.quad(lambda x: pareto_pdf(x, p), p.beta, np.inf)
        assert total == pytest.approx(1.0, rel=1e-8)

    def test_vectorised(self):
        out = pareto_pdf(np.array([0.5, 1.0, 2.0]), ParetoParams(1.5, 1.0))
        assert out[0] == 0 and out[1] == 1.5

    @pytest.mark.parametrize("a,b", [(0.0, 1.0), (-1.0, 1.0), (1.5, 0.0), (1.5, -2.0),
                                     (math.nan, 1.0)])
    def test_invalid_params(self, a, b):
        with pytest.raises(ParameterDomainError):
            ParetoParams(a, b)


class TestMean:
    @pytest.mark.parametrize("a,b,expected", [(2.0, 1.0, 2.0), (1.5, 1.0, 3.0), (1.5, 2.0, 6.0)])
    def test_values(self, a, b, expected):
        assert pareto_mean(ParetoParams(a, b)) == pytest.approx(expected, rel=1e-15)

    @pytest.mark.parametrize("a,seed", [(2.0, 11), (1.5, 12)])
    def test_monte_carlo(self, a, seed):
        x = sample_pareto(ParetoParams(a, 1.0), UniformSource(seed), size=10**6)
        assert x.mean() == pytest.approx(pareto_mean(ParetoParams(a, 1.0)), rel=0.02)

    def test_quadrature(self):
        p = ParetoParams(1.7, 0.5)
        val, _ = integrate.quad(lambda x: x * pareto_pdf(x, p), p.beta, np.inf, limit=200)
        assert pareto_mean(p) == pytest.approx(val, rel=1e-6)

    @pytest.mark.parametrize("a", [1.0, 0.5])
    def test_divergent(self, a):
        with pytest.raises(ParameterDomainError):
            pareto_mean(ParetoParams(a, 1.0))


class TestVariance:
    def test_value(self):
        assert pareto_variance(ParetoParams(3.0, 1.0)) == pytest.approx(0.75, rel=1e-15)

    def test_quadrature(self):
        p = ParetoParams(3.5, 1.0)
        mu = pareto_mean(p)
        val, _ = integrate.quad(lambda x: (x - mu) ** 2 * pareto_pdf(x, p), 1.0, np.inf)
        assert pareto_variance(p) == pytest.approx(val, rel=1e-7)

    @pytest.mark.parametrize("a", [1.5, 2.0, 1.01])
    def test_infinite_marker(self, a):
        v = pareto_variance(ParetoParams(a, 1.0))
        assert v is INFINITE_VARIANCE
        assert not isinstance(v, float)

    def test_requires_finite_mean(self):
        with pytest.raises(ParameterDomainError):
            pareto_variance(ParetoParams(0.9, 1.0))


class TestIcdf:
    @pytest.mark.parametrize("a,b", [(1.5, 1.0), (1.1, 3.0), (1.9, 0.01)])
    def test_unit_sample_gives_beta(self, a, b):
        assert pareto_icdf(1.0, ParetoParams(a, b)) == b

    def test_hand_value(self):
        assert pareto_icdf(0.25, ParetoParams(2.0, 1.0)) == 2.0

    def test_largest_value_from_smallest_s(self):
        assert pareto_icdf(2.0**-32, ParetoParams(1.0, 1.0)) == 2.0**32

    def test_via_uniform_source(self, fixed_uniform):
        assert sample_pareto(ParetoParams(2.0, 1.0), fixed_uniform(0.25)) == 2.0

    def test_inverts_cdf(self):
        p = ParetoParams(1.4, 2.0)
        for s in (0.9, 0.5, 0.01):
            x = pareto_icdf(s, p)
            # s is the survival probability P(X > x)
            assert 1 - pareto_cdf(x, p.alpha, p.beta) == pytest.approx(s, rel=1e-12)


class TestTruncatedMean:
    def test_empty_interval(self):
        assert truncated_mean(ParetoParams(1.5, 1.0), 1.0) == 0.0

    def test_hand_value(self):
        assert truncated_mean(ParetoParams(1.5, 1.0), 1e6) == pytest.approx(2.997, rel=1e-12)

    def test_limit(self):
        assert abs(truncated_mean(ParetoParams(1.5, 1.0), 1e12) - 3.0) <= 3e-6

    @pytest.mark.parametrize("a,b,w", [(1.5, 1.0, 50.0), (1.2, 0.1, 1e3), (1.9, 2.0, 7.0)])
    def test_quadrature(self, a, b, w):
        p = ParetoParams(a, b)
        val, _ = integrate.quad(lambda x: x * pareto_pdf(x, p), b, w, limit=200)
        assert truncated_mean(p, w) == pytest.approx(val, rel=1e-8)

    def test_below_beta(self):
        with pytest.raises(ParameterDomainError):
            truncated_mean(ParetoParams(1.5, 2.0), 1.0)

    @given(a=st.floats(1.05, 1.95), w1=st.floats(1.0, 1e9), w2=st.floats(1.0, 1e9))
    def test_monotone_and_below_mean(self, a, w1, w2):
        p = ParetoParams(a, 1.0)
        lo, hi = sorted((w1, w2))
        assert truncated_mean(p, lo) <= truncated_mean(p, hi)
        if hi > 1.0:
            assert truncated_mean(p, hi) < pareto_mean(p)


class TestUniformSource:
    def test_support(self):
        u = UniformSource(3, 1).uniform(200_000)
        assert u.min() > 0 and u.max() <= 1

    def test_mapping_extremes(self):
        # k = 0 maps to 2**-64, k = 2**64 - 1 maps to 1
        k = np.array([0, 2**64 - 1], dtype=np.uint64)
        s = (k.astype(np.float64) + 1.0) * 2.0**-64
        assert s[0] == 2.0**-64 and s[1] == 1.0

    def test_deterministic(self):
        a = UniformSource(42, 5).uniform(1000)
        b = UniformSource(42, 5).uniform(1000)
        assert np.array_equal(a, b)

    def test_streams_differ(self):
        a = UniformSource(42, 5).uniform(100)
        b = UniformSource(42, 6).uniform(100)
        c = UniformSource(43, 5).uniform(100)
        assert not np.array_equal(a, b) and not np.array_equal(a, c)

    def test_chunking_invariant(self):
        u = UniformSource(9, 2)
        parts = np.concatenate([u.uniform(3), u.uniform(10), [u.next()], u.uniform(50)])
        assert np.array_equal(parts, UniformSource(9, 2).uniform(64))

    def test_integers_range(self):
        v = UniformSource(1).integers(64, 1518, 100_000)
        assert v.min() == 64 and v.max() == 1518
        assert v.mean() == pytest.approx(791, rel=0.01)

    @pytest.mark.parametrize("seed,sid", [(-1, 0), (2**64, 0), (0, -1)])
    def test_bad_seed(self, seed, sid):
        with pytest.raises(ValueError):
            UniformSource(seed, sid)

    def test_derive_seed(self):
        assert derive_seed(1, 2, 3) == derive_seed(1, 2, 3)
        assert derive_seed(1, 2, 3) != derive_seed(1, 2, 4)
        assert 0 <= derive_seed(2**64 - 1, 0) < 2**64


class TestSamplerProperties:
    @settings(max_examples=30, deadline=None)
    @given(a=st.floats(1.01, 3.0), b=st.floats(1e-6, 1e6), seed=st.integers(0, 2**64 - 1))
    def test_samples_at_least_beta(self, a, b, seed):
        x = sample_pareto(ParetoParams(a, b), UniformSource(seed), size=2000)
        assert np.all(x >= b)

    def test_ccdf_slope(self):
        a = 1.5
        x = sample_pareto(ParetoParams(a, 1.0), UniformSource(2024), size=10**6)
        grid = np.logspace(1, 2, 21)
        ccdf = np.array([(x > g).mean() for g in grid])
        slope = np.polyfit(np.log10(grid), np.log10(ccdf), 1)[0]
        assert abs(slope + a) <= 0.05

    @pytest.mark.parametrize("a", [
        pytest.param(1.2, marks=pytest.mark.xfail(
            strict=True,
            reason="at 1e6 samples the maximum alone lifts the sample mean ~2% above the "
                   "Eq-9 value when alpha=1.2")),
        1.5, 1.7, 1.9,
    ])
    def test_mean_matches_truncated_mean(self, a):
        p = ParetoParams(a, 1.0)
        x = sample_pareto(p, UniformSource(77, int(a * 10)), size=10**6)
        assert x.mean() == pytest.approx(truncated_mean(p, x.max()), rel=0.02)
