import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfx import marketstats as ms
from mfx.errors import DomainError, FitError, ParameterError
from mfx.ingest import ReturnSeries


def rs(values, pair, index=None):
    return ReturnSeries(pair, 10.0, 0, values, index=index)


class TestIndex:
    def test_zero_returns(self):
        ci = ms.currency_index("EUR", [rs(np.zeros(5), "EUR/USD"), rs(np.zeros(5), "JPY/EUR")])
        np.testing.assert_array_equal(ci.values, np.ones(5))

    def test_single_counterparty(self):
        ci = ms.currency_index("EUR", [rs([0.01, -0.01], "EUR/USD")])
        np.testing.assert_allclose(ci.values, [1.01, 1.00], atol=1e-15)

    def test_uniform_appreciation(self):
        n = 50
        basket = [rs(np.full(n, 0.01), "EUR/USD"), rs(np.full(n, -0.01), "JPY/EUR"), rs(np.full(n, 0.01), "EUR/GBP")]
        ci = ms.currency_index("EUR", basket)
        np.testing.assert_allclose(np.diff(ci.values), 0.01, atol=1e-14)

    def test_instantaneous(self):
        ci = ms.currency_index("EUR", [rs([0.01, -0.01], "EUR/USD")], cumulative=False)
        np.testing.assert_allclose(ci.values, [1.01, 0.99])

    def test_antisymmetry(self):
        r = np.random.default_rng(0).standard_normal(300) * 1e-3
        a = ms.currency_index("EUR", [rs(r, "EUR/USD")])
        b = ms.currency_index("USD", [rs(r, "EUR/USD")])
        np.testing.assert_allclose(a.values - 1, -(b.values - 1), atol=1e-12)

    def test_missing_counterparty(self):
        with pytest.raises(ParameterError, match="EUR/CHF"):
            ms.currency_index("EUR", [rs([0.0], "EUR/USD")], counterparties=["USD", "CHF"])

    def test_csv(self):
        text = ms.currency_index("EUR", [rs([0.01], "EUR/USD")]).to_csv()
        assert text.splitlines()[0] == "step,CI_EUR"


class TestCcdf:
    def test_exponential_median(self):
        x = np.random.default_rng(0).exponential(size=100_000)
        d = ms.ccdf(x, normalized=False)
        med = np.median(x)
        p = d.p[np.searchsorted(d.x, med)]
        assert abs(p - 0.5) < 0.01

    def test_ties(self):
        x = np.r_[np.ones(50), np.full(50, 2.0), [3.0]]
        d = ms.ccdf(x, normalized=False)
        np.testing.assert_array_equal(d.x, [1, 2, 3])
        np.testing.assert_allclose(d.p, [1.0, 51 / 101, 1 / 101])

    @given(st.integers(0, 1000))
    @settings(max_examples=20, deadline=None)
    def test_permutation_invariant(self, seed):
        rng = np.random.default_rng(seed)
        x = rng.standard_t(3, 300)
        a, b = ms.ccdf(x), ms.ccdf(rng.permutation(x))
        np.testing.assert_array_equal(a.x, b.x)
        np.testing.assert_array_equal(a.p, b.p)

    def test_errors(self):
        with pytest.raises(ParameterError):
            ms.ccdf(np.ones(10))
        with pytest.raises(DomainError):
            ms.ccdf(np.ones(200))

    def test_binned_subset(self):
        d = ms.ccdf(np.random.default_rng(1).standard_t(3, 20_000))
        b = d.log_binned()
        assert len(b.x) < len(d.x) and set(b.x.tolist()) <= set(d.x.tolist())


class TestTail:
    def test_exact_power_law(self):
        x = np.geomspace(1, 100, 400)
        d = ms.Ccdf(x, x ** -3.0, 400)
        fit = ms.tail_slope(d, fit_range=(1, 100))
        assert fit.gamma == pytest.approx(-3.0, abs=1e-10)

    def test_rescale_invariant(self):
        x = np.random.default_rng(2).standard_t(3, 200_000)
        a = ms.tail_slope(ms.ccdf(x, normalized=False))
        b = ms.tail_slope(ms.ccdf(7.5 * x, normalized=False))
        assert a.gamma == pytest.approx(b.gamma, abs=1e-9)

    def test_too_few_points(self):
        with pytest.raises(FitError):
            ms.tail_slope(ms.ccdf(np.random.default_rng(0).standard_normal(1000)))

    def test_json_echoes_range(self):
        fit = ms.tail_slope(ms.ccdf(np.random.default_rng(3).standard_t(3, 100_000)))
        assert '"fit_range"' in fit.to_json() and fit.n_tail >= 50


class TestExcise:
    def test_empty_window_identity(self):
        s = rs(np.arange(1.0, 11.0), "EUR/USD")
        out, gaps = ms.excise_window(s, (10 ** 9, 10 ** 9 + 5))
        assert out is s and gaps == []

    def test_full_span(self):
        s = rs(np.arange(1.0, 11.0), "EUR/USD")
        with pytest.raises(DomainError):
            ms.excise_window(s, (0, 10 ** 9))

    def test_gap_map_extends(self):
        s = rs(np.arange(1.0, 11.0), "EUR/USD")
        out, gaps = ms.excise_window(s, (3, 5), gaps=[[8, 8]], by="index")
        assert gaps == [[3, 5], [8, 8]]
        np.testing.assert_array_equal(out.index, [0, 1, 2, 6, 7, 8, 9])

    def test_outliers_move_slope_toward_cubic(self):
        rng = np.random.default_rng(5)
        x = rng.standard_t(3, 400_000)
        x[200_000:200_400] = rng.standard_normal(400) * 60
        s = rs(x, "EUR/USD")
        before = ms.tail_slope(ms.ccdf(s)).gamma
        cut, _ = ms.excise_window(s, (200_000, 200_399), by="index")
        after = ms.tail_slope(ms.ccdf(cut)).gamma
        assert abs(after + 3) < abs(before + 3)
