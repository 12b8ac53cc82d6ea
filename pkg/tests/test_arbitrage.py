from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfx import arbitrage, fixtures, ingest
from mfx.arbitrage import QuoteBook, TriangleSpec
from mfx.errors import DomainError, ParameterError
from mfx.ingest import QuoteSeries

from oracles import walk

AB, BC, AC = "A/B", "B/C", "A/C"


def zero_spread(ab, bc, ac):
    return (ab, ab), (bc, bc), (ac, ac)


def test_consistent_zero():
    q = zero_spread(1.10, 0.90, 0.99)
    assert abs(arbitrage.alpha1(*q)) <= 1e-15
    assert abs(arbitrage.alpha2(*q)) <= 1e-15


def test_spread_taxes_both_directions():
    half = 0.5e-4
    q = [(m * (1 - half), m * (1 + half)) for m in (1.10, 0.90, 0.99)]
    assert arbitrage.alpha1(*q) < 0 and arbitrage.alpha2(*q) < 0


def test_worked_example():
    a = arbitrage.alpha1((1.10, 1.10), (0.90, 0.90), (0.9801, 0.9801))
    assert a == pytest.approx(0.99 / 0.9801 - 1, rel=1e-14)
    oracle = walk(["A", "B", "C", "A"], {("A", "B"): (1.10, 1.10), ("B", "C"): (0.90, 0.90),
                                         ("A", "C"): (0.9801, 0.9801)})
    assert a == pytest.approx(float(oracle), rel=1e-14)


def test_reverse_direction_reciprocal():
    x = 0.01
    q = zero_spread(1.10, 0.90, 0.99 / (1 + x))
    assert arbitrage.alpha1(*q) == pytest.approx(x, rel=1e-12)
    assert arbitrage.alpha2(*q) == pytest.approx(1 / (1 + x) - 1, rel=1e-12)


def test_walk_sides():
    book = QuoteBook({"EUR/USD": (1.1, 1.2)})
    assert book.rate("EUR", "USD") == 1.1
    assert book.rate("USD", "EUR") == 1 / 1.2
    with pytest.raises(ParameterError):
        book.rate("EUR", "JPY")
    with pytest.raises(DomainError):
        QuoteBook({"EUR/USD": (0.0, 1.0)})


@given(st.lists(st.floats(0.01, 100), min_size=3, max_size=3),
       st.lists(st.floats(0, 0.01), min_size=3, max_size=3),
       st.lists(st.floats(0.5, 2), min_size=3, max_size=3))
@settings(max_examples=300)
def test_closed_forms_equal_walk(vals, spreads, distort):
    va, vb, vc = vals
    mids = [va / vb * distort[0], vb / vc * distort[1], va / vc * distort[2]]
    q = [(m, m * (1 + s)) for m, s in zip(mids, spreads)]
    quotes = {("A", "B"): q[0], ("B", "C"): q[1], ("A", "C"): q[2]}
    a1 = arbitrage.alpha1(*q)
    a2 = arbitrage.alpha2(*q)
    book = {AB: q[0], BC: q[1], AC: q[2]}
    assert a1 == pytest.approx(float(walk(list("ABCA"), quotes)), rel=1e-14, abs=1e-14)
    assert a2 == pytest.approx(float(walk(list("ACBA"), quotes)), rel=1e-14, abs=1e-14)
    assert arbitrage.cycle_product(list("ABC"), book) == pytest.approx(a1, rel=1e-14, abs=1e-14)
    assert arbitrage.cycle_product(list("ACB"), book) == pytest.approx(a2, rel=1e-14, abs=1e-14)


@given(st.lists(st.floats(0.01, 100), min_size=3, max_size=3), st.floats(0.5, 2))
@settings(max_examples=200)
def test_direction_exclusive_zero_spread(vals, distort):
    va, vb, vc = vals
    q = zero_spread(va / vb, vb / vc, va / vc * distort)
    a1, a2 = arbitrage.alpha1(*q), arbitrage.alpha2(*q)
    if a1 > 1e-12:
        assert a2 < 0
    if a2 > 1e-12:
        assert a1 < 0


@given(st.lists(st.floats(0.01, 100), min_size=3, max_size=3), st.integers(0, 2), st.floats(0, 0.01))
@settings(max_examples=200)
def test_spread_monotone(vals, leg, widen):
    va, vb, vc = vals
    mids = [va / vb, vb / vc, va / vc * 1.001]
    q = [(m * (1 - 1e-4), m * (1 + 1e-4)) for m in mids]
    wide = list(q)
    wide[leg] = (q[leg][0] * (1 - widen), q[leg][1] * (1 + widen))
    assert arbitrage.alpha1(*wide) <= arbitrage.alpha1(*q) + 1e-15
    assert arbitrage.alpha2(*wide) <= arbitrage.alpha2(*q) + 1e-15


def test_four_cycle_planted():
    vals = {"A": 1.0, "B": 0.8, "C": 1.6, "D": 0.05}
    quotes = {}
    for x, y in [("A", "B"), ("C", "B"), ("C", "D"), ("A", "D")]:
        m = vals[x] / vals[y]
        quotes[(x, y)] = (m, m)
    quotes[("C", "D")] = (quotes[("C", "D")][0] * 1.003,) * 2
    book = {f"{x}/{y}": v for (x, y), v in quotes.items()}
    got = arbitrage.cycle_product(["A", "B", "C", "D"], book)
    assert got > 0
    assert got == pytest.approx(float(walk(["A", "B", "C", "D", "A"], quotes)), rel=1e-14)
    assert abs(arbitrage.cycle_product(["A", "B", "C", "A"], {k: v for k, v in book.items()
                                                             if k != "C/D"} | {"A/C": (1 / 1.6,) * 2})) < 1e-14


def test_cycle_validation():
    with pytest.raises(ParameterError):
        arbitrage.cycle_product(["A", "B"], {AB: (1, 1)})


def test_triangle_spec():
    tri = TriangleSpec.build(["EUR", "USD", "CHF"], ["EUR/USD", "USD/CHF", "EUR/CHF"])
    assert tri.legs == (("EUR/USD", "bid"), ("USD/CHF", "bid"), ("EUR/CHF", "ask"))
    assert str(tri) == "EUR-USD-CHF"
    with pytest.raises(ParameterError):
        TriangleSpec.build(["EUR", "USD", "JPY"], ["EUR/USD"])


def grid_quotes(mids, spread=0.0):
    return {lab: QuoteSeries(lab, 10.0, 0, np.asarray(m) * (1 - spread), np.asarray(m) * (1 + spread))
            for lab, m in mids.items()}


class TestScan:
    tri = TriangleSpec.build(["A", "B", "C"], [AB, BC, AC])

    def test_consistent_no_events(self):
        rng = np.random.default_rng(0)
        v = np.exp(rng.standard_normal((3, 500)) * 0.01)
        q = grid_quotes({AB: v[0] / v[1], BC: v[1] / v[2], AC: v[0] / v[2]}, 1e-5)
        assert arbitrage.scan(self.tri, q) == []

    def test_planted_window(self):
        n = 400
        ac = np.full(n, 0.99)
        ac[100:130] = 0.99 / 1.002
        q = grid_quotes({AB: np.full(n, 1.1), BC: np.full(n, 0.9), AC: ac})
        events = arbitrage.scan(self.tri, q)
        assert len(events) == 1
        e = events[0]
        assert (e.direction, e.samples, e.start, e.end) == ("alpha1", 30, 1_000_000, 1_290_000)
        assert e.peak_alpha == pytest.approx(0.002, rel=1e-12)
        assert arbitrage.scan(self.tri, q, min_duration=31) == []
        assert arbitrage.scan(self.tri, q, threshold=0.0021) == []

    def test_shock_fixture_direction(self):
        fx = fixtures.shock_fixture()
        quotes = {lab: ingest.resample_quotes(t, fx.delta_t, lab) for lab, t in fx.ticks.items()}
        tri = TriangleSpec.build(["EUR", "USD", "CHF"], list(quotes))
        events = arbitrage.scan(tri, quotes)
        assert [(e.direction, e.samples, e.start, e.end) for e in events] == [
            (fx.direction, fx.samples, fx.start, fx.end)]
        raw = arbitrage.scan_ticks(tri, fx.ticks)
        assert [(e.direction, e.samples) for e in raw] == [(fx.direction, fx.samples)]

    def test_grid_refinement_keeps_long_events(self):
        fx = fixtures.shock_fixture(n=600, shock_at=300, shock_len=12)
        tri = TriangleSpec.build(["EUR", "USD", "CHF"], list(fx.ticks))
        for dt in (10.0, 5.0, 20.0):
            quotes = {lab: ingest.resample_quotes(t, dt, lab) for lab, t in fx.ticks.items()}
            assert len(arbitrage.scan(tri, quotes)) == 1

    def test_summary(self):
        n = 100
        ac = np.full(n, 0.99)
        ac[10:13] = ac[50:52] = 0.99 / 1.001
        events = arbitrage.scan(self.tri, grid_quotes({AB: np.full(n, 1.1), BC: np.full(n, 0.9), AC: ac}))
        csv_text = arbitrage.summary_csv(events, 10.0)
        assert csv_text.splitlines()[1].startswith("A-B-C,alpha1,2,50,")
        assert len(arbitrage.events_to_jsonl(events).splitlines()) == 2

    def test_rejects_bad_parameters(self):
        q = grid_quotes({AB: [1.0], BC: [1.0], AC: [1.0]})
        with pytest.raises(ParameterError):
            arbitrage.scan(self.tri, q, threshold=-1)
        with pytest.raises(ParameterError):
            arbitrage.scan(self.tri, q, min_duration=0)


def test_fraction_oracle_sanity():
    assert walk(["A", "B", "A"], {("A", "B"): (2, 4)}) == Fraction(1, 2) - 1 + 0
