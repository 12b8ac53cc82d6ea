"""Currency indexes and tail statistics of absolute returns."""
from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, replace
from typing import Sequence

import numpy as np

from mfx.errors import DomainError, FitError, ParameterError
from mfx.ingest import Pair, ReturnSeries, normalize, synchronize_all

DEFAULT_TAIL_QUANTILES = (0.99, 0.9999)
MIN_TAIL_POINTS = 50


@dataclass
class CurrencyIndexSeries:
    currency: str
    values: np.ndarray
    t0: int
    delta_t: float
    cumulative: bool = True

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", f"CI_{self.currency}"])
        for i, v in enumerate(self.values):
            w.writerow([i, repr(float(v))])
        return buf.getvalue()


def currency_index(currency: str, returns: Sequence[ReturnSeries], n_currencies: int | None = None,
                   counterparties: Sequence[str] | None = None,
                   cumulative: bool = True) -> CurrencyIndexSeries:
    """Basket-average log-return performance of ``currency``.

    Each series involving the currency is oriented so that it rises when the
    currency appreciates (series quoted the other way round are negated).
    With ``cumulative`` the index is 1 + mean over counterparties of the
    cumulative log-return; otherwise the instantaneous returns are averaged.
    """
    a = currency.upper()
    oriented = {}
    for s in returns:
        p = Pair.parse(s.pair)
        if a not in p.currencies:
            continue
        other = p.quote if p.base == a else p.base
        if other in oriented:
            continue
        oriented[other] = s if p.base == a else s.with_values(-s.values)
    if counterparties is not None:
        for b in counterparties:
            b = b.upper()
            if b != a and b not in oriented:
                raise ParameterError(f"missing exchange rate {a}/{b} (or {b}/{a})")
    if not oriented:
        raise ParameterError(f"no exchange rate involving {a}")
    others = sorted(oriented)
    if n_currencies is None:
        n_currencies = len(others) + 1
    if len(others) != n_currencies - 1:
        raise ParameterError(f"{a}: have rates against {others}, expected {n_currencies - 1} counterparties")
    synced = synchronize_all([oriented[b] for b in others])
    total = np.sum([s.values for s in synced], axis=0)
    avg = total / (n_currencies - 1)
    values = 1.0 + (np.cumsum(avg) if cumulative else avg)
    return CurrencyIndexSeries(a, values, synced[0].t0, synced[0].delta_t, cumulative)


@dataclass
class Ccdf:
    x: np.ndarray  # distinct absolute values, ascending
    p: np.ndarray  # fraction of samples >= x
    n: int

    def __iter__(self):
        return iter(zip(self.x.tolist(), self.p.tolist()))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["abs_return", "ccdf"])
        for x, p in self:
            w.writerow([repr(x), repr(p)])
        return buf.getvalue()

    def log_binned(self, per_decade: int = 20) -> "Ccdf":
        """Thinned copy for plotting: last point in each logarithmic bin."""
        pos = self.x > 0
        lx = np.log10(self.x[pos])
        bins = np.floor(lx * per_decade)
        keep = np.flatnonzero(np.r_[bins[1:] != bins[:-1], True])
        return Ccdf(self.x[pos][keep], self.p[pos][keep], self.n)


def ccdf(returns: ReturnSeries | np.ndarray, normalized: bool = True) -> Ccdf:
    """Empirical complementary CDF of absolute (optionally standardized) returns.

    For each distinct value v the estimate is #{|r| >= v} / N, so tied samples
    collapse onto one point carrying the larger probability.
    """
    series = returns if isinstance(returns, ReturnSeries) else ReturnSeries("", 1.0, 0, returns)
    if len(series) < 100:
        raise ParameterError(f"need at least 100 returns, got {len(series)}")
    if np.all(series.values == series.values[0]):
        raise DomainError("all returns are equal; the distribution is degenerate")
    if normalized and series.normalization != "unit-variance":
        series = normalize(series)
    x = np.sort(np.abs(series.values))
    n = len(x)
    first = np.r_[True, x[1:] != x[:-1]]
    idx = np.flatnonzero(first)
    return Ccdf(x[idx], (n - idx) / n, n)


@dataclass
class TailFit:
    gamma: float
    fit_range: tuple
    n_tail: int
    intercept: float = 0.0

    def to_json(self) -> str:
        d = asdict(self)
        d["fit_range"] = list(self.fit_range)
        return json.dumps(d)


def tail_slope(dist: Ccdf, fit_range: tuple | None = None,
               quantiles: tuple = DEFAULT_TAIL_QUANTILES) -> TailFit:
    """Least-squares slope of ln P against ln |r| over the tail range.

    Without ``fit_range`` the points between the given sample quantiles are
    used, i.e. those with 1 - q_hi <= P <= 1 - q_lo.
    """
    x, p = dist.x, dist.p
    if fit_range is None:
        lo_q, hi_q = quantiles
        sel = (p <= 1.0 - lo_q + 1e-15) & (p >= 1.0 - hi_q - 1e-15) & (x > 0)
    else:
        lo, hi = fit_range
        if not 0 < lo < hi:
            raise ParameterError(f"fit range must be positive and ascending: {fit_range}")
        sel = (x >= lo) & (x <= hi)
    n_tail = int(sel.sum())
    if n_tail < MIN_TAIL_POINTS:
        raise FitError(f"only {n_tail} tail points in range (need {MIN_TAIL_POINTS})")
    lx, lp = np.log(x[sel]), np.log(p[sel])
    slope, intercept = np.polyfit(lx, lp, 1)
    return TailFit(float(slope), (float(x[sel][0]), float(x[sel][-1])), n_tail, float(intercept))


def excise_window(returns: ReturnSeries, window: tuple, gaps: list | None = None,
                  by: str = "time") -> tuple[ReturnSeries, list]:
    """Remove samples inside an inclusive window and extend the gap map.

    ``window`` holds millisecond timestamps (``by="time"``) or grid indexes
    (``by="index"``).
    """
    start, end = window
    if end < start:
        raise ParameterError(f"window end precedes start: {window}")
    keys = returns.timestamps if by == "time" else returns.index
    if by not in ("time", "index"):
        raise ParameterError(f"unknown window unit {by!r}")
    inside = (keys >= start) & (keys <= end)
    gaps = [list(g) for g in (gaps or [])]
    if not inside.any():
        return returns, gaps
    if inside.all():
        raise DomainError("window covers the whole series")
    removed = returns.index[inside]
    # contiguous runs of removed grid indexes
    breaks = np.flatnonzero(np.diff(removed) != 1)
    for a, b in zip(np.r_[0, breaks + 1], np.r_[breaks, len(removed) - 1]):
        gaps.append([int(removed[a]), int(removed[b])])
    gaps.sort()
    out = replace(returns, values=returns.values[~inside], index=returns.index[~inside])
    return out, gaps
