"""Tick parsing, regular-grid resampling, log-returns and inactivity filtering.

Timestamps are integer milliseconds (UTC). Sampling intervals are in seconds.
A :class:`ReturnSeries` keeps an integer ``index`` of grid offsets from ``t0``
so that filtered series still know which instants they cover.
"""
from __future__ import annotations

import csv
import io
import json
import logging
import math
import struct
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import IO, Iterator, Sequence

import numpy as np

from mfx.errors import DomainError, FormatError, ParameterError

logger = logging.getLogger(__name__)

CACHE_MAGIC = b"MFX1"
DEFAULT_STALE_RUN = 30


@dataclass(frozen=True)
class Pair:
    """Ordered currency pair ``base/quote``."""

    base: str
    quote: str

    @classmethod
    def parse(cls, label: str) -> "Pair":
        label = label.strip().upper()
        for sep in ("/", "_", "-"):
            if sep in label:
                base, _, quote = label.partition(sep)
                break
        else:
            if len(label) != 6:
                raise ParameterError(f"cannot parse currency pair label {label!r}")
            base, quote = label[:3], label[3:]
        if not base.isalpha() or not quote.isalpha() or base == quote:
            raise ParameterError(f"malformed currency pair label {label!r}")
        return cls(base, quote)

    def inverse(self) -> "Pair":
        return Pair(self.quote, self.base)

    @property
    def currencies(self) -> frozenset:
        return frozenset((self.base, self.quote))

    def __str__(self) -> str:
        return f"{self.base}/{self.quote}"


@dataclass(frozen=True)
class TickQuote:
    timestamp: int
    bid: float
    ask: float

    def __post_init__(self):
        if not (self.bid > 0):
            raise DomainError(f"bid must be positive, got {self.bid}")
        if self.ask < self.bid:
            raise DomainError(f"ask {self.ask} below bid {self.bid}")


@dataclass
class Ticks:
    """Columnar, time-ordered tick quotes."""

    timestamp: np.ndarray
    bid: np.ndarray
    ask: np.ndarray

    def __post_init__(self):
        self.timestamp = np.asarray(self.timestamp, dtype=np.int64)
        self.bid = np.asarray(self.bid, dtype=np.float64)
        self.ask = np.asarray(self.ask, dtype=np.float64)
        if not (len(self.timestamp) == len(self.bid) == len(self.ask)):
            raise ParameterError("tick columns differ in length")

    @classmethod
    def from_quotes(cls, quotes: Sequence[TickQuote]) -> "Ticks":
        return cls(
            [q.timestamp for q in quotes],
            [q.bid for q in quotes],
            [q.ask for q in quotes],
        )

    def __len__(self) -> int:
        return len(self.timestamp)

    def __getitem__(self, i: int) -> TickQuote:
        return TickQuote(int(self.timestamp[i]), float(self.bid[i]), float(self.ask[i]))

    def __iter__(self) -> Iterator[TickQuote]:
        for i in range(len(self)):
            yield self[i]

    @property
    def mid(self) -> np.ndarray:
        return (self.ask + self.bid) / 2.0


@dataclass(frozen=True)
class TickFormat:
    """Column layout of a delimited tick file.

    ``header=None`` detects a header row by whether the first field parses as
    an integer.
    """

    columns: tuple = ("timestamp", "ask", "bid")
    delimiter: str = ","
    header: bool | None = None
    max_bad_fraction: float = 0.01


@dataclass
class ParseReport:
    rows: int = 0
    accepted: int = 0
    malformed: int = 0
    rejected: int = 0
    reordered: bool = False
    first_bad_line: int | None = None
    bad_lines: list = field(default_factory=list)


def parse_ticks(stream: IO | str | Path, fmt: TickFormat | None = None) -> tuple[Ticks, ParseReport]:
    """Parse ``timestamp_ms,ask,bid`` rows into time-ordered ticks.

    Rows that fail to parse are *malformed*; rows that parse but violate the
    quote invariants (``bid <= 0`` or ``ask < bid``) are *rejected*. Both are
    counted in the report. More than ``fmt.max_bad_fraction`` malformed rows
    raises :class:`FormatError`.
    """
    fmt = fmt or TickFormat()
    if isinstance(stream, (str, Path)):
        with open(stream, "rb") as fh:
            return parse_ticks(fh, fmt)
    raw = stream.read()
    text = raw.decode("utf-8") if isinstance(raw, bytes) else raw

    try:
        cols = [fmt.columns.index(c) for c in ("timestamp", "ask", "bid")]
    except ValueError as exc:
        raise ParameterError(f"tick format must name timestamp, ask and bid columns: {fmt.columns}") from exc
    it, ia, ib = cols

    report = ParseReport()
    ts, asks, bids = [], [], []
    reader = csv.reader(io.StringIO(text, newline=""), delimiter=fmt.delimiter)
    for lineno, row in enumerate(reader, start=1):
        if not row or all(not c.strip() for c in row):
            continue
        if lineno == 1 and fmt.header is not False:
            if fmt.header or not row[it].strip().lstrip("-").isdigit():
                continue
        report.rows += 1
        try:
            t = int(row[it])
            a = float(row[ia])
            b = float(row[ib])
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ValueError("non-finite price")
        except (ValueError, IndexError):
            report.malformed += 1
            report.bad_lines.append(lineno)
            if report.first_bad_line is None:
                report.first_bad_line = lineno
            continue
        if b <= 0 or a < b:
            report.rejected += 1
            report.bad_lines.append(lineno)
            continue
        ts.append(t)
        asks.append(a)
        bids.append(b)

    if report.rows and report.malformed / report.rows > fmt.max_bad_fraction:
        raise FormatError(
            f"{report.malformed} of {report.rows} rows malformed "
            f"(first offending line {report.first_bad_line})"
        )
    ticks = Ticks(ts, bids, asks)
    if len(ticks) > 1 and np.any(np.diff(ticks.timestamp) < 0):
        order = np.argsort(ticks.timestamp, kind="stable")
        ticks = Ticks(ticks.timestamp[order], ticks.bid[order], ticks.ask[order])
        report.reordered = True
    report.accepted = len(ticks)
    if report.malformed or report.rejected:
        logger.info("parsed %d ticks; %d malformed, %d rejected", report.accepted, report.malformed, report.rejected)
    return ticks, report


def write_ticks(path: str | Path, ticks: Ticks, header: bool = True) -> None:
    with open(path, "w", newline="") as fh:
        if header:
            fh.write("timestamp_ms,ask,bid\n")
        for t, a, b in zip(ticks.timestamp.tolist(), ticks.ask.tolist(), ticks.bid.tolist()):
            fh.write(f"{t},{a!r},{b!r}\n")


def mid_price(q: TickQuote) -> float:
    return (q.ask + q.bid) / 2.0


@dataclass
class RateSeries:
    pair: str
    delta_t: float
    t0: int
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)


@dataclass
class QuoteSeries:
    """Bid and ask sampled on a regular grid."""

    pair: str
    delta_t: float
    t0: int
    bid: np.ndarray
    ask: np.ndarray

    @property
    def mid(self) -> RateSeries:
        return RateSeries(self.pair, self.delta_t, self.t0, (self.ask + self.bid) / 2.0)

    @property
    def timestamps(self) -> np.ndarray:
        return grid_timestamps(self.t0, self.delta_t, np.arange(len(self.bid)))


@dataclass
class ReturnSeries:
    pair: str
    delta_t: float
    t0: int
    values: np.ndarray
    normalization: str = "raw"
    index: np.ndarray | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.index is None:
            self.index = np.arange(len(self.values), dtype=np.int64)
        else:
            self.index = np.asarray(self.index, dtype=np.int64)
        if len(self.index) != len(self.values):
            raise ParameterError("index and values differ in length")

    def __len__(self) -> int:
        return len(self.values)

    @property
    def timestamps(self) -> np.ndarray:
        return grid_timestamps(self.t0, self.delta_t, self.index)

    def with_values(self, values, **changes) -> "ReturnSeries":
        return replace(self, values=np.asarray(values, dtype=np.float64), **changes)


def grid_timestamps(t0: int, delta_t: float, index: np.ndarray) -> np.ndarray:
    return t0 + np.rint(np.asarray(index, dtype=np.float64) * delta_t * 1000.0).astype(np.int64)


def _check_ticks(ticks: Ticks) -> None:
    if len(ticks) == 0:
        raise ParameterError("cannot resample an empty tick stream")
    if np.any(np.diff(ticks.timestamp) < 0):
        raise ParameterError("ticks are not time-ordered")


def resample_quotes(ticks: Ticks | Sequence[TickQuote], delta_t: float, pair: str = "") -> QuoteSeries:
    """Carry the last bid/ask at or before each grid instant ``t0 + k*delta_t``.

    The grid starts at the first tick, so there are no leading empty points,
    and ends at the last grid instant not after the last tick.
    """
    if delta_t <= 0:
        raise ParameterError(f"delta_t must be positive, got {delta_t}")
    if not isinstance(ticks, Ticks):
        ticks = Ticks.from_quotes(list(ticks))
    _check_ticks(ticks)
    t0 = int(ticks.timestamp[0])
    step_ms = delta_t * 1000.0
    count = int(np.floor((ticks.timestamp[-1] - t0) / step_ms)) + 1
    grid = grid_timestamps(t0, delta_t, np.arange(count))
    pos = np.searchsorted(ticks.timestamp, grid, side="right") - 1
    return QuoteSeries(pair, float(delta_t), t0, ticks.bid[pos].copy(), ticks.ask[pos].copy())


def resample(ticks: Ticks | Sequence[TickQuote], delta_t: float, pair: str = "",
             fill: str = "last-observation-forward") -> RateSeries:
    """Mid-price path on a regular grid (last observation carried forward)."""
    if fill != "last-observation-forward":
        raise ParameterError(f"unsupported fill policy {fill!r}")
    return resample_quotes(ticks, delta_t, pair).mid


def log_returns(series: RateSeries) -> ReturnSeries:
    v = series.values
    if len(v) < 2:
        raise ParameterError("need at least two rates to form a return")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise DomainError(f"{series.pair}: rates must be positive and finite")
    lv = np.log(v)
    return ReturnSeries(series.pair, series.delta_t, series.t0, lv[1:] - lv[:-1])


def _runs(mask: np.ndarray) -> list[tuple[int, int]]:
    """Inclusive (start, end) positions of the True runs in ``mask``."""
    if len(mask) == 0:
        return []
    d = np.diff(np.concatenate([[0], mask.astype(np.int8), [0]]))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1) - 1
    return list(zip(starts.tolist(), ends.tolist()))


def filter_inactive(series: ReturnSeries, threshold: int = DEFAULT_STALE_RUN) -> tuple[ReturnSeries, list]:
    """Drop maximal runs of >= ``threshold`` consecutive zero returns.

    Returns the filtered series and a gap map of inclusive grid-index ranges
    that were removed.
    """
    if threshold < 1:
        raise ParameterError(f"stale-run threshold must be >= 1, got {threshold}")
    keep = np.ones(len(series), dtype=bool)
    gaps = []
    for a, b in _runs(series.values == 0.0):
        if b - a + 1 >= threshold:
            keep[a:b + 1] = False
            gaps.append([int(series.index[a]), int(series.index[b])])
    out = replace(series, values=series.values[keep], index=series.index[keep])
    return out, gaps


def synchronize(a: ReturnSeries, b: ReturnSeries) -> tuple[ReturnSeries, ReturnSeries]:
    """Restrict both series to the instants present in both."""
    if a.delta_t != b.delta_t:
        raise ParameterError(f"sampling intervals differ: {a.delta_t} != {b.delta_t}")
    ta, tb = a.timestamps, b.timestamps
    if len(ta) == len(tb) and np.array_equal(ta, tb):
        return a, b
    common, ia, ib = np.intersect1d(ta, tb, assume_unique=True, return_indices=True)
    if len(common) == 0:
        raise DomainError(f"{a.pair} and {b.pair} share no time instants")
    return _take(a, ia), _take(b, ib)


def synchronize_all(basket: Sequence[ReturnSeries]) -> list[ReturnSeries]:
    """Restrict every series to the instants common to the whole basket."""
    if not basket:
        return []
    for s in basket[1:]:
        if s.delta_t != basket[0].delta_t:
            raise ParameterError(f"{s.pair}: sampling interval differs from {basket[0].pair}")
    stamps = [s.timestamps for s in basket]
    if all(len(t) == len(stamps[0]) and np.array_equal(t, stamps[0]) for t in stamps[1:]):
        return list(basket)
    common = stamps[0]
    for t in stamps[1:]:
        common = np.intersect1d(common, t, assume_unique=True)
    if len(common) == 0:
        for i in range(len(basket)):
            for j in range(i + 1, len(basket)):
                if len(np.intersect1d(stamps[i], stamps[j], assume_unique=True)) == 0:
                    raise DomainError(f"{basket[i].pair} and {basket[j].pair} share no time instants")
        raise DomainError("basket has no time instant common to all series")
    return [_take(s, np.flatnonzero(np.isin(t, common))) for s, t in zip(basket, stamps)]


def _take(series: ReturnSeries, pos: np.ndarray) -> ReturnSeries:
    return replace(series, values=series.values[pos], index=series.index[pos])


def normalize(series: ReturnSeries) -> ReturnSeries:
    """Zero-mean, unit-variance copy (population standard deviation).

    Moments use exactly rounded sums so the result does not depend on sample order.
    """
    v = series.values
    if len(v) < 2:
        raise ParameterError("need at least two returns to normalize")
    mean = math.fsum(v) / len(v)
    dev = v - mean
    sd = math.sqrt(math.fsum(dev * dev) / len(v))
    if not sd > 0:
        raise DomainError(f"{series.pair}: zero variance, cannot normalize")
    return series.with_values(dev / sd, normalization="unit-variance")


# --- on-disk formats -------------------------------------------------------

def write_returns(path: str | Path, series: ReturnSeries) -> None:
    """Binary cache: ``MFX1``, u32 label length, label, f64 delta_t, i64 t0, u64 n, n x f64."""
    label = series.pair.encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CACHE_MAGIC)
        fh.write(struct.pack("<I", len(label)))
        fh.write(label)
        fh.write(struct.pack("<dqQ", float(series.delta_t), int(series.t0), len(series)))
        fh.write(np.ascontiguousarray(series.values, dtype="<f8").tobytes())


def read_returns(path: str | Path, gaps: list | None = None) -> ReturnSeries:
    """Load a cached return series; ``gaps`` rebuilds the grid index."""
    data = Path(path).read_bytes()
    if data[:4] != CACHE_MAGIC:
        raise FormatError(f"{path}: not a return-series cache (bad magic)")
    try:
        (n_label,) = struct.unpack_from("<I", data, 4)
        off = 8 + n_label
        label = data[8:off].decode("utf-8")
        delta_t, t0, count = struct.unpack_from("<dqQ", data, off)
        off += 24
        if len(data) != off + 8 * count:
            raise FormatError(f"{path}: expected {count} values, file size disagrees")
        values = np.frombuffer(data, dtype="<f8", count=count, offset=off).astype(np.float64)
    except struct.error as exc:
        raise FormatError(f"{path}: truncated return-series cache") from exc
    index = index_from_gaps(count, gaps) if gaps else None
    return ReturnSeries(label, delta_t, t0, values, index=index)


def index_from_gaps(count: int, gaps: list) -> np.ndarray:
    """Grid indices of ``count`` kept samples given removed inclusive ranges."""
    removed = sum(int(e) - int(s) + 1 for s, e in gaps)
    keep = np.ones(count + removed, dtype=bool)
    for s, e in gaps:
        keep[int(s):int(e) + 1] = False
    return np.flatnonzero(keep).astype(np.int64)


def write_gap_map(path: str | Path, gaps: list) -> None:
    Path(path).write_text(json.dumps([[int(a), int(b)] for a, b in gaps]))


def read_gap_map(path: str | Path) -> list:
    gaps = json.loads(Path(path).read_text())
    if not isinstance(gaps, list) or any(len(g) != 2 or g[0] > g[1] for g in gaps):
        raise FormatError(f"{path}: gap map must be a list of [start, end] ranges")
    return [[int(a), int(b)] for a, b in gaps]
