"""Triangular (and longer) cycle products from bid/ask quotes, and opportunity scans.

Everything goes through :func:`convert`: start with one unit, and at each leg
X -> Y either sell X at the bid of X/Y, or buy Y at the ask of Y/X. The
closed-form three-leg products are kept only as cross-checks of the walk.
"""
from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from mfx.errors import DomainError, ParameterError
from mfx.ingest import Pair, QuoteSeries, Ticks

# cycle products within this of the threshold are rounding noise, not opportunities
ROUNDING_TOL = 1e-12


def _side(q, name):
    v = getattr(q, name) if not isinstance(q, tuple) else q[0 if name == "bid" else 1]
    return np.asarray(v, dtype=np.float64) if np.ndim(v) else float(v)


def _positive(*vals):
    for v in vals:
        if np.any(np.asarray(v) <= 0):
            raise DomainError("exchange rates must be positive")


def _key(label) -> Pair:
    return label if isinstance(label, Pair) else Pair.parse(str(label))


class QuoteBook:
    """Bid/ask quotes keyed by currency pair; values may be scalars or aligned arrays."""

    def __init__(self, quotes: Mapping):
        self._q = {}
        for label, q in quotes.items():
            bid, ask = _side(q, "bid"), _side(q, "ask")
            _positive(bid, ask)
            self._q[_key(label)] = (bid, ask)

    def leg(self, src: str, dst: str) -> tuple[Pair, str]:
        """Quoted pair and side used to convert ``src`` into ``dst``."""
        if Pair(src, dst) in self._q:
            return Pair(src, dst), "bid"
        if Pair(dst, src) in self._q:
            return Pair(dst, src), "ask"
        raise ParameterError(f"no quote for leg {src}->{dst}")

    def rate(self, src: str, dst: str):
        """Units of ``dst`` received per unit of ``src``."""
        pair, side = self.leg(src, dst)
        bid, ask = self._q[pair]
        return bid if side == "bid" else 1.0 / ask

    def __contains__(self, label) -> bool:
        return _key(label) in self._q


def _closed(path: Sequence[str]) -> list:
    path = [c.upper() for c in path]
    if path[0] != path[-1]:
        path.append(path[0])
    if len(set(path[:-1])) < 3 or len(set(path[:-1])) != len(path) - 1:
        raise ParameterError(f"cycle must visit at least three distinct currencies once: {path}")
    return path


def convert(amount, path: Sequence[str], book: QuoteBook):
    """Walk ``amount`` of ``path[0]`` along the path using executable sides."""
    for src, dst in zip(path[:-1], path[1:]):
        amount = amount * book.rate(src, dst)
    return amount


def cycle_product(path: Sequence[str], quotes: QuoteBook | Mapping):
    """Final amount after converting one unit around the closed path, minus one."""
    book = quotes if isinstance(quotes, QuoteBook) else QuoteBook(quotes)
    return convert(1.0, _closed(path), book) - 1.0


def alpha1(q_ab, q_bc, q_ac):
    """A -> B -> C -> A with A/B, B/C and A/C quoted: bid(A/B) * bid(B/C) / ask(A/C) - 1."""
    ab_b, bc_b, ac_a = _side(q_ab, "bid"), _side(q_bc, "bid"), _side(q_ac, "ask")
    _positive(ab_b, bc_b, ac_a)
    return ab_b * bc_b / ac_a - 1.0


def alpha2(q_ab, q_bc, q_ac):
    """A -> C -> B -> A with A/B, B/C and A/C quoted: bid(A/C) / (ask(B/C) * ask(A/B)) - 1."""
    ac_b, bc_a, ab_a = _side(q_ac, "bid"), _side(q_bc, "ask"), _side(q_ab, "ask")
    _positive(ac_b, bc_a, ab_a)
    return ac_b / bc_a / ab_a - 1.0


@dataclass(frozen=True)
class TriangleSpec:
    """Three currencies and, for the forward cycle A->B->C->A, each leg's pair and side."""

    currencies: tuple
    legs: tuple  # ((pair label, "bid"|"ask"), ...) for A->B, B->C, C->A

    @classmethod
    def build(cls, currencies: Sequence[str], available: Sequence[str]) -> "TriangleSpec":
        cur = tuple(c.upper() for c in currencies)
        if len(cur) != 3 or len(set(cur)) != 3:
            raise ParameterError(f"a triangle needs three distinct currencies: {currencies}")
        pairs = {_key(a) for a in available}
        legs = []
        for src, dst in zip(cur, cur[1:] + cur[:1]):
            if Pair(src, dst) in pairs:
                legs.append((str(Pair(src, dst)), "bid"))
            elif Pair(dst, src) in pairs:
                legs.append((str(Pair(dst, src)), "ask"))
            else:
                raise ParameterError(f"no quote series for leg {src}->{dst}")
        return cls(cur, tuple(legs))

    @property
    def pair_labels(self) -> list:
        return [lab for lab, _ in self.legs]

    def path(self, direction: str) -> list:
        a, b, c = self.currencies
        if direction == "alpha1":
            return [a, b, c, a]
        if direction == "alpha2":
            return [a, c, b, a]
        raise ParameterError(f"unknown direction {direction!r}")

    def __str__(self) -> str:
        return "-".join(self.currencies)


@dataclass
class ArbitrageEvent:
    triangle: TriangleSpec
    direction: str
    start: int
    end: int
    peak_alpha: float
    samples: int

    def to_dict(self) -> dict:
        return {
            "triangle": list(self.triangle.currencies),
            "legs": [list(leg) for leg in self.triangle.legs],
            "direction": self.direction,
            "start": int(self.start),
            "end": int(self.end),
            "peak_alpha": float(self.peak_alpha),
            "samples": int(self.samples),
        }


def _align(series: Sequence[QuoteSeries]) -> tuple[np.ndarray, list]:
    stamps = [s.timestamps for s in series]
    common = stamps[0]
    for t in stamps[1:]:
        common = np.intersect1d(common, t, assume_unique=True)
    if len(common) == 0:
        raise DomainError("quote streams do not overlap in time")
    pos = [np.searchsorted(t, common) for t in stamps]
    return common, pos


def alpha_series(triangle: TriangleSpec, quotes: Mapping[str, QuoteSeries]) -> tuple[np.ndarray, dict]:
    """Timestamps common to the three legs and the alpha1/alpha2 paths on them."""
    labels = triangle.pair_labels
    missing = [lab for lab in labels if lab not in quotes]
    if missing:
        raise ParameterError(f"missing quote series: {missing}")
    streams = [quotes[lab] for lab in labels]
    stamps, pos = _align(streams)
    book = QuoteBook({lab: (s.bid[p], s.ask[p]) for lab, s, p in zip(labels, streams, pos)})
    alphas = {d: cycle_product(triangle.path(d), book) for d in ("alpha1", "alpha2")}
    return stamps, alphas


def _events(triangle, direction, stamps, alpha, threshold, min_duration):
    above = np.concatenate([[False], alpha > threshold + ROUNDING_TOL, [False]])
    d = np.diff(above.astype(np.int8))
    starts = np.flatnonzero(d == 1)
    ends = np.flatnonzero(d == -1)
    out = []
    for a, b in zip(starts, ends):
        if b - a >= min_duration:
            out.append(ArbitrageEvent(triangle, direction, int(stamps[a]), int(stamps[b - 1]),
                                      float(alpha[a:b].max()), int(b - a)))
    return out


def scan(triangle: TriangleSpec, quotes: Mapping[str, QuoteSeries], threshold: float = 0.0,
         min_duration: int = 1) -> list:
    """Maximal runs where a cycle product exceeds ``threshold`` for >= ``min_duration`` samples."""
    if threshold < 0:
        raise ParameterError("threshold must be >= 0")
    if min_duration < 1:
        raise ParameterError("min_duration must be >= 1 sample")
    stamps, alphas = alpha_series(triangle, quotes)
    events = []
    for direction, alpha in alphas.items():
        events += _events(triangle, direction, stamps, alpha, threshold, min_duration)
    return sorted(events, key=lambda e: (e.start, e.direction))


def scan_ticks(triangle: TriangleSpec, ticks: Mapping[str, Ticks], threshold: float = 0.0,
               min_duration: int = 1) -> list:
    """Scan on the union of raw tick instants, each leg carrying its last quote forward."""
    labels = triangle.pair_labels
    missing = [lab for lab in labels if lab not in ticks]
    if missing:
        raise ParameterError(f"missing tick streams: {missing}")
    first = max(int(ticks[lab].timestamp[0]) for lab in labels)
    union = np.unique(np.concatenate([ticks[lab].timestamp for lab in labels]))
    union = union[union >= first]
    if len(union) == 0:
        raise DomainError("tick streams do not overlap in time")
    book = {}
    for lab in labels:
        t = ticks[lab]
        p = np.searchsorted(t.timestamp, union, side="right") - 1
        book[lab] = (t.bid[p], t.ask[p])
    book = QuoteBook(book)
    events = []
    for d in ("alpha1", "alpha2"):
        alpha = cycle_product(triangle.path(d), book)
        events += _events(triangle, d, union, alpha, threshold, min_duration)
    return sorted(events, key=lambda e: (e.start, e.direction))


def events_to_jsonl(events: Sequence[ArbitrageEvent]) -> str:
    return "".join(json.dumps(e.to_dict()) + "\n" for e in events)


def summary_csv(events: Sequence[ArbitrageEvent], delta_t: float) -> str:
    """Per (triangle, direction): event count, total duration in seconds, largest peak."""
    rows = {}
    for e in events:
        key = (str(e.triangle), e.direction)
        count, dur, peak = rows.get(key, (0, 0.0, float("-inf")))
        rows[key] = (count + 1, dur + e.samples * delta_t, max(peak, e.peak_alpha))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["triangle", "direction", "count", "total_duration_s", "max_peak"])
    for (tri, d), (count, dur, peak) in sorted(rows.items()):
        w.writerow([tri, d, count, f"{dur:g}", repr(peak)])
    return buf.getvalue()
