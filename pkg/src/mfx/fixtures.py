"""Deterministic synthetic tick data for demos, tests and the CLI ``fixture`` command."""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Sequence

import numpy as np

from mfx.ingest import Pair, Ticks
from mfx.surrogate import rng_for

T0_MS = 1_420_070_400_000  # 2015-01-01T00:00:00Z


def _quote(mid: np.ndarray, spread: float) -> tuple[np.ndarray, np.ndarray]:
    half = spread / 2.0
    return mid * (1.0 - half), mid * (1.0 + half)


def synthetic_basket(currencies: Sequence[str] = ("EUR", "USD", "JPY"), pairs: Sequence[str] | None = None,
                     n_seconds: int = 200_000, mean_gap_s: float = 4.0, spread: float = 2e-4,
                     vol: float = 2e-5, common: float = 0.6, seed: int = 0) -> dict:
    """Tick streams for pairs quoted off one vector of currency valuations.

    Log-valuations follow correlated random walks on a 1 s clock (a common
    factor with loading ``common``); each pair gets its own Poisson tick
    arrivals. Mid rates are therefore triangularly consistent at every instant.
    """
    rng = rng_for(seed)
    cur = [c.upper() for c in currencies]
    if pairs is None:
        pairs = [f"{a}/{b}" for a, b in combinations(cur, 2)]
    factor = rng.standard_normal(n_seconds)
    logv = {}
    for c in cur:
        idio = rng.standard_normal(n_seconds)
        steps = vol * (common * factor + np.sqrt(1 - common ** 2) * idio)
        logv[c] = np.cumsum(steps) + rng.uniform(-0.5, 0.5)
    out = {}
    for label in pairs:
        p = Pair.parse(label)
        gaps = rng.exponential(mean_gap_s, size=int(2 * n_seconds / mean_gap_s) + 10)
        t = np.concatenate([[0.0], np.cumsum(gaps)])
        t = t[t < n_seconds - 1]
        sec = t.astype(np.int64)
        mid = np.exp(logv[p.base][sec] - logv[p.quote][sec])
        bid, ask = _quote(mid, spread)
        stamps = T0_MS + np.rint(t * 1000.0).astype(np.int64)
        out[str(p)] = Ticks(stamps, bid, ask)
    return out


@dataclass
class PlantedShock:
    ticks: dict
    delta_t: float
    direction: str
    start: int
    end: int
    samples: int
    quotes_during: dict  # pair -> (bid, ask) while the shock is live


def shock_fixture(n: int = 300, shock_at: int = 150, shock_len: int = 5, jump: float = 0.15,
                  spread: float = 2e-4, delta_t: float = 10.0) -> PlantedShock:
    """EUR/USD, USD/CHF, EUR/CHF with a franc shock that hits EUR/CHF first.

    One tick per pair per grid instant. At ``shock_at`` EUR/CHF drops by
    ``jump``; ``shock_len`` samples later USD/CHF follows and the cycle is
    consistent again. The only opportunity is EUR -> USD -> CHF -> EUR.
    """
    step = int(delta_t * 1000)
    stamps = T0_MS + np.arange(n, dtype=np.int64) * step
    k = np.arange(n)
    eurusd = np.full(n, 1.10)
    usdchf = np.where(k >= shock_at + shock_len, 0.90 * (1 - jump), 0.90)
    eurchf = np.where(k >= shock_at, 0.99 * (1 - jump), 0.99)
    ticks, during = {}, {}
    for label, mid in (("EUR/USD", eurusd), ("USD/CHF", usdchf), ("EUR/CHF", eurchf)):
        bid, ask = _quote(mid, spread)
        ticks[label] = Ticks(stamps, bid, ask)
        during[label] = (float(bid[shock_at]), float(ask[shock_at]))
    return PlantedShock(ticks, delta_t, "alpha1", int(stamps[shock_at]),
                        int(stamps[shock_at + shock_len - 1]), shock_len, during)
