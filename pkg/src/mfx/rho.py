"""q-dependent detrended cross-correlation coefficient and basket matrices."""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from itertools import combinations
from typing import Sequence

import numpy as np

from mfx import kernels
from mfx.errors import DomainError, ParameterError
from mfx.ingest import Pair, ReturnSeries, synchronize, synchronize_all
from mfx.mfcore import (DEFAULT_DEGREE, _half_power, fluctuation_from_covariances, profile,
                        scale_grid, segment)

# residual-stack budget per chunk of windows (bytes)
_CHUNK_BYTES = 32 * 2 ** 20


@dataclass
class RhoResult:
    q: float
    s: int
    value: float
    pair: tuple
    excluded: tuple = (0, 0, 0)  # zero-covariance windows: cross, auto-x, auto-y


@dataclass
class ScaleAverage:
    """Average rho over a scale grid instead of using a single scale."""

    s_grid: Sequence[int]

    def describe(self) -> dict:
        return {"average": [int(s) for s in self.s_grid]}


@dataclass
class RhoMatrix:
    labels: list
    q: float
    s_spec: int | ScaleAverage
    values: np.ndarray
    per_scale: np.ndarray | None = field(default=None, repr=False)

    def s_spec_json(self):
        return self.s_spec.describe() if isinstance(self.s_spec, ScaleAverage) else int(self.s_spec)

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "q": float(self.q),
            "s_spec": self.s_spec_json(),
            "rows": [[float(v) for v in row] for row in self.values],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.labels)
        for row in self.values:
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    @classmethod
    def from_dict(cls, d: dict) -> "RhoMatrix":
        spec = d["s_spec"]
        spec = ScaleAverage(spec["average"]) if isinstance(spec, dict) else int(spec)
        return cls(list(d["labels"]), float(d["q"]), spec, np.asarray(d["rows"], dtype=float))


def _check_q(q: float) -> None:
    if not q > 0:
        raise ParameterError(f"rho_q is defined (and bounded) for q > 0 only, got q={q}")


def _pair_values(x, y) -> tuple[np.ndarray, np.ndarray, tuple]:
    if isinstance(x, ReturnSeries) and isinstance(y, ReturnSeries):
        x, y = synchronize(x, y)
        labels = (x.pair, y.pair)
    else:
        labels = (getattr(x, "pair", "x"), getattr(y, "pair", "y"))
    xv = x.values if isinstance(x, ReturnSeries) else np.asarray(x, dtype=float)
    yv = y.values if isinstance(y, ReturnSeries) else np.asarray(y, dtype=float)
    if len(xv) != len(yv):
        raise ParameterError(f"series lengths differ: {len(xv)} != {len(yv)}")
    return xv, yv, labels


def _coefficient(fxy: float, fxx: float, fyy: float, labels, q, s) -> float:
    den = fxx * fyy
    if not (fxx > 0 and fyy > 0 and math.isfinite(den)):
        raise DomainError(f"{labels} q={q} s={s}: degenerate auto fluctuation "
                          f"(F_xx={fxx}, F_yy={fyy})")
    return fxy / math.sqrt(den)


def rho_profiles(x, y, q_grid: Sequence[float], s_grid: Sequence[int],
                 m: int = DEFAULT_DEGREE) -> dict:
    """rho_q(s) for every (q, s); covariances are computed once per scale."""
    for q in q_grid:
        _check_q(q)
    xv, yv, labels = _pair_values(x, y)
    px, py = profile(xv).values, profile(yv).values
    out = {float(q): [] for q in q_grid}
    for s in s_grid:
        s = int(s)
        segment(len(px), s, m)
        cxy = kernels.covariances(px, py, s, m)
        cxx = kernels.covariances(px, px, s, m)
        cyy = kernels.covariances(py, py, s, m)
        for q in q_grid:
            fxy, zxy = fluctuation_from_covariances(cxy, q)
            fxx, zxx = fluctuation_from_covariances(cxx, q)
            fyy, zyy = fluctuation_from_covariances(cyy, q)
            val = _coefficient(fxy, fxx, fyy, labels, q, s)
            out[float(q)].append(RhoResult(float(q), s, val, labels, (zxy, zxx, zyy)))
    return out


def rho_q(x, y, q: float, s: int, m: int = DEFAULT_DEGREE) -> RhoResult:
    """Detrended cross-correlation coefficient F_xy / sqrt(F_xx * F_yy) at one (q, s)."""
    return rho_profiles(x, y, [q], [s], m)[float(q)][0]


def rho_scale_profile(x, y, q: float, s_grid: Sequence[int], m: int = DEFAULT_DEGREE) -> list:
    return rho_profiles(x, y, [q], s_grid, m)[float(q)]


def _scale_sums(profiles: np.ndarray, s: int, m: int, q_grid: Sequence[float]) -> np.ndarray:
    """Per-q matrices of sum_k sign(C_ij,k) |C_ij,k|^(q/2) over all windows at scale s."""
    n_series, n = profiles.shape
    starts = kernels.window_starts(n, s)
    nwin = len(starts)
    chunk = max(1, min(nwin, _CHUNK_BYTES // (8 * s * n_series)))
    sums = np.zeros((len(q_grid), n_series, n_series))
    stack = np.empty((chunk, n_series, s))
    for lo in range(0, nwin, chunk):
        st = starts[lo:lo + chunk]
        k = len(st)
        for i in range(n_series):
            stack[:k, i, :] = kernels.residuals_at(profiles[i], st, s, m)
        cov = np.matmul(stack[:k], stack[:k].transpose(0, 2, 1))
        cov /= s
        sign = np.sign(cov)
        mag = np.abs(cov)
        for iq, q in enumerate(q_grid):
            sums[iq] += (sign * _half_power(mag, q)).sum(axis=0)
    return sums / nwin


def rho_matrices(basket: Sequence[ReturnSeries], q_grid: Sequence[float],
                 s_spec: int | ScaleAverage, m: int = DEFAULT_DEGREE, jobs: int = 1) -> dict:
    """rho_q matrices for several q, sharing one residual pass per scale.

    Auto fluctuations are the diagonals of the same window Gram matrices, so
    each is computed once per (q, s) and reused across its row.
    """
    q_grid = [float(q) for q in q_grid]
    for q in q_grid:
        _check_q(q)
    if len(basket) < 2:
        raise ParameterError("a basket needs at least two series")
    synced = synchronize_all(list(basket))
    labels = [s.pair for s in synced]
    n = len(synced[0])
    profiles = np.stack([profile(s).values for s in synced])
    scales = list(s_spec.s_grid) if isinstance(s_spec, ScaleAverage) else [int(s_spec)]
    for s in scales:
        segment(n, int(s), m)

    def one_scale(s):
        return _scale_sums(profiles, int(s), m, q_grid)

    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            per_scale_sums = list(pool.map(one_scale, scales))
    else:
        per_scale_sums = [one_scale(s) for s in scales]

    out = {}
    for iq, q in enumerate(q_grid):
        stack = []
        for s, sums in zip(scales, per_scale_sums):
            F = sums[iq]
            d = np.diag(F).copy()
            if np.any(d <= 0):
                bad = labels[int(np.argmin(d))]
                raise DomainError(f"{bad}: degenerate auto fluctuation at q={q}, s={s}")
            r = F / np.sqrt(np.outer(d, d))
            np.fill_diagonal(r, 1.0)
            stack.append((r + r.T) / 2.0)
        per_scale = np.stack(stack)
        values = per_scale.mean(axis=0)
        np.fill_diagonal(values, 1.0)
        out[q] = RhoMatrix(labels, q, s_spec, values, per_scale)
    return out


def rho_matrix(basket: Sequence[ReturnSeries], q: float, s_spec: int | ScaleAverage,
               m: int = DEFAULT_DEGREE, jobs: int = 1) -> RhoMatrix:
    """Pairwise rho_q at one scale, or averaged arithmetically over a scale grid."""
    return rho_matrices(basket, [q], s_spec, m, jobs)[float(q)]


def default_average(n: int, m: int = DEFAULT_DEGREE) -> ScaleAverage:
    return ScaleAverage(scale_grid(n, m).tolist())


@dataclass
class TrianglePartition:
    triangular: list   # (label_i, label_j, rho)
    non_triangular: list
    means: dict


def shares_currency(a: str, b: str) -> bool:
    """True when two exchange rates have a currency in common, on either side."""
    return bool(Pair.parse(a).currencies & Pair.parse(b).currencies)


def triangle_partition(matrix: RhoMatrix, pair_labels: Sequence[str] | None = None) -> TrianglePartition:
    """Split the off-diagonal entries by whether the two rates share a currency.

    ``means`` holds the mean |rho| of each class.
    """
    labels = list(pair_labels) if pair_labels is not None else list(matrix.labels)
    if len(labels) != len(matrix.values):
        raise ParameterError("label count does not match matrix size")
    for lab in labels:
        Pair.parse(lab)
    tri, non = [], []
    for i, j in combinations(range(len(labels)), 2):
        entry = (labels[i], labels[j], float(matrix.values[i, j]))
        (tri if shares_currency(labels[i], labels[j]) else non).append(entry)

    def mean_abs(items):
        return float(np.mean([abs(e[2]) for e in items])) if items else float("nan")

    return TrianglePartition(tri, non, {"triangular": mean_abs(tri), "non_triangular": mean_abs(non)})
