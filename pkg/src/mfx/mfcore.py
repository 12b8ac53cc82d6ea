"""Detrended fluctuation engine: profiles, segmentation, MFDFA/MFCCA surfaces and scaling fits.

The fluctuation function stored for ``q != 0`` is the un-rooted average

    F(q, s) = 1/(2M) * sum_k sign(C_k) * |C_k|**(q/2)

over the 2M windows at scale ``s``; for ``q == 0`` the stored value is already
the rooted logarithmic average. Scaling exponents are fitted to the rooted
values ``F(q, s)**(1/q)``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from mfx import kernels
from mfx.errors import DegenerateScaleError, FitError, ParameterError
from mfx.ingest import ReturnSeries

DEFAULT_DEGREE = 2
MAX_DEGREE = 5
SCALES_PER_DECADE = 24
MIN_SCALE = 20


@dataclass
class Profile:
    values: np.ndarray
    source: str = ""

    def __len__(self) -> int:
        return len(self.values)


@dataclass
class SegmentationPlan:
    n: int
    s: int
    m: int
    M: int
    windows: list  # inclusive (start, end) index pairs

    @property
    def starts(self) -> np.ndarray:
        return np.array([w[0] for w in self.windows], dtype=np.int64)


@dataclass
class FluctuationSurface:
    q_grid: np.ndarray
    s_grid: np.ndarray
    F: np.ndarray  # shape (len(q_grid), len(s_grid))
    kind: str = "cross"
    m: int = DEFAULT_DEGREE
    pair_x: str = ""
    pair_y: str = ""
    excluded_window_counts: np.ndarray | None = None

    def row(self, q: float) -> np.ndarray:
        return self.F[_q_index(self.q_grid, q)]

    def to_dict(self) -> dict:
        return {
            "pair_x": self.pair_x,
            "pair_y": self.pair_y,
            "m": int(self.m),
            "q_grid": [float(q) for q in self.q_grid],
            "s_grid": [int(s) for s in self.s_grid],
            "F": [float(v) for v in np.asarray(self.F).ravel()],
            "kind": self.kind,
            "excluded_window_counts": [int(c) for c in self.excluded_window_counts]
            if self.excluded_window_counts is not None else [],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, d: dict) -> "FluctuationSurface":
        q = np.asarray(d["q_grid"], dtype=float)
        s = np.asarray(d["s_grid"], dtype=np.int64)
        F = np.asarray(d["F"], dtype=float).reshape(len(q), len(s))
        exc = d.get("excluded_window_counts")
        return cls(q, s, F, d["kind"], d["m"], d.get("pair_x", ""), d.get("pair_y", ""),
                   np.asarray(exc, dtype=np.int64) if exc else None)


@dataclass
class ScalingFit:
    q: float
    exponent: float
    fit_range: tuple
    r_squared: float
    intercept: float = 0.0
    n_points: int = 0
    n_excluded: int = 0

    def to_dict(self) -> dict:
        d = asdict(self)
        d["fit_range"] = [int(v) for v in self.fit_range]
        return d


def fits_to_json(fits: Sequence[ScalingFit]) -> str:
    return json.dumps([f.to_dict() for f in fits])


def profile(series: ReturnSeries | np.ndarray) -> Profile:
    """Partial sums of the returns; the mean is deliberately not removed."""
    if isinstance(series, ReturnSeries):
        values, label = series.values, series.pair
    else:
        values, label = np.asarray(series, dtype=np.float64), ""
    if len(values) < 1:
        raise ParameterError("cannot profile an empty series")
    return Profile(kernels.cumsum(values), label)


def segment(n: int, s: int, m: int = DEFAULT_DEGREE, strict: bool = True) -> SegmentationPlan:
    """Two tilings of ``int(n/s)`` windows each: from the start and from the end.

    With ``strict`` the scale must satisfy ``s < n/5``.
    """
    s, n, m = int(s), int(n), int(m)
    if not 1 <= m <= MAX_DEGREE:
        raise ParameterError(f"detrending degree m={m} outside 1..{MAX_DEGREE}")
    if s < m + 2:
        raise ParameterError(f"scale s={s} must be >= m + 2 = {m + 2}")
    if strict and not s < n / 5:
        raise ParameterError(f"scale s={s} must be < n/5 = {n / 5:g}")
    if s > n:
        raise ParameterError(f"scale s={s} exceeds series length {n}")
    M = n // s
    windows = [(k * s, k * s + s - 1) for k in range(M)]
    windows += [(n - (k + 1) * s, n - k * s - 1) for k in range(M)]
    return SegmentationPlan(n, s, m, M, windows)


def _values(p) -> np.ndarray:
    return p.values if isinstance(p, Profile) else np.asarray(p, dtype=np.float64)


def detrended_covariance(x: Profile, y: Profile, plan: SegmentationPlan, k: int) -> float:
    """Covariance of the degree-m detrended residuals of ``x`` and ``y`` in window ``k``."""
    xv, yv = _values(x), _values(y)
    if len(xv) != len(yv) or len(xv) != plan.n:
        raise ParameterError("profiles must match the plan length")
    if not 0 <= k < 2 * plan.M:
        raise ParameterError(f"window index {k} outside 0..{2 * plan.M - 1}")
    start = np.array([plan.windows[k][0]], dtype=np.int64)
    basis = kernels.poly_basis(plan.s, plan.m)
    xv = np.ascontiguousarray(xv, dtype=np.float64)
    yv = xv if (x is y) else np.ascontiguousarray(yv, dtype=np.float64)
    return float(kernels._impl.covariances(xv, yv, start, plan.s, basis)[0])


def window_covariances(x, y, s: int, m: int = DEFAULT_DEGREE, strict: bool = True) -> np.ndarray:
    """All 2M window covariances at scale ``s``."""
    xv = _values(x)
    yv = xv if x is y else _values(y)
    segment(len(xv), s, m, strict=strict)
    return kernels.covariances(xv, yv, int(s), int(m))


def _half_power(a: np.ndarray, q: float) -> np.ndarray:
    h = q / 2.0
    if h == 1.0:
        return a
    if h == 0.5:
        return np.sqrt(a)
    if h == 2.0:
        return a * a
    if h == 1.5:
        return a * np.sqrt(a)
    if h == 0.25:
        return np.sqrt(np.sqrt(a))
    return np.power(a, h)


def fluctuation_from_covariances(c: np.ndarray, q: float) -> tuple[float, int]:
    """Reduce window covariances to F(q, s); also returns the zero-window count.

    Zero covariances contribute nothing for ``q > 0`` and are left out of the
    average for ``q <= 0``.
    """
    c = np.asarray(c, dtype=np.float64)
    nwin = len(c)
    zero = c == 0.0
    nzero = int(zero.sum())
    if q == 0:
        if nzero == nwin:
            raise DegenerateScaleError(f"all {nwin} window covariances are zero")
        sgn = np.sign(np.sign(c).sum())
        logs = np.log(np.abs(c[~zero]))
        return float(sgn * math.exp(0.5 * logs.sum() / len(logs))), nzero
    sign = np.sign(c)
    if q > 0:
        terms = sign * _half_power(np.abs(c), q)
        return float(terms.sum() / nwin), nzero
    if nzero == nwin:
        raise DegenerateScaleError(f"all {nwin} window covariances are zero")
    nz = c[~zero]
    terms = np.sign(nz) * np.power(np.abs(nz), q / 2.0)
    return float(terms.sum() / len(nz)), nzero


def fluctuation(x, y, q: float, s: int, m: int = DEFAULT_DEGREE) -> float:
    """Fluctuation function of order ``q`` at scale ``s``."""
    value, _ = fluctuation_from_covariances(window_covariances(x, y, s, m), q)
    return value


def fluctuation_surface(x, y, q_grid: Sequence[float], s_grid: Sequence[int],
                        m: int = DEFAULT_DEGREE) -> FluctuationSurface:
    """F(q, s) over a grid; covariances are computed once per scale and reused for every q."""
    q_grid = np.asarray(q_grid, dtype=np.float64)
    s_grid = np.asarray(s_grid, dtype=np.int64)
    if q_grid.size == 0 or s_grid.size == 0:
        raise ParameterError("q and s grids must be non-empty")
    if np.any(np.diff(s_grid) <= 0):
        raise ParameterError("s grid must be strictly ascending")
    F = np.empty((len(q_grid), len(s_grid)))
    excluded = np.zeros(len(s_grid), dtype=np.int64)
    for j, s in enumerate(s_grid):
        c = window_covariances(x, y, int(s), m)
        for i, q in enumerate(q_grid):
            F[i, j], excluded[j] = fluctuation_from_covariances(c, float(q))
    kind = "auto-X" if x is y else "cross"
    return FluctuationSurface(q_grid, s_grid, F, kind, int(m),
                              getattr(x, "source", ""), getattr(y, "source", ""), excluded)


def scale_grid(n: int, m: int = DEFAULT_DEGREE, per_decade: int = SCALES_PER_DECADE,
               s_min: int | None = None, s_max: int | None = None,
               count: int | None = None) -> np.ndarray:
    """Geometric integer scales in ``[max(m+2, 20), n/5)``.

    ``count`` fixes the number of scales instead of the density per decade.
    Rounding can merge neighbouring small scales, so the result may be shorter.
    """
    lo = max(m + 2, MIN_SCALE) if s_min is None else int(s_min)
    hi_limit = math.ceil(n / 5) - 1  # largest integer strictly below n/5
    hi = hi_limit if s_max is None else min(int(s_max), hi_limit)
    if hi < lo:
        raise ParameterError(f"series of length {n} admits no scale in [{lo}, n/5)")
    if count is None:
        count = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    grid = np.unique(np.rint(np.geomspace(lo, hi, count)).astype(np.int64))
    return grid


def _q_index(q_grid: np.ndarray, q: float) -> int:
    hits = np.flatnonzero(np.isclose(q_grid, q, rtol=0, atol=1e-12))
    if len(hits) == 0:
        raise ParameterError(f"q={q} not in surface grid {list(q_grid)}")
    return int(hits[0])


def default_fit_range(s_grid: Sequence[int], keep: float = 0.8) -> tuple[int, int]:
    """Central ``keep`` fraction of the available log-scale span."""
    ls = np.log(np.asarray(s_grid, dtype=float))
    trim = (ls[-1] - ls[0]) * (1.0 - keep) / 2.0
    inside = (ls >= ls[0] + trim - 1e-12) & (ls <= ls[-1] - trim + 1e-12)
    chosen = np.asarray(s_grid)[inside]
    return int(chosen[0]), int(chosen[-1])


def rooted(values: np.ndarray, q: float) -> np.ndarray:
    """``F**(1/q)`` with non-positive entries mapped to nan (q=0 values are already rooted)."""
    values = np.asarray(values, dtype=float)
    out = np.full(values.shape, np.nan)
    ok = values > 0
    out[ok] = values[ok] if q == 0 else values[ok] ** (1.0 / q)
    return out


def fit_scaling(surface: FluctuationSurface, q: float, fit_range: tuple | None = None) -> ScalingFit:
    """Least-squares slope of ln F(q,s)**(1/q) against ln s over ``fit_range``.

    Scales where the un-rooted value is not positive are excluded and counted.
    """
    row = surface.row(q)
    s = np.asarray(surface.s_grid)
    lo, hi = fit_range if fit_range is not None else default_fit_range(s)
    in_range = (s >= lo) & (s <= hi)
    vals = rooted(row[in_range], q)
    ok = np.isfinite(vals)
    n_excluded = int((~ok).sum())
    if ok.sum() < 3:
        raise FitError(f"q={q}: only {int(ok.sum())} usable scales in [{lo}, {hi}] "
                       f"({n_excluded} excluded)")
    xs = np.log(s[in_range][ok].astype(float))
    ys = np.log(vals[ok])
    slope, intercept = np.polyfit(xs, ys, 1)
    resid = ys - (slope * xs + intercept)
    sst = float(((ys - ys.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / sst if sst > 0 else 1.0
    used = s[in_range][ok]
    return ScalingFit(float(q), float(slope), (int(used[0]), int(used[-1])),
                      min(max(r2, 0.0), 1.0), float(intercept), int(ok.sum()), n_excluded)


def hurst_average(fit_x: ScalingFit, fit_y: ScalingFit) -> float:
    """Mean of two generalized Hurst exponents taken at the same q."""
    if not math.isclose(fit_x.q, fit_y.q, abs_tol=1e-12):
        raise ParameterError(f"fits are at different q: {fit_x.q} vs {fit_y.q}")
    return (fit_x.exponent + fit_y.exponent) / 2.0


@dataclass
class MultifractalResult:
    """Surfaces and fits for one series (MFDFA) or one pair (MFCCA)."""

    surface: FluctuationSurface
    fits: list = field(default_factory=list)
    auto_x: FluctuationSurface | None = None
    auto_y: FluctuationSurface | None = None
    fits_x: list = field(default_factory=list)
    fits_y: list = field(default_factory=list)

    @property
    def h_xy(self) -> list:
        return [hurst_average(a, b) for a, b in zip(self.fits_x, self.fits_y)]


def _fits(surface, fit_range):
    out = []
    for q in surface.q_grid:
        try:
            out.append(fit_scaling(surface, float(q), fit_range))
        except FitError:
            out.append(ScalingFit(float(q), float("nan"), tuple(fit_range or (0, 0)), 0.0))
    return out


def mfdfa(series: ReturnSeries | np.ndarray, q_grid, s_grid=None, m: int = DEFAULT_DEGREE,
          fit_range=None) -> MultifractalResult:
    """Auto fluctuation surface and generalized Hurst exponents h(q)."""
    p = profile(series)
    if s_grid is None:
        s_grid = scale_grid(len(p), m)
    surf = fluctuation_surface(p, p, q_grid, s_grid, m)
    return MultifractalResult(surf, _fits(surf, fit_range))


def mfcca(x: ReturnSeries | np.ndarray, y: ReturnSeries | np.ndarray, q_grid, s_grid=None,
          m: int = DEFAULT_DEGREE, fit_range=None) -> MultifractalResult:
    """Cross surface with lambda(q), plus both auto surfaces for h_XY(q)."""
    px, py = profile(x), profile(y)
    if len(px) != len(py):
        raise ParameterError("series must be synchronized to equal length")
    if s_grid is None:
        s_grid = scale_grid(len(px), m)
    cross = fluctuation_surface(px, py, q_grid, s_grid, m)
    ax = fluctuation_surface(px, px, q_grid, s_grid, m)
    ay = fluctuation_surface(py, py, q_grid, s_grid, m)
    ay.kind = "auto-Y"
    return MultifractalResult(cross, _fits(cross, fit_range), ax, ay,
                              _fits(ax, fit_range), _fits(ay, fit_range))
