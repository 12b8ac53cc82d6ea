"""Surrogate and synthetic series generators.

All generators draw from numpy's PCG64 bit generator seeded with the caller's
64-bit seed, so outputs are pure functions of (parameters, seed).
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from mfx.errors import DomainError, ParameterError
from mfx.ingest import ReturnSeries

RNG_NAME = "PCG64"


def rng_for(seed: int) -> np.random.Generator:
    if not 0 <= int(seed) < 2 ** 64:
        raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
    return np.random.Generator(np.random.PCG64(int(seed)))


@dataclass
class SurrogateSpec:
    kind: str
    seed: int
    preserve: str = ""

    def __post_init__(self):
        if self.kind not in PRESERVES:
            raise ParameterError(f"unknown surrogate kind {self.kind!r}")
        self.preserve = self.preserve or PRESERVES[self.kind]


PRESERVES = {
    "shuffle": "multiset of values (all moments); destroys temporal order",
    "fourier-phase": "amplitude spectrum, mean and autocovariance; randomizes phases",
}


def _as_series(series, label="synthetic") -> ReturnSeries:
    if isinstance(series, ReturnSeries):
        return series
    return ReturnSeries(label, 1.0, 0, np.asarray(series, dtype=np.float64))


def shuffle(series: ReturnSeries | np.ndarray, seed: int) -> ReturnSeries:
    """Uniform random permutation of the values."""
    series = _as_series(series)
    if len(series) < 2:
        raise ParameterError("shuffle needs at least two samples")
    perm = rng_for(seed).permutation(len(series))
    return series.with_values(series.values[perm])


def randomized_spectrum(x: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Full FFT of ``x`` with Hermitian-symmetric random phases.

    The zero-frequency bin, and the Nyquist bin for even lengths, keep their
    original (real) values.
    """
    n = len(x)
    spec = np.fft.fft(x)
    half = (n - 1) // 2  # number of strictly positive, non-Nyquist frequencies
    phases = rng.uniform(0.0, 2.0 * np.pi, half)
    out = spec.copy()
    pos = np.abs(spec[1:half + 1]) * np.exp(1j * phases)
    out[1:half + 1] = pos
    out[n - half:] = np.conj(pos[::-1])
    return out


def fourier_surrogate(series: ReturnSeries | np.ndarray, seed: int) -> ReturnSeries:
    """Phase-randomized surrogate with the amplitude spectrum of the input."""
    series = _as_series(series)
    x = series.values
    if len(x) < 4:
        raise ParameterError("Fourier surrogate needs at least four samples")
    z = np.fft.ifft(randomized_spectrum(x, rng_for(seed)))
    scale = max(float(np.abs(z.real).max()), 1e-300)
    if np.abs(z.imag).max() > 1e-12 * scale:
        raise DomainError("surrogate spectrum lost Hermitian symmetry")
    return series.with_values(z.real.copy())


def fgn_autocovariance(hurst: float, lags: np.ndarray) -> np.ndarray:
    k = np.abs(np.asarray(lags, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1) ** h2 - 2 * k ** h2 + np.abs(k - 1) ** h2)


def synth_fgn(hurst: float, n: int, seed: int) -> ReturnSeries:
    """Unit-variance fractional Gaussian noise by circulant embedding (Davies-Harte).

    The covariance is embedded in a circulant of size 2n whose FFT gives the
    spectral weights; the series is the real part of the FFT of weighted
    complex white noise, which has exactly the fGn autocovariance.
    """
    if not 0.0 < hurst < 1.0:
        raise ParameterError(f"Hurst exponent must lie in (0, 1), got {hurst}")
    if n < 2:
        raise ParameterError("need n >= 2")
    gamma = fgn_autocovariance(hurst, np.arange(n + 1))
    row = np.concatenate([gamma, gamma[-2:0:-1]])
    lam = np.fft.fft(row).real
    lam[lam < 0] = 0.0  # rounding only; fGn embeddings are non-negative definite
    m = len(row)
    rng = rng_for(seed)
    noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
    y = np.fft.fft(np.sqrt(lam / m) * noise)
    return ReturnSeries(f"fGn(H={hurst:g})", 1.0, 0, y.real[:n].copy())


def cascade_weights(levels: int, spread: float, rng: np.random.Generator) -> np.ndarray:
    """Binomial cascade measure on 2**levels cells, normalized to unit total.

    Each parent splits its mass as (a, 1-a), a = (1+spread)/2, with the larger
    share sent left or right at random.
    """
    a = (1.0 + spread) / 2.0
    mu = np.ones(1)
    for _ in range(levels):
        left = np.where(rng.random(len(mu)) < 0.5, a, 1.0 - a)
        mu = np.stack([mu * left, mu * (1.0 - left)], axis=1).ravel()
    return mu


def synth_cascade(levels: int, spread: float, seed: int) -> ReturnSeries:
    """Returns with cascade-modulated volatility: ``eps_i * sqrt(N * mu_i)``.

    ``spread = 0`` gives iid Gaussian returns; larger spreads give increasingly
    multifractal series with h(q) from :func:`cascade_hurst`.
    """
    if int(levels) < 8:
        raise ParameterError(f"levels must be >= 8, got {levels}")
    if not 0.0 <= spread < 1.0:
        raise ParameterError(f"spread must lie in [0, 1), got {spread}")
    rng = rng_for(seed)
    mu = cascade_weights(int(levels), spread, rng)
    eps = rng.standard_normal(len(mu))
    return ReturnSeries(f"cascade(spread={spread:g})", 1.0, 0, eps * np.sqrt(len(mu) * mu))


def cascade_hurst(q: float, spread: float) -> float:
    """Closed-form generalized Hurst exponent of :func:`synth_cascade` output."""
    a = (1.0 + spread) / 2.0
    b = 1.0 - a
    if q == 0:
        return -(math.log2(a) + math.log2(b)) / 4.0
    return (1.0 - math.log2(a ** (q / 2.0) + b ** (q / 2.0))) / q


@dataclass
class EnsembleManifest:
    kind: str
    seeds: list
    parameters: dict = field(default_factory=dict)
    rng: str = RNG_NAME

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def ensemble(series: ReturnSeries, kind: str, seeds) -> list:
    spec_fn = {"shuffle": shuffle, "fourier-phase": fourier_surrogate}
    if kind not in spec_fn:
        raise ParameterError(f"unknown surrogate kind {kind!r}")
    return [spec_fn[kind](series, int(s)) for s in seeds]
