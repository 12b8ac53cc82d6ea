"""Backend selection for the window-detrending kernels.

The compiled extension is used when it was built and importable; otherwise the
numpy implementation is used. Set ``MFX_PURE_PYTHON=1`` to force the fallback.
"""
import functools
import os

import numpy as np

from mfx import _kernels_py

if os.environ.get("MFX_PURE_PYTHON"):
    _impl = _kernels_py
else:
    try:
        from mfx import _kernels as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = _impl.BACKEND


@functools.lru_cache(maxsize=256)
def poly_basis(s: int, m: int) -> np.ndarray:
    """Orthonormal basis (s x (m+1)) spanning polynomials of degree <= m on 1..s.

    The abscissa is centred and scaled before the QR factorisation; this
    changes the basis but not the spanned space, so residuals are identical to
    a fit against 1..s.
    """
    t = (np.arange(1, s + 1, dtype=np.float64) - (s + 1) / 2.0) / max(s / 2.0, 1.0)
    vander = np.vander(t, m + 1, increasing=True)
    q, _ = np.linalg.qr(vander)
    q = np.ascontiguousarray(q)
    q.setflags(write=False)
    return q


@functools.lru_cache(maxsize=256)
def window_starts(n: int, s: int) -> np.ndarray:
    """Start offsets of the 2*int(n/s) windows: forward tiling, then backward."""
    m = n // s
    fwd = np.arange(m, dtype=np.int64) * s
    bwd = n - (np.arange(m, dtype=np.int64) + 1) * s
    out = np.concatenate([fwd, bwd])
    out.setflags(write=False)
    return out


def residuals(profile: np.ndarray, s: int, m: int, impl=None) -> np.ndarray:
    """Rows of polynomial-detrended profile values, one per window."""
    impl = impl or _impl
    profile = np.ascontiguousarray(profile, dtype=np.float64)
    return impl.residuals(profile, window_starts(len(profile), s), s, poly_basis(s, m))


def covariances(x: np.ndarray, y: np.ndarray, s: int, m: int, impl=None) -> np.ndarray:
    """Detrended covariance of every window at scale s (length 2*int(n/s))."""
    impl = impl or _impl
    same = x is y
    x = np.ascontiguousarray(x, dtype=np.float64)
    y = x if same else np.ascontiguousarray(y, dtype=np.float64)
    if len(x) != len(y):
        raise ValueError(f"profiles differ in length: {len(x)} != {len(y)}")
    return impl.covariances(x, y, window_starts(len(x), s), s, poly_basis(s, m))


def cumsum(x: np.ndarray, impl=None) -> np.ndarray:
    """Accurate prefix sums of a 1-d array."""
    impl = impl or _impl
    return impl.cumsum(np.ascontiguousarray(x, dtype=np.float64))


def residuals_at(profile: np.ndarray, starts: np.ndarray, s: int, m: int, impl=None) -> np.ndarray:
    """Detrended residual rows for an explicit subset of window starts."""
    impl = impl or _impl
    profile = np.ascontiguousarray(profile, dtype=np.float64)
    return impl.residuals(profile, np.ascontiguousarray(starts, dtype=np.int64), s, poly_basis(s, m))
