# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled window-detrending kernels.

Every routine mirrors a function in ``mfx._kernels_py`` and must agree with it
to rounding error; ``mfx.kernels`` picks one of the two at import time.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


cdef inline void _project(const double[::1] x, Py_ssize_t start, Py_ssize_t s,
                          const double[:, ::1] basis, double* coef,
                          Py_ssize_t ncoef) noexcept nogil:
    cdef Py_ssize_t i, j
    cdef double shift = x[start], v
    for j in range(ncoef):
        coef[j] = 0.0
    for i in range(s):
        v = x[start + i] - shift
        for j in range(ncoef):
            coef[j] += basis[i, j] * v


cdef inline double _residual(const double[::1] x, Py_ssize_t start, Py_ssize_t i,
                             const double[:, ::1] basis, const double* coef,
                             Py_ssize_t ncoef) noexcept nogil:
    cdef Py_ssize_t j
    cdef double fit = 0.0
    for j in range(ncoef):
        fit += basis[i, j] * coef[j]
    return (x[start + i] - x[start]) - fit


def residuals(const double[::1] profile, const cnp.int64_t[::1] starts,
              Py_ssize_t s, const double[:, ::1] basis):
    """Detrended residuals, one row per window."""
    cdef Py_ssize_t nwin = starts.shape[0], ncoef = basis.shape[1]
    cdef Py_ssize_t k, i, st
    out_arr = np.empty((nwin, s), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double coef[16]
    if ncoef > 16:
        raise ValueError("polynomial degree too large for compiled kernel")
    with nogil:
        for k in range(nwin):
            st = starts[k]
            _project(profile, st, s, basis, coef, ncoef)
            for i in range(s):
                out[k, i] = _residual(profile, st, i, basis, coef, ncoef)
    return out_arr


def covariances(const double[::1] x, const double[::1] y,
                const cnp.int64_t[::1] starts, Py_ssize_t s,
                const double[:, ::1] basis):
    """Per-window detrended covariance (1/s) * sum(rx * ry).

    The residual products are accumulated with Neumaier compensation.
    """
    cdef Py_ssize_t nwin = starts.shape[0], ncoef = basis.shape[1]
    cdef Py_ssize_t k, i, st
    cdef double acc, comp, term, t, rx, ry
    cdef double cx[16]
    cdef double cy[16]
    cdef bint same = (&x[0] == &y[0])
    if ncoef > 16:
        raise ValueError("polynomial degree too large for compiled kernel")
    out_arr = np.empty(nwin, dtype=np.float64)
    cdef double[::1] out = out_arr
    with nogil:
        for k in range(nwin):
            st = starts[k]
            _project(x, st, s, basis, cx, ncoef)
            if not same:
                _project(y, st, s, basis, cy, ncoef)
            acc = 0.0
            comp = 0.0
            for i in range(s):
                rx = _residual(x, st, i, basis, cx, ncoef)
                if same:
                    ry = rx
                else:
                    ry = _residual(y, st, i, basis, cy, ncoef)
                term = rx * ry
                t = acc + term
                if (acc if acc >= 0 else -acc) >= (term if term >= 0 else -term):
                    comp += (acc - t) + term
                else:
                    comp += (term - t) + acc
                acc = t
            out[k] = (acc + comp) / s
    return out_arr


def cumsum(const double[::1] x):
    """Prefix sums with Neumaier compensation."""
    cdef Py_ssize_t n = x.shape[0], i
    out_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double acc = 0.0, comp = 0.0, t, v
    with nogil:
        for i in range(n):
            v = x[i]
            t = acc + v
            if (acc if acc >= 0 else -acc) >= (v if v >= 0 else -v):
                comp += (acc - t) + v
            else:
                comp += (v - t) + acc
            acc = t
            out[i] = acc + comp
    return out_arr
