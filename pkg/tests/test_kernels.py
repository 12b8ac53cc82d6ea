import numpy as np
import pytest

from mfx import _kernels_py, kernels

try:
    from mfx import _kernels as compiled
except ImportError:  # extension not built
    compiled = None

needs_ext = pytest.mark.skipif(compiled is None, reason="compiled kernels not built")


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "numpy")


def test_basis_orthonormal_and_readonly():
    for s, m in [(4, 2), (20, 1), (257, 5)]:
        B = kernels.poly_basis(s, m)
        assert B.shape == (s, m + 1)
        np.testing.assert_allclose(B.T @ B, np.eye(m + 1), atol=1e-12)
        assert not B.flags.writeable


def test_window_starts_forward_then_backward():
    np.testing.assert_array_equal(kernels.window_starts(10, 3), [0, 3, 6, 7, 4, 1])


@pytest.mark.parametrize("impl", [_kernels_py, pytest.param(compiled, marks=needs_ext)])
def test_cumsum_accuracy(impl):
    rng = np.random.default_rng(1)
    x = rng.standard_normal(2 ** 20) * 1e-4 + 1e-3
    exact = np.cumsum(x.astype(np.longdouble))
    got = kernels.cumsum(x, impl=impl)
    rel = float(np.max(np.abs(got - exact)) / np.max(np.abs(exact)))
    assert rel <= 1e-12


@needs_ext
@pytest.mark.parametrize("s,m", [(5, 1), (20, 2), (64, 3), (333, 5)])
def test_backends_agree(s, m):
    rng = np.random.default_rng(s * 10 + m)
    x = np.cumsum(rng.standard_normal(3000))
    y = np.cumsum(rng.standard_normal(3000))
    for a, b in [(x, y), (x, x)]:
        cp = kernels.covariances(a, b, s, m, impl=_kernels_py)
        cc = kernels.covariances(a, b, s, m, impl=compiled)
        np.testing.assert_allclose(cc, cp, rtol=1e-11, atol=1e-13 * np.abs(cp).max())
    rp = kernels.residuals(x, s, m, impl=_kernels_py)
    rc = kernels.residuals(x, s, m, impl=compiled)
    np.testing.assert_allclose(rc, rp, atol=1e-10)


@needs_ext
def test_cumsum_backends_agree():
    x = np.random.default_rng(0).standard_normal(10_000)
    np.testing.assert_allclose(kernels.cumsum(x, impl=compiled), kernels.cumsum(x, impl=_kernels_py),
                               rtol=0, atol=1e-12)


def test_residuals_orthogonal_to_polynomials():
    rng = np.random.default_rng(5)
    p = np.cumsum(rng.standard_normal(500))
    r = kernels.residuals(p, 50, 2)
    B = kernels.poly_basis(50, 2)
    assert np.abs(r @ B).max() < 1e-9
