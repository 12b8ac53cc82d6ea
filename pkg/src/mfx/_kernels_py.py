"""Pure numpy versions of the window-detrending kernels."""
import numpy as np

BACKEND = "numpy"


def _windows(profile, starts, s):
    idx = starts[:, None] + np.arange(s)[None, :]
    w = profile[idx]
    return w - w[:, :1]


def residuals(profile, starts, s, basis):
    """Detrended residuals, one row per window."""
    w = _windows(np.asarray(profile, dtype=np.float64), np.asarray(starts), s)
    return w - (w @ basis) @ basis.T


def covariances(x, y, starts, s, basis):
    """Per-window detrended covariance (1/s) * sum(rx * ry)."""
    rx = residuals(x, starts, s, basis)
    ry = rx if y is x else residuals(y, starts, s, basis)
    # contiguous last-axis reduction: numpy sums pairwise here
    return (rx * ry).sum(axis=1) / s


def cumsum(x, block=1024):
    """Prefix sums; running sums restart every ``block`` samples to bound error growth."""
    x = np.asarray(x, dtype=np.float64)
    n = len(x)
    if n <= block:
        return np.cumsum(x)
    nb = -(-n // block)
    padded = np.zeros(nb * block)
    padded[:n] = x
    blocks = padded.reshape(nb, block)
    inner = np.cumsum(blocks, axis=1)
    totals = blocks.sum(axis=1)  # pairwise
    offsets = np.concatenate([[0.0], np.cumsum(totals)[:-1]])
    return (inner + offsets[:, None]).reshape(-1)[:n]
