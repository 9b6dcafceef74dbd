"""Hot numeric kernels with a numba path and a pure-numpy fallback.

Set ``SLOWKILL_DISABLE_NUMBA=1`` before import to force the numpy versions.
Both variants stay importable (``*_numba`` / ``*_numpy``) so they can be
benchmarked and cross-checked against each other.
"""

import os

import numpy as np
from scipy.signal import lfilter

try:
    import numba
except ImportError:  # pragma: no cover
    numba = None

_DISABLED = os.environ.get("SLOWKILL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")
HAS_NUMBA = numba is not None
USE_NUMBA = HAS_NUMBA and not _DISABLED


def _njit(func):
    if not HAS_NUMBA:
        return func
    return numba.njit(cache=True, nogil=True)(func)


# ---------------------------------------------------------------------------
# top-k selection, ties at the k-th score go to the lower index
# ---------------------------------------------------------------------------

def select_top_numpy(scores, k):
    p = scores.shape[0]
    if k >= p:
        return np.arange(p)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    kth = np.partition(scores, p - k)[p - k]
    above = np.flatnonzero(scores > kth)
    ties = np.flatnonzero(scores == kth)[: k - above.size]
    return np.sort(np.concatenate((above, ties)))


@_njit
def select_top_numba(scores, k):
    p = scores.shape[0]
    if k >= p:
        return np.arange(p)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    kth = np.partition(scores, p - k)[p - k]
    n_above = 0
    for i in range(p):
        if scores[i] > kth:
            n_above += 1
    n_ties = k - n_above
    out = np.empty(k, dtype=np.int64)
    j = 0
    for i in range(p):
        s = scores[i]
        if s > kth:
            out[j] = i
            j += 1
        elif s == kth and n_ties > 0:
            out[j] = i
            j += 1
            n_ties -= 1
    return out


def kth_gap_numpy(scores, k):
    """Return (k-th largest, (k+1)-th largest) of ``scores``."""
    p = scores.shape[0]
    part = np.partition(scores, (p - k - 1, p - k))
    return part[p - k], part[p - k - 1]


# ---------------------------------------------------------------------------
# AR(1) row transform: Cholesky factor of the Toeplitz matrix tau^|i-j|
# ---------------------------------------------------------------------------

def ar1_rows_numpy(z, tau):
    c = np.sqrt(1.0 - tau * tau)
    zs = z.astype(np.float64, copy=True)
    zs[:, 1:] *= c
    return lfilter([1.0], [1.0, -tau], zs, axis=1)


@_njit
def ar1_rows_numba(z, tau):
    n, p = z.shape
    c = np.sqrt(1.0 - tau * tau)
    out = np.empty((n, p))
    for i in range(n):
        prev = z[i, 0]
        out[i, 0] = prev
        for j in range(1, p):
            prev = tau * prev + c * z[i, j]
            out[i, j] = prev
    return out


# ---------------------------------------------------------------------------
# O(p) product with the Toeplitz matrix [tau^|i-j|]
# ---------------------------------------------------------------------------

def toeplitz_matvec_numpy(d, tau):
    d = np.asarray(d, dtype=np.float64)
    fwd = lfilter([1.0], [1.0, -tau], d)
    bwd = lfilter([1.0], [1.0, -tau], d[::-1])[::-1]
    return fwd + bwd - d


@_njit
def toeplitz_matvec_numba(d, tau):
    p = d.shape[0]
    fwd = np.empty(p)
    out = np.empty(p)
    acc = 0.0
    for i in range(p):
        acc = d[i] + tau * acc
        fwd[i] = acc
    acc = 0.0
    for i in range(p - 1, -1, -1):
        acc = d[i] + tau * acc
        out[i] = fwd[i] + acc - d[i]
    return out


# numpy's introselect beats numba's np.partition (see benchmarks/bench_kernels.py),
# so top-k selection uses the numpy version under both backends
select_top = select_top_numpy
if USE_NUMBA:
    ar1_rows = ar1_rows_numba
    toeplitz_matvec = toeplitz_matvec_numba
else:
    ar1_rows = ar1_rows_numpy
    toeplitz_matvec = toeplitz_matvec_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
