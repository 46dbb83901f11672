"""Compiled per-event kernels. All of them release the GIL."""

import numpy as np
from numba import njit

LOG_FLOOR = 1e-300
CHI2_EPS = 1e-9


@njit(nogil=True, cache=True)
def tree_sum_inplace(buf, n):
    """Pairwise sum of buf[:n]; the tree shape depends on n only. Clobbers buf."""
    if n == 0:
        return 0.0
    while n > 1:
        half = n // 2
        for i in range(half):
            buf[i] = buf[2 * i] + buf[2 * i + 1]
        if n % 2:
            buf[half] = buf[n - 1]
            n = half + 1
        else:
            n = half
    return buf[0]


@njit(nogil=True, cache=True)
def pairwise_sum(a):
    buf = a.copy()
    return tree_sum_inplace(buf, buf.shape[0])


@njit(nogil=True, cache=True)
def chunk_sums(terms, chunk, out):
    """out[k] = pairwise sum of terms[k*chunk:(k+1)*chunk]."""
    n = terms.shape[0]
    buf = np.empty(chunk)
    k = 0
    for start in range(0, n, chunk):
        m = min(chunk, n - start)
        for i in range(m):
            buf[i] = terms[start + i]
        out[k] = tree_sum_inplace(buf, m)
        k += 1


@njit(nogil=True, cache=True)
def nll_terms(density, weights, use_weights, terms):
    """terms = -w*log(max(density, LOG_FLOOR)); returns the number of floored entries."""
    floors = 0
    for i in range(density.shape[0]):
        d = density[i]
        if d < LOG_FLOOR:
            d = LOG_FLOOR
            floors += 1
        t = -np.log(d)
        if use_weights:
            t = weights[i] * t
        terms[i] = t
    return floors


@njit(nogil=True, cache=True)
def chi2_terms(density, content, volume, n_total, terms):
    for i in range(density.shape[0]):
        mu = n_total * density[i] * volume[i]
        r = content[i] - mu
        terms[i] = r * r / max(mu, CHI2_EPS)
    return 0


@njit(nogil=True, cache=True)
def first_nonfinite(terms):
    for i in range(terms.shape[0]):
        if not np.isfinite(terms[i]):
            return i
    return -1
