"""NumPy fallback for the dense kernels.

Same contracts as the compiled module ``_core``; used whenever the
extension is unavailable or explicitly requested via ``VOOD_BACKEND``.
"""

import numpy as np


def matmul_nn(a, b):
    """a @ b for row-major float64 matrices."""
    return a @ b


def matmul_nt(a, b):
    """a @ b.T; b given as (n, k)."""
    return a @ b.T


def matmul_tn(a, b):
    """a.T @ b; a given as (k, m), b as (k, n)."""
    return a.T @ b


def log_softmax_rows(x, temperature):
    """Row-wise max-subtracted log-softmax of x / temperature."""
    z = x / temperature
    z = z - z.max(axis=1, keepdims=True)
    return z - np.log(np.exp(z).sum(axis=1, keepdims=True))
