"""Block-tridiagonal linear solver (block Thomas algorithm).

Solves  L[k] x[k-1] + D[k] x[k] + U[k] x[k+1] = b[k]  for k = 0..n-1 with
square blocks.  Leading batch dimensions are supported so that many
independent systems of the same shape are eliminated in one pass.
"""
from __future__ import annotations

import numpy as np


class SingularBlock(np.linalg.LinAlgError):
    pass


def solve_block_tridiagonal(lower, diag, upper, rhs, rcond: float = 1e-14):
    """Forward elimination and back substitution.

    Parameters
    ----------
    lower, diag, upper : array, shape (..., n, m, m)
        Sub-, main- and super-diagonal blocks.  ``lower[..., 0]`` and
        ``upper[..., n-1]`` are ignored.
    rhs : array, shape (..., n, m)

    Returns
    -------
    x : array, shape (..., n, m)
    """
    lower = np.asarray(lower)
    diag = np.asarray(diag)
    upper = np.asarray(upper)
    rhs = np.asarray(rhs)
    dtype = np.result_type(lower, diag, upper, rhs)
    n = diag.shape[-3]
    c_prime = np.empty(upper.shape, dtype=dtype)
    d_prime = np.empty(rhs.shape, dtype=dtype)

    pivot = diag[..., 0, :, :]
    _check(pivot, rcond)
    c_prime[..., 0, :, :] = np.linalg.solve(pivot, upper[..., 0, :, :])
    d_prime[..., 0, :] = np.linalg.solve(pivot, rhs[..., 0, :, None])[..., 0]
    for k in range(1, n):
        a = lower[..., k, :, :]
        pivot = diag[..., k, :, :] - a @ c_prime[..., k - 1, :, :]
        _check(pivot, rcond)
        if k < n - 1:
            c_prime[..., k, :, :] = np.linalg.solve(pivot, upper[..., k, :, :])
        r = rhs[..., k, :] - (a @ d_prime[..., k - 1, :, None])[..., 0]
        d_prime[..., k, :] = np.linalg.solve(pivot, r[..., None])[..., 0]

    x = np.empty(rhs.shape, dtype=dtype)
    x[..., n - 1, :] = d_prime[..., n - 1, :]
    for k in range(n - 2, -1, -1):
        x[..., k, :] = d_prime[..., k, :] - (c_prime[..., k, :, :] @ x[..., k + 1, :, None])[..., 0]
    return x


def _check(pivot, rcond):
    cond = np.linalg.cond(pivot)
    if not np.all(np.isfinite(cond)) or np.any(cond * rcond > 1.0):
        raise SingularBlock("pivot block is numerically singular")


def assemble_dense(lower, diag, upper):
    """Dense matrix of a single (unbatched) block-tridiagonal system."""
    n, m, _ = diag.shape
    a = np.zeros((n * m, n * m), dtype=np.result_type(lower, diag, upper))
    for k in range(n):
        a[k * m:(k + 1) * m, k * m:(k + 1) * m] = diag[k]
        if k > 0:
            a[k * m:(k + 1) * m, (k - 1) * m:k * m] = lower[k]
        if k < n - 1:
            a[k * m:(k + 1) * m, (k + 1) * m:(k + 2) * m] = upper[k]
    return a
