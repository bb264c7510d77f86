"""Exact matrix permanents.

Two independent O(n 2^n) inclusion-exclusion kernels (Gray-code Ryser, the
default, and Glynn) behind one interface, plus a factorial-time permutation
sum used purely as a cross-validation oracle.  All arithmetic is double
precision; the empty 0x0 matrix has permanent 1 so that subset formulas
degrade gracefully.
"""

from __future__ import annotations

import itertools
import math

import numpy as np

from .errors import DeskScaleError, DimensionError, DomainError, InternalConsistencyError

MAX_EXACT_SIZE = 30
MAX_NAIVE_SIZE = 9

# Subsets over this many columns are enumerated densely per vectorized block;
# the remaining columns walk a Gray code.
_DENSE_BITS = 12


def _as_square(m, name="matrix"):
    a = np.asarray(m)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {a.shape}")
    if a.size and not np.all(np.isfinite(a)):
        raise DomainError(f"{name} contains non-finite entries")
    return a


def _parity_signs(count):
    masks = np.arange(count, dtype=np.uint64)
    return 1.0 - 2.0 * (np.bitwise_count(masks).astype(np.int64) & 1)


def _subset_row_sums(a, cols):
    """Row-sum vectors for every subset of the given columns, in binary order."""
    k = len(cols)
    masks = np.arange(1 << k, dtype=np.uint64)
    bits = ((masks[:, None] >> np.arange(k, dtype=np.uint64)[None, :]) & 1).astype(a.dtype)
    return bits @ a[:, cols].T  # (2^k, n)


def _ryser(a):
    """Per(a) = (-1)^n sum_{S != 0} (-1)^{|S|} prod_i sum_{j in S} a_ij."""
    n = a.shape[0]
    m = min(n, _DENSE_BITS)
    low = _subset_row_sums(a, list(range(m)))
    sign_low = _parity_signs(1 << m)
    total = sign_low @ np.prod(low, axis=1)  # empty high part; the S=0 row multiplies to 0
    if n > m:
        base = np.zeros(n, dtype=a.dtype)
        sign_high = 1.0
        gray_prev = 0
        for t in range(1, 1 << (n - m)):
            gray = t ^ (t >> 1)
            flipped = gray ^ gray_prev
            col = m + flipped.bit_length() - 1
            if gray & flipped:
                base += a[:, col]
            else:
                base -= a[:, col]
            sign_high = -sign_high
            total += sign_high * (sign_low @ np.prod(low + base[None, :], axis=1))
            gray_prev = gray
    return (-1) ** n * total


def _glynn(a):
    """Per(a) = 2^{1-n} sum_{d in {+-1}^n, d_0=+1} (prod_i d_i) prod_j (d^T a)_j."""
    n = a.shape[0]
    if n == 1:
        return a[0, 0]
    free = n - 1  # sign of row 0 is pinned to +1
    m = min(free, _DENSE_BITS)
    colsum = a.sum(axis=0)
    masks = np.arange(1 << m, dtype=np.uint64)
    bits = ((masks[:, None] >> np.arange(m, dtype=np.uint64)[None, :]) & 1).astype(a.dtype)
    low = bits @ a[1 : m + 1, :]  # subtracted twice wherever the sign flips
    sign_low = _parity_signs(1 << m)
    total = sign_low @ np.prod(colsum[None, :] - 2.0 * low, axis=1)
    if free > m:
        base = np.zeros(n, dtype=a.dtype)
        sign_high = 1.0
        gray_prev = 0
        for t in range(1, 1 << (free - m)):
            gray = t ^ (t >> 1)
            flipped = gray ^ gray_prev
            row = 1 + m + flipped.bit_length() - 1
            if gray & flipped:
                base += a[row, :]
            else:
                base -= a[row, :]
            sign_high = -sign_high
            total += sign_high * (sign_low @ np.prod(colsum[None, :] - 2.0 * (low + base[None, :]), axis=1))
            gray_prev = gray
    return total / 2.0 ** (n - 1)


_KERNELS = {"ryser": _ryser, "glynn": _glynn}


def permanent_complex(m, kernel="ryser"):
    """Permanent of a square complex matrix.

    Parameters
    ----------
    m : array_like, square, n <= 30
        Complex or real matrix.
    kernel : {"ryser", "glynn"}
        Which exponential kernel to run.  Both are exact; keeping two lets
        callers cross-check one against the other.

    Returns
    -------
    complex
        Per(m).  The 0x0 matrix returns 1 (empty product convention).
    """
    a = _as_square(m)
    n = a.shape[0]
    if n == 0:
        return complex(1.0)
    if n > MAX_EXACT_SIZE:
        raise DeskScaleError(f"permanent of a {n}x{n} matrix exceeds the n <= {MAX_EXACT_SIZE} cost guard")
    try:
        func = _KERNELS[kernel]
    except KeyError:
        raise DomainError(f"unknown permanent kernel {kernel!r}") from None
    return complex(func(a.astype(np.complex128, copy=False)))


def permanent_nonneg(m, kernel="ryser"):
    """Permanent of a square real matrix with nonnegative entries.

    Runs the same exact kernel restricted to real arithmetic.  Tiny negative
    results from inclusion-exclusion rounding are clamped to zero; a negative
    result beyond rounding scale raises ``InternalConsistencyError``.
    """
    a = _as_square(m)
    if np.iscomplexobj(a):
        if a.size and np.any(a.imag != 0):
            raise DomainError("permanent_nonneg requires a real matrix")
        a = a.real
    a = a.astype(np.float64, copy=False)
    if a.size and np.any(a < 0):
        raise DomainError("permanent_nonneg requires entries >= 0")
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n > MAX_EXACT_SIZE:
        raise DeskScaleError(f"permanent of a {n}x{n} matrix exceeds the n <= {MAX_EXACT_SIZE} cost guard")
    value = float(_KERNELS[kernel](a).real if kernel == "glynn" else _KERNELS[kernel](a))
    if value < 0.0:
        # Per(a) <= prod of row sums for nonnegative a, which sets the rounding scale.
        scale = float(np.prod(a.sum(axis=1))) if n else 1.0
        if -value <= 1e-9 * (1.0 + scale):
            return 0.0
        raise InternalConsistencyError(f"nonnegative permanent came out {value} (rounding scale {scale})")
    return value


def permanent_naive(m):
    """Permanent by direct summation over all n! permutations (test oracle).

    Refuses n > 9 to guard against runaway cost.
    """
    a = _as_square(m)
    n = a.shape[0]
    if n == 0:
        return complex(1.0)
    if n > MAX_NAIVE_SIZE:
        raise DeskScaleError(f"permanent_naive is capped at n <= {MAX_NAIVE_SIZE}, got n = {n}")
    a = a.astype(np.complex128, copy=False)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    return complex(np.prod(a[perms, np.arange(n)], axis=1).sum())
