"""Seeded random matrices and the shared matrix JSON format.

All randomness flows through the counter-based Philox generator with a
documented stream-derivation rule: the stream for a subcomputation is
``f(seed, branch indices)`` via ``numpy.random.SeedSequence(entropy=seed,
spawn_key=branch)``.  The same seed and dimensions therefore reproduce a
bit-identical matrix, and per-trial streams are independent of scheduling.

The matrix wire format is a JSON object with fields ``rows``, ``cols``,
``re`` and ``im`` (arrays of rows of doubles).  Serialization uses Python's
shortest round-trip float repr, so write/read is bit-exact.
"""

from __future__ import annotations

import json
import math

import numpy as np

from .errors import DimensionError, DomainError, MatrixFormatError

SEED_BITS = 64


def _check_seed(seed):
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)):
        raise DomainError(f"seed must be an integer, got {type(seed).__name__}")
    seed = int(seed)
    if not 0 <= seed < 2**SEED_BITS:
        raise DomainError(f"seed must fit in {SEED_BITS} unsigned bits, got {seed}")
    return seed


def seed_sequence(seed, *branch):
    """The stream-derivation rule: stream = f(seed, branch indices)."""
    return np.random.SeedSequence(entropy=_check_seed(seed), spawn_key=tuple(int(b) for b in branch))


def generator(seed, *branch):
    """Philox generator on the derived stream for (seed, branch)."""
    return np.random.Generator(np.random.Philox(seed_sequence(seed, *branch)))


def derive_seed(seed, *branch):
    """A 64-bit child seed, for components that take a seed of their own."""
    lo, hi = seed_sequence(seed, *branch).generate_state(2, dtype=np.uint32)
    return int(lo) | (int(hi) << 32)


def sample_gaussian_matrix(rows, cols, seed):
    """i.i.d. standard complex Gaussian matrix, E[X_ij] = 0 and E[|X_ij|^2] = 1.

    Real and imaginary parts are each N(0, 1/2); this normalization makes the
    mean squared permanent of an n x n draw equal to n!.  Deterministic per
    seed: the real block is drawn first, then the imaginary block.
    """
    if rows < 1 or cols < 1:
        raise DimensionError(f"matrix dimensions must be >= 1, got {rows}x{cols}")
    z = generator(seed).standard_normal((2, rows, cols))
    return (z[0] + 1j * z[1]) / math.sqrt(2.0)


def sample_haar_unitary(m, seed):
    """Haar-random m x m unitary via QR of a complex Gaussian draw.

    The R-diagonal phase correction (Mezzadri) removes the QR gauge freedom,
    so the output is Haar distributed and unitary to ~1e-15.
    """
    if m < 1:
        raise DimensionError(f"unitary dimension must be >= 1, got {m}")
    z = sample_gaussian_matrix(m, m, seed)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))[None, :]


def submatrix(x, row_set, col_set):
    """Extract rows/columns of ``x`` by strictly increasing index sets.

    Empty sets yield a 0x0 matrix (whose permanent is 1 by convention).
    Out-of-range or non-increasing (hence duplicate) indices raise IndexError.
    """
    a = np.asarray(x)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of ndim {a.ndim}")
    rows = [int(i) for i in row_set]
    cols = [int(j) for j in col_set]
    for name, idx, bound in (("row", rows, a.shape[0]), ("column", cols, a.shape[1])):
        if any(i < 0 or i >= bound for i in idx):
            raise IndexError(f"{name} index out of range for shape {a.shape}: {idx}")
        if any(b <= a_ for a_, b in zip(idx, idx[1:])):
            raise IndexError(f"{name} indices must be strictly increasing: {idx}")
    return a[np.ix_(rows, cols)]


def matrix_to_payload(x):
    """The shared JSON object for a complex matrix."""
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected a matrix, got array of ndim {a.ndim}")
    return {
        "rows": int(a.shape[0]),
        "cols": int(a.shape[1]),
        "re": [[float(v) for v in row] for row in a.real],
        "im": [[float(v) for v in row] for row in a.imag],
    }


def matrix_from_payload(obj):
    """Parse the shared JSON object back into a complex128 matrix."""
    if not isinstance(obj, dict):
        raise MatrixFormatError(f"matrix payload must be a JSON object, got {type(obj).__name__}")
    for field in ("rows", "cols", "re", "im"):
        if field not in obj:
            raise MatrixFormatError(f"matrix payload is missing field '{field}'")
    rows, cols = obj["rows"], obj["cols"]
    if not isinstance(rows, int) or not isinstance(cols, int) or rows < 1 or cols < 1:
        raise MatrixFormatError(f"fields 'rows'/'cols' must be positive integers, got {rows!r}/{cols!r}")
    parts = []
    for field in ("re", "im"):
        block = obj[field]
        if not isinstance(block, list) or len(block) != rows:
            raise MatrixFormatError(f"field '{field}' must be a list of {rows} rows")
        for i, row in enumerate(block):
            if not isinstance(row, list) or len(row) != cols:
                raise MatrixFormatError(f"field '{field}' row {i} must be a list of {cols} numbers")
            for j, v in enumerate(row):
                if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
                    raise MatrixFormatError(f"field '{field}' entry ({i},{j}) is not a finite number: {v!r}")
        parts.append(np.asarray(block, dtype=np.float64))
    return parts[0] + 1j * parts[1]


def save_matrix(path, x):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(matrix_to_payload(x), fh)
        fh.write("\n")


def load_matrix(path):
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MatrixFormatError(f"matrix JSON parse error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return matrix_from_payload(obj)
