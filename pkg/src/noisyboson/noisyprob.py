"""Output probabilities of boson sampling under distinguishability and loss.

Everything is computed and stored in q/N! units (q/n! for the lossy
variants): the natural scale on which the mean over Gaussian inputs is 1 and
additive error budgets are expressed.  ln(N!) is carried separately on the
result object rather than multiplied in, since N! overflows double precision
long before the matrices become interesting.

The production path evaluates the binomial-mixture form

    q(x, X) = sum_j C(N,j) x^j (1-x)^(N-j) q_j(X)

from a single sweep that produces the whole fixed-j profile q_0..q_N at
once.  The sweep builds permanents of *all* equal-shape submatrix pairs by a
shared-subproblem recursion (cost ~ sum_j j*C(N,j)^2 instead of an
exponential kernel per pair) and is cached per matrix, so the binomial,
truncated and rescaled-polynomial evaluations all reuse it.  The
permutation-pair form is kept as an independent small-N oracle.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.stats import binom

from .errors import DeskScaleError, DimensionError, DomainError, InternalConsistencyError
from .permanent import permanent_complex

MAX_PHOTONS = 12
MAX_PERMPAIR_PHOTONS = 6
NEGATIVE_CLAMP = 1e-12


@dataclass(frozen=True)
class NoiseParams:
    """Uniform noise rates: indistinguishability x and transmission eta."""

    x: float = 1.0
    eta: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.x <= 1.0:
            raise DomainError(f"indistinguishability x must lie in [0,1], got {self.x}")
        if not 0.0 <= self.eta <= 1.0:
            raise DomainError(f"transmission eta must lie in [0,1], got {self.eta}")


@dataclass(frozen=True)
class NormalizedProbability:
    """A probability value in q/n! units with ln(n!) kept symbolically.

    ``value`` is clamped to 0 when a rounding residue leaves it within
    ``NEGATIVE_CLAMP`` below zero; anything more negative is an internal
    consistency failure.
    """

    value: float
    log_scale_factor: float

    def __post_init__(self):
        if not math.isfinite(self.value):
            raise InternalConsistencyError(f"probability value is not finite: {self.value}")
        if self.value < -NEGATIVE_CLAMP:
            raise InternalConsistencyError(f"probability value {self.value} is negative beyond rounding scale")
        if self.value < 0.0:
            object.__setattr__(self, "value", 0.0)

    def __float__(self):
        return self.value


def _prob(value, n):
    return NormalizedProbability(float(value), math.lgamma(n + 1))


def _square_input(x, limit=MAX_PHOTONS):
    a = np.asarray(x, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {a.shape}")
    n = a.shape[0]
    if n < 1:
        raise DimensionError("photon number must be >= 1")
    if n > limit:
        raise DeskScaleError(f"n = {n} exceeds the n <= {limit} cost guard")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix contains non-finite entries")
    return a, n


def _check_x(x):
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"indistinguishability x must lie in [0,1], got {x}")
    return x


def binomial_weights(n, x):
    """C(n,j) x^j (1-x)^(n-j) for j = 0..n (exact one-hot at the endpoints)."""
    return binom.pmf(np.arange(n + 1), n, _check_x(x))


# ---------------------------------------------------------------------------
# Fixed-j profile: permanents of all equal-shape submatrix pairs
# ---------------------------------------------------------------------------


@lru_cache(maxsize=None)
def _index_tables(n):
    """Subset rank bookkeeping for the shared-subproblem permanent sweep."""
    masks = []
    rank = np.zeros(1 << n, dtype=np.int64)
    for j in range(n + 1):
        ms = np.array(
            [sum(1 << i for i in c) for c in itertools.combinations(range(n), j)],
            dtype=np.int64,
        )
        masks.append(ms)
        rank[ms] = np.arange(len(ms))
    full = (1 << n) - 1
    complement = tuple(rank[full ^ masks[j]] for j in range(n + 1))
    # member[j][i]: ranks at level j of subsets containing i, and ranks at
    # level j-1 of those subsets with i removed.
    member = []
    for j in range(n + 1):
        per_row = []
        if j >= 1:
            ms = masks[j]
            for i in range(n):
                sel = ((ms >> i) & 1) == 1
                per_row.append((np.nonzero(sel)[0], rank[ms[sel] ^ (1 << i)]))
        member.append(tuple(per_row))
    # extend[j]: level-j subsets grouped by their largest element t, paired
    # with the rank of the subset minus t at level j-1.
    extend = []
    for j in range(n + 1):
        groups = []
        if j >= 1:
            ms = masks[j]
            top = np.array([int(m).bit_length() - 1 for m in ms])
            for t in range(n):
                sel = top == t
                if sel.any():
                    groups.append((t, np.nonzero(sel)[0], rank[ms[sel] ^ (1 << t)]))
        extend.append(tuple(groups))
    return tuple(masks), complement, tuple(member), tuple(extend)


def _submatrix_permanents(mats, tables):
    """tabs[j][b, rank(J), rank(I)] = Per(mats[b][rows I, cols J]) for |I| = |J| = j.

    Laplace-style recursion on the largest column: Per(rows I, cols J) =
    sum_{i in I} M[i, max J] Per(I - i, J - max J), batched over matrices.
    """
    batch, n, _ = mats.shape
    masks, _, member, extend = tables
    tabs = [np.ones((batch, 1, 1), dtype=mats.dtype)]
    for j in range(1, n + 1):
        size = len(masks[j])
        level = np.zeros((batch, size, size), dtype=mats.dtype)
        for t, col_ranks, col_prev in extend[j]:
            prev = tabs[j - 1][:, col_prev, :]
            block = np.zeros((batch, len(col_ranks), size), dtype=mats.dtype)
            for i in range(n):
                row_ranks, row_prev = member[j][i]
                block[:, :, row_ranks] += mats[:, i, t][:, None, None] * prev[:, :, row_prev]
            level[:, col_ranks, :] = block
        tabs.append(level)
    return tabs


def fixed_j_profile_batch(mats):
    """q_j(X)/N! for j = 0..N, for a batch of square matrices.

    Parameters
    ----------
    mats : array, shape (batch, n, n) or (n, n)

    Returns
    -------
    array, shape (batch, n+1)
        Row b holds q_0(X_b)/n! .. q_n(X_b)/n!; every entry is a sum of
        nonnegative products, so no cancellation occurs.
    """
    mats = np.asarray(mats, dtype=np.complex128)
    if mats.ndim == 2:
        mats = mats[None]
    if mats.ndim != 3 or mats.shape[1] != mats.shape[2]:
        raise DimensionError(f"expected (batch, n, n) matrices, got shape {mats.shape}")
    n = mats.shape[1]
    if n > MAX_PHOTONS:
        raise DeskScaleError(f"n = {n} exceeds the n <= {MAX_PHOTONS} cost guard")
    tables = _index_tables(n)
    complement = tables[1]
    amp = _submatrix_permanents(mats, tables)
    weight = _submatrix_permanents((mats.real**2 + mats.imag**2).astype(np.float64), tables)
    out = np.empty((mats.shape[0], n + 1))
    scale = math.factorial(n)
    for j in range(n + 1):
        interfering = amp[j].real**2 + amp[j].imag**2
        classical = weight[n - j][:, complement[j], :][:, :, complement[j]]
        out[:, j] = np.einsum("bts,bts->b", interfering, classical) / (math.comb(n, j) * scale)
    return out


@lru_cache(maxsize=128)
def _profile_cached(data, n):
    mat = np.frombuffer(data, dtype=np.complex128).reshape(n, n)
    prof = fixed_j_profile_batch(mat)[0]
    prof.setflags(write=False)
    return prof


def fixed_j_profile(x):
    """q_j(X)/N! for j = 0..N for one matrix, cached per matrix contents."""
    a, n = _square_input(x)
    return _profile_cached(np.ascontiguousarray(a).tobytes(), n)


# ---------------------------------------------------------------------------
# Probability formulas
# ---------------------------------------------------------------------------


def q_ideal(x_mat):
    """|Per(X)|^2 / N!: the fully indistinguishable output probability."""
    a, n = _square_input(x_mat)
    return _prob(abs(permanent_complex(a)) ** 2 / math.factorial(n), n)


def q_fixed_j(j, x_mat):
    """Output probability with exactly j of the N photons indistinguishable.

    q_j(X)/N! = C(N,j)^{-1} sum_{|I|=|J|=j} |Per(X_{I,J})|^2 Per(|X|^2_{Ibar,Jbar}) / N!.
    """
    a, n = _square_input(x_mat)
    j = int(j)
    if not 0 <= j <= n:
        raise DomainError(f"j must lie in 0..{n}, got {j}")
    return _prob(fixed_j_profile(a)[j], n)


def q_noisy_binomial(x, x_mat):
    """Noisy output probability q(x, X)/N! via the binomial mixture over j."""
    a, n = _square_input(x_mat)
    weights = binomial_weights(n, x)
    return _prob(float(weights @ fixed_j_profile(a)), n)


def q_noisy_permpair(x, x_mat):
    """q(x, X)/N! summed directly over permutation pairs (small-N oracle).

    Cost O((N!)^2 N); refuses N > 6.  The imaginary residue of the pair sum
    must vanish to rounding scale and is then discarded.
    """
    a, n = _square_input(x_mat, limit=MAX_PERMPAIR_PHOTONS)
    x = _check_x(x)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    prods = np.prod(a[perms, np.arange(n)], axis=1)
    matches = (perms[:, None, :] == perms[None, :, :]).sum(axis=2)
    weights = x ** (n - matches).astype(np.float64)  # 0^0 = 1 handles x = 0
    total = prods @ (weights @ prods.conj())
    if abs(total.imag) > 1e-9 * (1.0 + abs(total.real)):
        raise InternalConsistencyError(f"permutation-pair sum has imaginary residue {total.imag}")
    return _prob(total.real / math.factorial(n), n)


def q_truncated(l, x, x_mat):
    """Truncated probability q^(l)(x, X)/N!: only the top l+1 binomial terms.

    Keeps j = N-l..N; the dropped j < N-l terms are the binomial tail whose
    size is controlled by ``bounds.binomial_tail``.
    """
    a, n = _square_input(x_mat)
    l = int(l)
    if not 0 <= l <= n:
        raise DomainError(f"truncation degree l must lie in 0..{n}, got {l}")
    weights = binomial_weights(n, x)[n - l :]
    return _prob(float(weights @ fixed_j_profile(a)[n - l :]), n)


def f_poly_eval(l, x, x_mat):
    """The degree-l polynomial f(x) = x^(l-N) q^(l)(x, X)/N!.

    f(1) equals q_ideal(X); the nodes of the extrapolation pipeline are
    evaluations of this polynomial.  x = 0 is outside the domain (negative
    power).
    """
    x = float(x)
    if x <= 0.0:
        raise DomainError("f_poly_eval requires x > 0")
    value = q_truncated(l, x, x_mat).value
    n = np.asarray(x_mat).shape[0]
    return value * math.exp((int(l) - n) * math.log(x))


def _loss_input(x_mat, n):
    a = np.asarray(x_mat, dtype=np.complex128)
    if a.ndim != 2:
        raise DimensionError(f"expected an n x N matrix, got shape {a.shape}")
    n = int(n)
    if a.shape[0] != n:
        raise DimensionError(f"matrix has {a.shape[0]} rows but n = {n}")
    if n < 1 or n > a.shape[1]:
        raise DimensionError(f"need 1 <= n <= N, got n = {n}, N = {a.shape[1]}")
    if a.shape[1] > MAX_PHOTONS:
        raise DeskScaleError(f"N = {a.shape[1]} exceeds the N <= {MAX_PHOTONS} cost guard")
    if not np.all(np.isfinite(a)):
        raise DomainError("matrix contains non-finite entries")
    return a, n, a.shape[1]


def _check_eta(eta):
    eta = float(eta)
    if not 0.0 <= eta <= 1.0:
        raise DomainError(f"transmission eta must lie in [0,1], got {eta}")
    return eta


def q_loss_dist(x, eta, n, x_mat):
    """Loss + distinguishability probability of an n-photon outcome, q/n! units.

    For an n x N input matrix (n surviving photons out of N),

        q(x, eta, X) = eta^n (1-eta)^(N-n) sum_{|K|=n} q(x, X_K),

    with X_K the column submatrix and q the binomial-mixture probability.
    The binomial loss prefactor is kept in (no post-selection on n).
    """
    a, n, n_in = _loss_input(x_mat, n)
    eta = _check_eta(eta)
    x = _check_x(x)
    total = math.fsum(
        q_noisy_binomial(x, a[:, list(cols)]).value for cols in itertools.combinations(range(n_in), n)
    )
    return _prob(eta**n * (1.0 - eta) ** (n_in - n) * total, n)


def q_loss(eta, n, x_mat):
    """Pure-loss probability of an n-photon outcome, q/n! units.

    q(eta, X) = eta^n (1-eta)^(N-n) sum_{|K|=n} |Per(X_K)|^2.  Unlike the
    distinguishability case this does not converge to the ideal probability
    as eta -> 1 unless n = N.
    """
    a, n, n_in = _loss_input(x_mat, n)
    eta = _check_eta(eta)
    total = math.fsum(
        abs(permanent_complex(a[:, list(cols)])) ** 2 for cols in itertools.combinations(range(n_in), n)
    )
    return _prob(eta**n * (1.0 - eta) ** (n_in - n) * total / math.factorial(n), n)
