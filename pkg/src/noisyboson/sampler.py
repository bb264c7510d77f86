"""Desk-scale sampler and exact distribution for noisy boson sampling.

Operational model of the indistinguishability rate x: each of the N photons
independently stays indistinguishable with probability x.  The surviving
indistinguishable set interferes (outcome multisets weighted by
|Per(U_{T,I})|^2 / mu(T)); the distinguishable photons land independently in
mode m with probability |U_{m,i}|^2.  The observed outcome is the multiset
union.  On collision-free outcomes this mixture reproduces the
binomial-mixture probability formula exactly; its extension to collision
outcomes is the operational definition used here.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter, defaultdict
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import DeskScaleError, DimensionError, DomainError
from .noisyprob import _check_x
from .permanent import permanent_complex
from .randmat import generator

MAX_SAMPLER_PHOTONS = 6
MAX_SAMPLER_MODES = 12
_UNITARY_TOL = 1e-8


@dataclass(frozen=True)
class OutcomePattern:
    """A sorted multiset of output modes with its multiplicity product mu(S)."""

    modes: tuple
    multiplicity_product: int

    @classmethod
    def from_modes(cls, modes):
        modes = tuple(sorted(int(m) for m in modes))
        if any(m < 0 for m in modes):
            raise DomainError(f"mode indices must be >= 0, got {modes}")
        mu = 1
        for count in Counter(modes).values():
            mu *= math.factorial(count)
        return cls(modes=modes, multiplicity_product=mu)

    @property
    def collision_free(self):
        return self.multiplicity_product == 1

    def label(self):
        return "-".join(str(m) for m in self.modes)


def _checked_unitary(u, n_photons):
    a = np.asarray(u, dtype=np.complex128)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionError(f"expected a square unitary, got shape {a.shape}")
    m = a.shape[0]
    n = int(n_photons)
    if n < 1 or n > m:
        raise DimensionError(f"need 1 <= N <= M, got N = {n}, M = {m}")
    if n > MAX_SAMPLER_PHOTONS or m > MAX_SAMPLER_MODES:
        raise DeskScaleError(
            f"sampler is capped at N <= {MAX_SAMPLER_PHOTONS}, M <= {MAX_SAMPLER_MODES}, got N = {n}, M = {m}"
        )
    defect = np.max(np.abs(a.conj().T @ a - np.eye(m)))
    if defect > _UNITARY_TOL:
        raise DomainError(f"matrix is not unitary (max |U^H U - I| = {defect:.3g})")
    return a, n, m


@lru_cache(maxsize=64)
def _interference_cached(u_bytes, m, cols):
    u = np.frombuffer(u_bytes, dtype=np.complex128).reshape(m, m)
    j = len(cols)
    outcomes = list(itertools.combinations_with_replacement(range(m), j))
    probs = np.empty(len(outcomes))
    for idx, modes in enumerate(outcomes):
        pattern = OutcomePattern.from_modes(modes)
        sub = u[np.array(modes, dtype=np.intp)[:, None], np.array(cols, dtype=np.intp)[None, :]]
        probs[idx] = abs(permanent_complex(sub)) ** 2 / pattern.multiplicity_product
    total = probs.sum()  # 1 up to rounding for unitary u; renormalize anyway
    return tuple(outcomes), probs / total


def _interference_distribution(u, cols):
    """Multiset outcome distribution of |cols| fully interfering photons."""
    if not cols:
        return ((),), np.array([1.0])
    return _interference_cached(np.ascontiguousarray(u).tobytes(), u.shape[0], tuple(cols))


def _classical_distribution(u, photons):
    """Multiset outcome distribution of independently routed photons."""
    dist = {(): 1.0}
    for i in photons:
        col = np.abs(u[:, i]) ** 2
        nxt = defaultdict(float)
        for modes, p in dist.items():
            for mode in range(u.shape[0]):
                if col[mode] > 0.0:
                    nxt[tuple(sorted(modes + (mode,)))] += p * col[mode]
        dist = dict(nxt)
    return dist


def exact_distribution(u, x, n_photons, n_modes=None):
    """Full outcome distribution of the noisy sampler, by exhaustive sums.

    Sums over all 2^N indistinguishable subsets with Bernoulli(x) weights and
    convolves the interference distribution of the subset with the product
    distribution of the remaining classical photons.

    Returns
    -------
    dict mapping OutcomePattern to probability; sums to 1 up to rounding.
    """
    a, n, m = _checked_unitary(u, n_photons)
    if n_modes is not None and int(n_modes) != m:
        raise DimensionError(f"unitary is {m}x{m} but n_modes = {n_modes}")
    x = _check_x(x)
    acc = defaultdict(float)
    for r in range(n + 1):
        bern = x**r * (1.0 - x) ** (n - r)
        if bern == 0.0:
            continue
        for subset in itertools.combinations(range(n), r):
            classical = _classical_distribution(a, [i for i in range(n) if i not in subset])
            outcomes, probs = _interference_distribution(a, list(subset))
            for modes_i, p_i in zip(outcomes, probs):
                if p_i == 0.0:
                    continue
                for modes_c, p_c in classical.items():
                    acc[tuple(sorted(modes_i + modes_c))] += bern * p_i * p_c
    return {OutcomePattern.from_modes(modes): p for modes, p in sorted(acc.items())}


def _draw(rng, a, n, x, classical_cdfs):
    """One sample: Bernoulli vector, then interference draw, then classical
    photons in increasing photon index (fixed draw order for determinism)."""
    keep = rng.random(n) < x
    subset = tuple(int(i) for i in np.nonzero(keep)[0])
    if subset:
        outcomes, probs = _interference_distribution(a, list(subset))
        cdf = np.cumsum(probs)
        idx = int(np.searchsorted(cdf, rng.random() * cdf[-1]))
        modes = list(outcomes[min(idx, len(outcomes) - 1)])
    else:
        modes = []
    for i in range(n):
        if not keep[i]:
            j = int(np.searchsorted(classical_cdfs[:, i], rng.random() * classical_cdfs[-1, i]))
            modes.append(min(j, a.shape[0] - 1))
    return OutcomePattern.from_modes(modes)


def sample_outcome(u, x, n_photons, seed):
    """Draw one outcome pattern from the noisy sampler (stream = f(seed))."""
    a, n, _ = _checked_unitary(u, n_photons)
    x = _check_x(x)
    cdfs = np.cumsum(np.abs(a) ** 2, axis=0)
    return _draw(generator(seed), a, n, x, cdfs)


def sample_outcomes(u, x, n_photons, trials, seed):
    """Independent samples with per-trial streams derived as (seed, trial).

    Trial t reproduces bit-identically no matter how the batch is split
    across workers, because its stream depends only on (seed, t).
    """
    trials = int(trials)
    if trials < 1:
        raise DomainError("trials must be >= 1")
    a, n, _ = _checked_unitary(u, n_photons)
    x = _check_x(x)
    cdfs = np.cumsum(np.abs(a) ** 2, axis=0)
    return [_draw(generator(seed, t), a, n, x, cdfs) for t in range(trials)]


def empirical_distribution(outcomes):
    """Normalized histogram of a list of outcome patterns."""
    counts = Counter(outcomes)
    total = sum(counts.values())
    return {pattern: count / total for pattern, count in sorted(counts.items(), key=lambda kv: kv[0].modes)}


def tv_distance(p, q):
    """Total variation distance (1/2) sum_S |p(S) - q(S)| over the joint support."""
    keys = set(p) | set(q)
    return 0.5 * math.fsum(abs(p.get(key, 0.0) - q.get(key, 0.0)) for key in keys)
