"""Closed-form tail and interpolation bounds, with an empirical harness.

Tail and bound arithmetic runs in log space (log-gamma binomials) so the
formulas stay usable for N in the hundreds even though probability
evaluations elsewhere cap at desk scale.  ``verify_lemma1`` draws Gaussian
matrices and measures how often the truncation error of the binomial-mixture
probability exceeds its closed-form budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DeskScaleError, DomainError, InternalConsistencyError
from .noisyprob import binomial_weights, fixed_j_profile_batch
from .randmat import derive_seed, sample_gaussian_matrix

_LEMMA1_MAX_PHOTONS = 10


@dataclass(frozen=True)
class TailReport:
    """Outcome of one empirical truncation-error run.

    ``empirical_violation_rate`` is the fraction of sampled matrices whose
    truncation error |q - q^(l)| exceeded ``epsilon1`` (all in q/N! units).
    """

    N: int
    x: float
    l: int
    exact_tail: float
    chernoff_bound: float
    empirical_violation_rate: float
    epsilon1: float
    trials: int

    CSV_HEADER = ("N", "x", "l", "exact_tail", "chernoff_bound", "empirical_violation_rate", "epsilon1", "trials")

    def to_json_dict(self):
        return {
            "N": self.N,
            "x": self.x,
            "l": self.l,
            "exact_tail": self.exact_tail,
            "chernoff_bound": self.chernoff_bound,
            "empirical_violation_rate": self.empirical_violation_rate,
            "epsilon1": self.epsilon1,
            "trials": self.trials,
        }

    def csv_row(self):
        return [
            str(self.N),
            f"{self.x:.17g}",
            str(self.l),
            f"{self.exact_tail:.17g}",
            f"{self.chernoff_bound:.17g}",
            f"{self.empirical_violation_rate:.17g}",
            f"{self.epsilon1:.17g}",
            str(self.trials),
        ]


def binomial_tail(n, x, l):
    """Exact lower binomial tail sum_{j=0}^{N-l-1} C(N,j) x^j (1-x)^(N-j).

    Equivalently the probability that more than l of N photons are
    distinguishable at indistinguishability rate x.  Computed term by term in
    log space and compensated-summed.
    """
    n, l = int(n), int(l)
    if not 0 <= l <= n:
        raise DomainError(f"l must lie in 0..{n}, got {l}")
    x = float(x)
    if not 0.0 <= x <= 1.0:
        raise DomainError(f"x must lie in [0,1], got {x}")
    terms = []
    for j in range(0, n - l):
        if x == 0.0:
            terms.append(1.0 if j == 0 else 0.0)
            continue
        if x == 1.0:
            terms.append(0.0)
            continue
        log_term = (
            math.lgamma(n + 1)
            - math.lgamma(j + 1)
            - math.lgamma(n - j + 1)
            + j * math.log(x)
            + (n - j) * math.log1p(-x)
        )
        terms.append(math.exp(log_term))
    return math.fsum(terms)


def chernoff_tail_bound(n, x, l):
    """The simplified Chernoff-Hoeffding tail budget exp(-(k/3)(l/k - 1)^2).

    Here k = (1-x)N is the mean number of distinguishable photons.  Only the
    direction l >= k is meaningful; note the (l/k - 1)^2/3 exponent is the
    small-deviation form and stops dominating the exact tail once l/k grows
    past roughly 2.
    """
    n = int(n)
    x = float(x)
    k = (1.0 - x) * n
    if k <= 0.0:
        raise DomainError(f"needs k = (1-x)N > 0, got x = {x}, N = {n}")
    l = float(l)
    if l < k:
        raise DomainError(f"bound direction requires l >= k, got l = {l}, k = {k}")
    return math.exp(-(k / 3.0) * (l / k - 1.0) ** 2)


def epsilon1_log(c_max, c_l, n, delta):
    """Truncation budget for log-scale noise: delta^-1 N^(-(c_max/3)(c_l/c_max - 1)^2)."""
    c_max, c_l = float(c_max), float(c_l)
    if not c_l > c_max > 0.0:
        raise DomainError(f"needs c_l > c_max > 0, got c_l = {c_l}, c_max = {c_max}")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0,1), got {delta}")
    exponent = -(c_max / 3.0) * (c_l / c_max - 1.0) ** 2
    return math.exp(exponent * math.log(n) - math.log(delta))


def epsilon1_sublog(l, k_max, n, delta):
    """Truncation budget for sub-log noise: delta^-1 N exp(-l log(l/k_max) + l - k_max)."""
    l, k_max = float(l), float(k_max)
    if not l > k_max > 0.0:
        raise DomainError(f"needs l > k_max > 0, got l = {l}, k_max = {k_max}")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0,1), got {delta}")
    return math.exp(-l * math.log(l / k_max) + l - k_max + math.log(n) - math.log(delta))


def kondo_bound(eps, l, Delta):
    """Worst-case extrapolation error at 1 of a degree-l polynomial bounded by
    eps on l+1 equispaced nodes in [-Delta, Delta]:

        eps * exp(l (1 + log(1/Delta))) / sqrt(2 pi l).
    """
    eps = float(eps)
    if eps < 0.0:
        raise DomainError(f"eps must be >= 0, got {eps}")
    l = int(l)
    if l < 1:
        raise DomainError(f"degree l must be >= 1, got {l}")
    Delta = float(Delta)
    if not 0.0 < Delta < 1.0:
        raise DomainError(f"Delta must lie in (0,1), got {Delta}")
    return eps * math.exp(l * (1.0 + math.log(1.0 / Delta))) / math.sqrt(2.0 * math.pi * l)


def truncation_deviations(n, x, l, trials, seed):
    """(q - q^(l))(x, X)/N! for `trials` seeded Gaussian draws of X.

    Per-trial matrices come from streams derived as (seed, trial index), so
    the set of draws is independent of batching or scheduling.  The deviation
    is formed directly as the dropped tail sum, so it is exact (no q minus
    q^(l) cancellation).
    """
    n, l, trials = int(n), int(l), int(trials)
    if not 0 <= l <= n:
        raise DomainError(f"l must lie in 0..{n}, got {l}")
    if trials < 1:
        raise DomainError("trials must be >= 1")
    mats = np.stack([sample_gaussian_matrix(n, n, derive_seed(seed, t)) for t in range(trials)])
    profiles = fixed_j_profile_batch(mats)
    tail_weights = binomial_weights(n, x)[: n - l]
    if tail_weights.size == 0:
        return np.zeros(trials)
    return profiles[:, : n - l] @ tail_weights


def verify_lemma1(n, x, l, trials, seed, delta=0.2, epsilon1=None):
    """Empirically check the truncation-closeness guarantee on Gaussian draws.

    Draws ``trials`` matrices, counts how often |q - q^(l)| exceeds the
    budget ``epsilon1`` (by default derived from the matched constants
    c_max = k/log N, c_l = l/log N at the given failure rate ``delta``), and
    packages the run as a :class:`TailReport`.  The guarantee promises a
    violation rate below ``delta``; the harness allows 3 binomial standard
    errors of slack and raises ``InternalConsistencyError`` beyond that.
    """
    n, l = int(n), int(l)
    if n > _LEMMA1_MAX_PHOTONS:
        raise DeskScaleError(f"verify_lemma1 is capped at N <= {_LEMMA1_MAX_PHOTONS}, got N = {n}")
    x = float(x)
    if not 0.0 <= x < 1.0:
        raise DomainError(f"x must lie in [0,1), got {x}")
    k = (1.0 - x) * n
    if not 0 <= l <= n or l <= k:
        raise DomainError(f"needs k < l <= N, got k = {k}, l = {l}")
    delta = float(delta)
    if not 0.0 < delta < 1.0:
        raise DomainError(f"delta must lie in (0,1), got {delta}")
    if epsilon1 is None:
        log_n = math.log(n)
        epsilon1 = epsilon1_log(k / log_n, l / log_n, n, delta)
    epsilon1 = float(epsilon1)
    deviations = truncation_deviations(n, x, l, trials, seed)
    rate = float(np.mean(deviations > epsilon1))
    report = TailReport(
        N=n,
        x=x,
        l=l,
        exact_tail=binomial_tail(n, x, l),
        chernoff_bound=chernoff_tail_bound(n, x, l),
        empirical_violation_rate=rate,
        epsilon1=epsilon1,
        trials=int(trials),
    )
    slack = 3.0 * math.sqrt(delta * (1.0 - delta) / trials)
    if rate > delta + slack:
        raise InternalConsistencyError(
            f"violation rate {rate} exceeds delta + 3 sigma = {delta + slack} for {report}"
        )
    return report
