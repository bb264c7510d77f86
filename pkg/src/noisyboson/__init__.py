"""Desk-scale numerics for noisy boson sampling.

Exact permanent kernels, output probabilities under partial
distinguishability and photon loss, binomial tail and polynomial
extrapolation bounds, a simulated-oracle pipeline that recovers the ideal
probability from noisy ones, and a small exact sampler.
"""

from .bounds import (
    TailReport,
    binomial_tail,
    chernoff_tail_bound,
    epsilon1_log,
    epsilon1_sublog,
    kondo_bound,
    truncation_deviations,
    verify_lemma1,
)
from .errors import (
    DeskScaleError,
    DimensionError,
    DomainError,
    InternalConsistencyError,
    MatrixFormatError,
)
from .noisyprob import (
    NoiseParams,
    NormalizedProbability,
    binomial_weights,
    f_poly_eval,
    fixed_j_profile,
    fixed_j_profile_batch,
    q_fixed_j,
    q_ideal,
    q_loss,
    q_loss_dist,
    q_noisy_binomial,
    q_noisy_permpair,
    q_truncated,
)
from .permanent import permanent_complex, permanent_naive, permanent_nonneg
from .randmat import (
    derive_seed,
    generator,
    load_matrix,
    matrix_from_payload,
    matrix_to_payload,
    sample_gaussian_matrix,
    sample_haar_unitary,
    save_matrix,
    seed_sequence,
    submatrix,
)
from .reduction import (
    OracleSpec,
    ReductionParams,
    ReductionResult,
    amplification_factor,
    estimate_permanent_sq,
    interpolation_nodes,
    lagrange_extrapolate,
    make_params,
    params_with,
    query_oracle,
    rescale_z,
)
from .sampler import (
    OutcomePattern,
    empirical_distribution,
    exact_distribution,
    sample_outcome,
    sample_outcomes,
    tv_distance,
)

__version__ = "0.1.0"
