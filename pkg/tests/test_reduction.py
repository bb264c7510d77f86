import math

import numpy as np
import pytest

from noisyboson import (
    DeskScaleError,
    DimensionError,
    DomainError,
    OracleSpec,
    amplification_factor,
    estimate_permanent_sq,
    f_poly_eval,
    interpolation_nodes,
    kondo_bound,
    lagrange_extrapolate,
    make_params,
    params_with,
    q_ideal,
    q_noisy_binomial,
    query_oracle,
    rescale_z,
    sample_gaussian_matrix,
)
from noisyboson.reduction import RESULT_CSV_HEADER, result_csv_row


def small_params(n, l=None, **kw):
    """Params with k_min pinned to 1 (c_min = 1/log N), handy at desk scale."""
    return make_params(1.0 / math.log(n), n, 0.1, 0.05, l=l, **kw)


# ---------------------------------------------------------------------------
# make_params
# ---------------------------------------------------------------------------


def test_appendix_constants():
    p = make_params(0.3, 1000, 0.1, 0.05)
    assert p.kappa == 2.108 and p.lam == 2.149
    assert p.Delta == pytest.approx(0.35650, abs=5e-5)
    assert p.c_max == pytest.approx(2.108 * 0.3, rel=1e-12)
    assert p.c_max == pytest.approx(0.6324, abs=5e-5)
    assert p.l == math.ceil(p.c_l * math.log(1000))
    assert p.k_grid[0] == pytest.approx(p.k_min) and p.k_grid[-1] == pytest.approx(p.k_max)
    assert len(p.k_grid) == p.l + 1


def test_delta_choice_bernoulli_inequality():
    for delta0 in (0.01, 0.2, 0.9):
        for n in (100, 1000):
            p = make_params(0.2, n, 0.1, delta0)
            assert p.delta == pytest.approx(delta0 / (2 * (p.l + 1)))
            assert (1 - 2 * p.delta) ** (p.l + 1) >= 1 - delta0


def test_eps_follows_theorem_scaling():
    p = make_params(0.25, 100, 0.1, 0.05)
    assert p.eps == pytest.approx(0.1**7.1 * 0.05**6.1 * 100 ** (-40 * 0.25), rel=1e-12)
    doubled = make_params(0.25, 100, 0.1, 0.05, eps_scale=2.0)
    assert doubled.eps == pytest.approx(2 * p.eps, rel=1e-12)


def test_make_params_refuses_desk_scale_overflow():
    # the derived degree exceeds N for small N at this c_min
    with pytest.raises(DeskScaleError):
        make_params(1.0, 10, 0.1, 0.05)


def test_make_params_validation():
    with pytest.raises(DomainError):
        make_params(-0.1, 100, 0.1, 0.05)
    with pytest.raises(DomainError):
        make_params(0.3, 100, 1.5, 0.05)
    with pytest.raises(DomainError):
        make_params(0.3, 100, 0.1, 0.05, kappa=0.9)
    with pytest.raises(DomainError):
        small_params(8, l=2)  # l <= k_max


def test_params_with_override():
    p = small_params(8, l=8)
    q = params_with(p, eps=1e-9)
    assert q.eps == 1e-9 and q.l == p.l


# ---------------------------------------------------------------------------
# nodes and rescaling
# ---------------------------------------------------------------------------


def test_nodes_count_and_spacing():
    p = small_params(8, l=6)
    nodes = interpolation_nodes(p, 8)
    assert len(nodes) == 7
    ks = [k for k, _ in nodes]
    gaps = np.diff(ks)
    assert np.max(np.abs(gaps - (p.k_max - p.k_min) / p.l)) <= 1e-15
    assert all(0 < x < 1 for _, x in nodes)


def test_nodes_degenerate_degree_one():
    p = small_params(8, l=6)
    p = params_with(p, l=1, k_grid=(p.k_min, p.k_max))
    nodes = interpolation_nodes(p, 8)
    assert [k for k, _ in nodes] == [pytest.approx(p.k_min), pytest.approx(p.k_max)]


def test_nodes_example_arithmetic():
    # l = 2, k in [2,4], N = 10 -> x = 0.8, 0.7, 0.6
    p = make_params(2.0 / math.log(10), 10, 0.1, 0.05, kappa=2.0, l=5)
    p = params_with(p, l=2, k_grid=(2.0, 3.0, 4.0), k_min=2.0, k_max=4.0)
    xs = [x for _, x in interpolation_nodes(p, 10)]
    assert xs == [pytest.approx(0.8), pytest.approx(0.7), pytest.approx(0.6)]


def test_nodes_refuse_nonpositive_x():
    p = small_params(8, l=6)
    bad = params_with(p, k_grid=(1.0, 8.0), k_max=8.0)
    with pytest.raises(DomainError):
        interpolation_nodes(bad, 8)


def test_nodes_check_matching_n():
    p = small_params(8, l=6)
    with pytest.raises(DimensionError):
        interpolation_nodes(p, 9)


def test_rescale_affine_identities():
    k_min, k_max, n = 2.0, 4.0, 10
    delta = (k_max - k_min) / (k_max + k_min)
    assert rescale_z(1.0, k_min, k_max, n) == pytest.approx(1.0, abs=1e-14)
    assert rescale_z(-delta, k_min, k_max, n) == pytest.approx(1 - k_max / n, abs=1e-14)
    assert rescale_z(delta, k_min, k_max, n) == pytest.approx(1 - k_min / n, abs=1e-14)
    assert rescale_z(0.0, k_min, k_max, n) == pytest.approx(0.7, abs=1e-14)


# ---------------------------------------------------------------------------
# oracle
# ---------------------------------------------------------------------------


def test_oracle_exact_mode():
    x_mat = sample_gaussian_matrix(4, 4, 1)
    spec = OracleSpec(mode="exact")
    assert query_oracle(spec, 0.75, x_mat) == q_noisy_binomial(0.75, x_mat).value


def test_oracle_zero_eps_modes_are_exact():
    x_mat = sample_gaussian_matrix(4, 4, 2)
    expected = q_noisy_binomial(0.6, x_mat).value
    for mode in ("uniform-noise", "adversarial-sign"):
        spec = OracleSpec(mode=mode, eps=0.0, seed=5)
        assert query_oracle(spec, 0.6, x_mat, node_index=3) == pytest.approx(expected, rel=1e-15)


def test_oracle_uniform_noise_bounded_and_seeded():
    x_mat = sample_gaussian_matrix(3, 3, 3)
    spec = OracleSpec(mode="uniform", eps=1e-3, seed=11)
    exact = q_noisy_binomial(0.5, x_mat).value
    vals = [query_oracle(spec, 0.5, x_mat, node_index=i) for i in range(10_000)]
    devs = np.abs(np.array(vals) - exact)
    assert np.max(devs) <= 1e-3
    assert np.max(devs) > 1e-4  # the noise is actually there
    again = [query_oracle(spec, 0.5, x_mat, node_index=i) for i in range(10)]
    assert again == vals[:10]


def test_oracle_adversarial_alternates():
    x_mat = sample_gaussian_matrix(3, 3, 4)
    spec = OracleSpec(mode="adversarial", eps=1e-2, seed=0)
    exact = q_noisy_binomial(0.5, x_mat).value
    assert query_oracle(spec, 0.5, x_mat, node_index=0) == pytest.approx(exact + 1e-2)
    assert query_oracle(spec, 0.5, x_mat, node_index=1) == pytest.approx(exact - 1e-2)


def test_oracle_failing_rate():
    x_mat = sample_gaussian_matrix(3, 3, 5)
    spec = OracleSpec(mode="failing", eps=1e-4, delta=0.3, seed=21)
    exact = q_noisy_binomial(0.5, x_mat).value
    devs = np.array([abs(query_oracle(spec, 0.5, x_mat, node_index=i) - exact) for i in range(4000)])
    failures = np.mean(devs > 1e-4)
    assert abs(failures - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / 4000)
    assert np.max(devs[devs > 1e-4]) == pytest.approx(1e-1, rel=1e-6)


def test_oracle_domain():
    x_mat = sample_gaussian_matrix(3, 3, 6)
    spec = OracleSpec()
    with pytest.raises(DomainError):
        query_oracle(spec, 0.0, x_mat)
    with pytest.raises(DomainError):
        query_oracle(spec, 0.9, x_mat, x_star=0.875)
    with pytest.raises(DomainError):
        OracleSpec(mode="psychic")


# ---------------------------------------------------------------------------
# extrapolation
# ---------------------------------------------------------------------------


def test_lagrange_reproduces_polynomial():
    pts = [(-1.0, 2.0), (0.0, -1.0), (1.0, 2.0)]  # y = 3x^2 - 1
    assert lagrange_extrapolate(pts, 2.0) == pytest.approx(11.0, rel=1e-12)


def test_lagrange_constant_and_node_hit():
    assert lagrange_extrapolate([(0.0, 5.0)], 1.0) == 5.0
    pts = [(0.0, 1.0), (1.0, 4.0)]
    assert lagrange_extrapolate(pts, 1.0) == 4.0


def test_lagrange_exact_for_degree_l_synthetic():
    rng = np.random.default_rng(0)
    for l in (2, 4, 6):
        for _ in range(20):
            coeffs = rng.standard_normal(l + 1)
            xs = np.linspace(-0.3565, 0.3565, l + 1)
            pts = list(zip(xs, np.polynomial.polynomial.polyval(xs, coeffs)))
            got = lagrange_extrapolate(pts, 1.0)
            want = float(np.polynomial.polynomial.polyval(1.0, coeffs))
            assert abs(got - want) <= 1e-10 * (1 + abs(want))


def test_lagrange_error_tracks_amplification_at_high_degree():
    # past degree ~7 the reachable accuracy is set by the node amplification
    # factor times machine epsilon, not by a flat tolerance
    rng = np.random.default_rng(1)
    for l in (8, 10, 12):
        bound = amplification_factor(l, 0.3565) * 1e-15
        for _ in range(20):
            coeffs = rng.standard_normal(l + 1)
            xs = np.linspace(-0.3565, 0.3565, l + 1)
            pts = list(zip(xs, np.polynomial.polynomial.polyval(xs, coeffs)))
            got = lagrange_extrapolate(pts, 1.0)
            want = float(np.polynomial.polynomial.polyval(1.0, coeffs))
            assert abs(got - want) <= bound * (1 + abs(want))


def test_lagrange_duplicate_nodes():
    with pytest.raises(DomainError):
        lagrange_extrapolate([(0.0, 1.0), (0.0, 2.0)], 1.0)
    with pytest.raises(DomainError):
        lagrange_extrapolate([], 0.0)


def test_amplification_examples():
    assert amplification_factor(0, 0.5) == 1.0
    assert amplification_factor(4, 0.5) == pytest.approx(873.5, abs=0.1)
    for l in range(1, 13):
        for delta in (0.2, 0.35649935649935655, 0.7):
            assert amplification_factor(l, delta) >= kondo_bound(1.0, l, delta)


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------


def test_pipeline_exact_oracle_full_degree():
    for n in (4, 6):
        p = small_params(n, l=n)
        for seed in range(5):
            x_mat = sample_gaussian_matrix(n, n, 300 + seed)
            res = estimate_permanent_sq(x_mat, OracleSpec(mode="exact"), p)
            assert res.truth == pytest.approx(q_ideal(x_mat).value, rel=1e-12)
            assert res.abs_error <= 1e-8 * (1 + res.truth)
            assert res.success
            assert len(res.nodes) == n + 1


def test_pipeline_truncation_only_stays_in_budget():
    n = 8
    p = small_params(n, l=6)
    x_mat = sample_gaussian_matrix(n, n, 77)
    res = estimate_permanent_sq(x_mat, OracleSpec(mode="exact"), p)
    assert res.abs_error <= res.kondo_budget


def test_pipeline_node_values_are_f_poly_under_exact_oracle():
    n = 6
    p = small_params(n, l=6)
    x_mat = sample_gaussian_matrix(n, n, 13)
    res = estimate_permanent_sq(x_mat, OracleSpec(mode="exact"), p)
    for k_i, x_i, y_i in res.nodes:
        assert y_i == pytest.approx(f_poly_eval(p.l, x_i, x_mat), rel=1e-12)


def test_pipeline_kondo_lemma_with_actual_node_errors():
    # the interpolation error never exceeds the bound evaluated at the
    # *actual* max node deviation (the lemma itself, not the budget chain)
    n = 8
    p = small_params(n, l=6)
    for seed in range(10):
        x_mat = sample_gaussian_matrix(n, n, 900 + seed)
        spec = OracleSpec(mode="uniform", eps=1e-5, seed=seed)
        res = estimate_permanent_sq(x_mat, spec, p)
        eps_actual = max(
            abs(y_i - f_poly_eval(p.l, x_i, x_mat)) for _, x_i, y_i in res.nodes
        )
        assert res.abs_error <= kondo_bound(eps_actual, p.l, p.Delta) + 1e-9 * (1 + res.truth)


def test_pipeline_deterministic():
    n = 6
    p = small_params(n, l=6)
    x_mat = sample_gaussian_matrix(n, n, 55)
    spec = OracleSpec(mode="uniform", eps=1e-4, seed=999)
    a = estimate_permanent_sq(x_mat, spec, p)
    b = estimate_permanent_sq(x_mat, spec, p)
    assert a == b


def test_pipeline_budget_reporting():
    n = 8
    p = small_params(n, l=6)
    x_mat = sample_gaussian_matrix(n, n, 1)
    res = estimate_permanent_sq(x_mat, OracleSpec(mode="exact"), p)
    assert res.eps2_paper >= res.eps2_exact > 0
    assert res.kondo_budget > 0
    assert res.abs_error == abs(res.estimate - res.truth)


def test_pipeline_shape_checks():
    p = small_params(6, l=6)
    with pytest.raises(DimensionError):
        estimate_permanent_sq(sample_gaussian_matrix(5, 5, 0), OracleSpec(), p)
    with pytest.raises(DimensionError):
        estimate_permanent_sq(sample_gaussian_matrix(5, 6, 0), OracleSpec(), p)


def test_result_csv_row_layout():
    n = 6
    p = small_params(n, l=6)
    spec = OracleSpec(mode="exact")
    res = estimate_permanent_sq(sample_gaussian_matrix(n, n, 8), spec, p)
    row = result_csv_row(123, p, spec, res)
    assert len(row) == len(RESULT_CSV_HEADER)
    assert row[0] == "123" and row[1] == "6" and row[-1] in ("0", "1")
