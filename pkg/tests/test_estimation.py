import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from blocksparsity.blocks import BlockLayout, BlockSignal, block_sparsity, make_exact_signal, mixed_norm
from blocksparsity.errors import DegenerateDataError, DomainError, EvaluationError, ParameterError
from blocksparsity.estimation import (V_FLOOR, NormEstimate, combine_sparsity, empirical_cf,
                                      estimate_block_sparsity, estimate_norm, invert_cf, norm_ci,
                                      pilot_t, recovery_error_bound, sparsity_variance,
                                      theoretical_constants, theta, v_hat, z_quantile)
from blocksparsity.measurement import MeasurementSet, NoiseModel, project
from blocksparsity.stable import RandomStream

LAYOUT = BlockLayout.uniform(6, 2)


def mset(y, alpha=2.0, gamma=1.0, sigma=0.0, family="gaussian"):
    return MeasurementSet(np.asarray(y, float), alpha, gamma, NoiseModel(family, sigma), LAYOUT)


# ---- empirical CF ------------------------------------------------------------

def test_empirical_cf_examples():
    assert empirical_cf([0.0, 0.0, 0.0], 3.7) == 1 + 0j
    assert empirical_cf([math.pi, -math.pi], 1.0) == pytest.approx(-1 + 0j, abs=1e-15)
    assert empirical_cf([0.3, -2.0, 5.5], 0.0) == 1 + 0j


def test_empirical_cf_empty_sample():
    with pytest.raises(DomainError):
        empirical_cf([], 1.0)


@given(st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=50), st.floats(-10, 10))
def test_empirical_cf_modulus_at_most_one(y, t):
    assert abs(empirical_cf(y, t)) <= 1 + 1e-12


# ---- v_hat -------------------------------------------------------------------

def test_v_hat_direct_example():
    assert v_hat(mset([1.0, -1.0]), 1.0) == pytest.approx(-math.log(math.cos(1.0)), rel=1e-14)
    assert v_hat(mset([1.0, -1.0]), 1.0) == pytest.approx(0.61563, abs=1e-5)


def test_v_hat_rejects_zero_t():
    with pytest.raises(EvaluationError):
        v_hat(mset([1.0, 2.0]), 0.0)


def test_v_hat_rejects_vanishing_noise_cf():
    # uniform noise CF sin(s)/s vanishes at s = pi
    with pytest.raises(EvaluationError, match="noise CF"):
        v_hat(mset([1.0, 2.5], sigma=1.0, family="uniform"), math.pi)


def test_v_hat_rejects_zero_real_part():
    with pytest.raises(EvaluationError, match="zero"):
        v_hat(mset([0.0, math.pi]), 1.0)


def test_v_hat_can_be_negative():
    # |cos| cannot exceed 1, but dividing by a noise CF below one can push the ratio past it
    assert v_hat(mset([0.0, 0.0], sigma=1.0), 1.0) < 0


SIGNALS = [make_exact_signal(1000, 5),
           BlockSignal(np.random.default_rng(1).standard_normal(10), BlockLayout([2, 3, 5])),
           BlockSignal.uniform(np.random.default_rng(2).standard_normal(60) ** 3 / 30, 3)]


@pytest.mark.parametrize("x", SIGNALS, ids=["exact", "unequal", "cubed"])
@pytest.mark.parametrize("alpha", [0.06, 0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("sigma", [0.0, 0.1, 0.7])
@pytest.mark.parametrize("t", [0.05, 0.4, 1.3])
def test_inversion_exact_on_population_cf(x, alpha, sigma, t):
    gamma = 0.9
    noise = NoiseModel("laplace", sigma)
    truth = mixed_norm(x, alpha) ** alpha
    psi = math.exp(-(gamma * t) ** alpha * truth) * noise.cf(sigma * t)
    assert invert_cf(psi, t, alpha, gamma, sigma, noise.cf) == pytest.approx(truth, rel=1e-12)


def test_v_hat_monte_carlo_gaussian_index():
    ms = project(make_exact_signal(1000, 5), 2.0, math.sqrt(2) / 2, 10**4, NoiseModel("gaussian", 0.1),
                 RandomStream(3))
    t, _ = pilot_t(ms, 1.0)
    assert abs(v_hat(ms, t) - 1.0) < 0.1


# ---- pilot ------------------------------------------------------------------

@pytest.mark.parametrize("sigma,expected", [(0.1, 0.5), (10.0, 0.1), (0.0, 0.5)])
def test_pilot_examples(sigma, expected):
    t, m = pilot_t(mset([1.0, -2.0, 3.0], sigma=sigma), 1.0)
    assert m == 2.0
    assert t == pytest.approx(expected)


def test_pilot_all_zero_is_degenerate():
    with pytest.raises(DegenerateDataError):
        pilot_t(mset([0.0, 0.0, 0.0]), 1.0)


def test_pilot_rejects_bad_eta0():
    with pytest.raises(ParameterError):
        pilot_t(mset([1.0]), 0.0)


@settings(max_examples=50)
@given(st.floats(0.01, 100.0), st.sampled_from([0.5, 1.0, 1.5, 2.0]))
def test_scale_equivariance_without_noise(c, alpha):
    y = project(make_exact_signal(100, 5), alpha, 1.0, 200, NoiseModel(), RandomStream(4, int(alpha * 10))).y
    a, b = mset(y, alpha=alpha), mset(c * y, alpha=alpha)
    ta, ma = pilot_t(a, 1.0)
    tb, mb = pilot_t(b, 1.0)
    assert mb == pytest.approx(c * ma, rel=1e-12)
    assert tb == pytest.approx(ta / c, rel=1e-12)
    assert v_hat(b, tb) == pytest.approx(c ** alpha * v_hat(a, ta), rel=1e-9)


# ---- theta -------------------------------------------------------------------

def gauss(s):
    return math.exp(-0.5 * s * s)


@pytest.mark.parametrize("alpha,expected", [
    (2.0, math.exp(2) / 2 + math.exp(-2) / 2 - 1),
    (1.0, math.exp(2) / 2 + 0.5 - 1),
])
def test_theta_noiseless_examples(alpha, expected):
    assert theta(alpha, 1.0, 0.0, gauss) == pytest.approx(expected, rel=1e-14)


def test_theta_example_values():
    assert theta(2.0, 1.0, 0.0, gauss) == pytest.approx(2.76220, abs=1e-5)
    assert theta(1.0, 1.0, 0.0, gauss) == pytest.approx(3.19453, abs=1e-5)


@pytest.mark.parametrize("alpha", [0.06, 0.5, 1.0, 1.5, 2.0])
@pytest.mark.parametrize("c", [-2.0, 0.1, 0.7, 1.5])
@pytest.mark.parametrize("rho", [0.0, 0.2, 0.9])
def test_theta_positive(alpha, c, rho):
    assert theta(alpha, c, rho, gauss) > 0


def test_theta_matches_monte_carlo_variance():
    # sqrt(n) (v_hat/v - 1) at a fixed t has variance theta(gamma t v**(1/alpha), sigma/(gamma v**(1/alpha)))
    alpha, gamma, sigma, t, n, reps = 1.5, 1.0, 0.3, 0.8, 2000, 2000
    x = make_exact_signal(1000, 5)
    v = mixed_norm(x, alpha) ** alpha
    root = RandomStream(5)
    est = np.array([v_hat(project(x, alpha, gamma, n, NoiseModel("gaussian", sigma), root.substream(r)), t)
                    for r in range(reps)])
    c = gamma * t * v ** (1 / alpha)
    rho = sigma / (gamma * v ** (1 / alpha))
    assert np.var(math.sqrt(n) * (est / v - 1)) == pytest.approx(theta(alpha, c, rho, gauss), rel=0.1)


def test_theta_errors():
    with pytest.raises(EvaluationError):
        theta(2.0, 0.0, 0.0, gauss)
    with pytest.raises(EvaluationError):
        theta(2.0, 1.0, math.pi, NoiseModel("uniform").cf)
    with pytest.raises(ParameterError):
        theta(2.0, 1.0, -0.5, gauss)


# ---- estimate_norm and intervals ---------------------------------------------

def test_estimate_norm_noiseless_plugins():
    ms = project(make_exact_signal(1000, 5), 1.5, 0.8, 500, NoiseModel(), RandomStream(6))
    est = estimate_norm(ms, 1.0)
    assert est.rho_hat == 0.0
    assert est.c_hat == pytest.approx(0.8 * est.t_pilot * est.v_hat ** (1 / 1.5), rel=1e-14)
    assert est.theta_hat == pytest.approx(theta(1.5, est.c_hat, 0.0, gauss), rel=1e-14)
    assert est.t_pilot == pytest.approx(1 / est.m_hat)


def test_estimate_norm_cauchy_monte_carlo():
    ms = project(make_exact_signal(1000, 5), 1.0, 1.0, 10**4, NoiseModel("gaussian", 0.1), RandomStream(7))
    est = estimate_norm(ms, 1.0)
    assert abs(est.v_hat - math.sqrt(2)) < 0.1
    assert not est.clamped


def test_estimate_norm_clamps_and_flags():
    est = estimate_norm(mset([1e-3, -1e-3, 2e-3], sigma=5.0), 1.0)
    assert est.clamped and est.v_raw < 0
    assert est.v_hat == V_FLOOR


def test_estimate_norm_default_eta0_follows_noise_family():
    ms = mset([0.5, -1.0, 2.0], sigma=3.0, family="laplace")
    assert estimate_norm(ms).t_pilot == pytest.approx(0.99 / 3.0)


def test_consistency_rate():
    x = make_exact_signal(1000, 5)
    ns = [1000, 4000, 16000, 64000]
    root = RandomStream(8)
    errs = []
    for i, n in enumerate(ns):
        e = [abs(estimate_norm(project(x, 1.0, 1.0, n, NoiseModel("gaussian", 0.1),
                                       root.substream(i, r)), 1.0).v_hat - math.sqrt(2))
             for r in range(60)]
        errs.append(np.mean(e))
    slope = np.polyfit(np.log(ns), np.log(errs), 1)[0]
    assert abs(slope + 0.5) < 0.15


def test_z_quantile():
    assert z_quantile(0.05) == pytest.approx(1.959963984540054, abs=1e-12)
    assert z_quantile(0.5) == pytest.approx(stats.norm.ppf(0.75), abs=1e-12)
    for bad in (0.0, 1.0, -0.1):
        with pytest.raises(ParameterError):
            z_quantile(bad)


def _norm_estimate(v, th, n):
    return NormEstimate(2.0, v, 1.0, 1.0, 1.0, 0.0, th, n)


def test_norm_ci_example():
    lo, hi = norm_ci(_norm_estimate(1.0, 4.0, 400), 0.05)
    assert lo == pytest.approx(0.80400, abs=1e-5)
    assert hi == pytest.approx(1.19600, abs=1e-5)


def test_norm_ci_collapses_as_beta_goes_to_one():
    lo, hi = norm_ci(_norm_estimate(2.5, 4.0, 400), 1 - 1e-12)
    assert lo == pytest.approx(2.5, abs=1e-9) and hi == pytest.approx(2.5, abs=1e-9)


@given(st.floats(1e-3, 1e3), st.floats(0.1, 50), st.integers(10, 10**6), st.floats(0.001, 0.5))
def test_norm_ci_is_symmetric_in_relative_error(v, th, n, beta):
    lo, hi = _norm_estimate(v, th, n).ci(beta)
    assert lo <= v <= hi
    assert (hi - v) == pytest.approx(v - lo, rel=1e-9)


# ---- combining ---------------------------------------------------------------

def test_combine_example():
    assert combine_sparsity(1.0, math.sqrt(2), 2.0) == pytest.approx(2.0, rel=1e-14)


@pytest.mark.parametrize("alpha", [0.5, 2.0, 0.06, 1.5])
@pytest.mark.parametrize("x", SIGNALS, ids=["exact", "unequal", "cubed"])
def test_combine_exact_at_population_level(alpha, x):
    va = mixed_norm(x, alpha) ** alpha
    v1 = mixed_norm(x, 1.0)
    assert combine_sparsity(va, v1, alpha) == pytest.approx(block_sparsity(x, alpha), rel=1e-10)


def test_combine_errors():
    with pytest.raises(ParameterError):
        combine_sparsity(1.0, 1.0, 1.0)
    with pytest.raises(EvaluationError):
        combine_sparsity(0.0, 1.0, 2.0)


def test_sparsity_variance_equal_split():
    assert sparsity_variance(2.0, 3.0, 5.0, 0.5) == pytest.approx(2 * 3.0 + 8 * 5.0)
    with pytest.raises(ParameterError):
        sparsity_variance(2.0, 1.0, 1.0, 1.0)


def test_estimate_block_sparsity_pipeline():
    x = make_exact_signal(1000, 5)
    noise = NoiseModel("gaussian", 0.1)
    root = RandomStream(9)
    y1 = project(x, 1.0, 1.0, 500, noise, root.substream(0))
    y2 = project(x, 2.0, math.sqrt(2) / 2, 500, noise, root.substream(1))
    est = estimate_block_sparsity(y1, y2, 1.0)
    assert est.pi_alpha == 0.5
    assert est.w_hat == pytest.approx(2 * est.norm_alpha.theta_hat + 8 * est.norm_one.theta_hat)
    assert est.ci_low <= est.k_hat <= est.ci_high
    assert abs(est.k_hat - 2.0) < 1.0
    rec = est.as_record()
    assert rec["clamped_flags"] == "00" and rec["k_hat"] == est.k_hat


def test_estimate_block_sparsity_rejects_mismatched_inputs():
    x = make_exact_signal(1000, 5)
    y1 = project(x, 1.0, 1.0, 50, NoiseModel(), RandomStream(10))
    y2 = project(x, 2.0, 1.0, 50, NoiseModel(), RandomStream(11))
    other = project(make_exact_signal(1000, 10), 2.0, 1.0, 50, NoiseModel(), RandomStream(12))
    with pytest.raises(ParameterError):
        estimate_block_sparsity(y2, y1)
    with pytest.raises(ParameterError):
        estimate_block_sparsity(y1, y1)
    with pytest.raises(ParameterError):
        estimate_block_sparsity(y1, other)


# ---- theoretical constants ---------------------------------------------------

def test_theoretical_constant_cauchy_median_is_one():
    c, th = theoretical_constants(1.0, 0.0, 1.0, RandomStream(13), draws=200000)
    assert c == pytest.approx(1.0, abs=0.01)
    assert th == pytest.approx(theta(1.0, c, 0.0, gauss))


def test_theoretical_constant_gaussian_index():
    # median |N(0, 2)| = sqrt(2) * 0.6745
    c, _ = theoretical_constants(2.0, 0.0, 1.0, RandomStream(14), stable_index=2.0, draws=200000)
    assert c == pytest.approx(1 / (math.sqrt(2) * stats.norm.ppf(0.75)), rel=0.01)


@pytest.mark.parametrize("rho", [0.5, 2.0, 10.0])
def test_theoretical_constant_respects_cap(rho):
    c, _ = theoretical_constants(2.0, rho, 1.0, RandomStream(15), draws=20000)
    assert c <= 1.0 / rho + 1e-15


# ---- recovery bound ----------------------------------------------------------

def test_recovery_bound_example():
    value = recovery_error_bound(2.0, 5, 1000, 500, 0.0, 1.0, 1.0, 1.0)
    assert value == pytest.approx(math.sqrt(10 * math.log(2 * math.e) / 500), rel=1e-14)
    assert value == pytest.approx(0.184019, abs=1e-6)


def test_recovery_bound_noise_term():
    base = recovery_error_bound(2.0, 5, 1000, 500, 0.0, 2.0, 1.5, 3.0)
    assert recovery_error_bound(2.0, 5, 1000, 500, 0.4, 2.0, 1.5, 3.0) == pytest.approx(base + 0.6)


@pytest.mark.parametrize("m", [1, 5, 20, 100, 180])
def test_recovery_bound_decreases_when_m_doubles(m):
    n = 1000
    assert 2 * m <= n / math.e
    assert recovery_error_bound(2, 5, n, 2 * m, 0, 1, 1, 1) < recovery_error_bound(2, 5, n, m, 0, 1, 1, 1)


@pytest.mark.parametrize("args", [(2, 5, 100, 101, 0, 1, 1, 1), (0, 5, 100, 10, 0, 1, 1, 1),
                                  (2, 5, 100, 10, -1, 1, 1, 1), (2, 5, 100, 0, 0, 1, 1, 1)])
def test_recovery_bound_rejects_bad_input(args):
    with pytest.raises(ParameterError):
        recovery_error_bound(*args)
