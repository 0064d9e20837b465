"""Characteristic-function estimators of mixed norms and block sparsity.

The noisy projections have CF ``Psi(t) = exp(-(gamma |x|_{2,alpha})**alpha |t|**alpha) phi_0(sigma t)``,
so ``|x|_{2,alpha}**alpha`` is recovered by inverting the empirical CF at a
data-driven point ``t_pilot = min(1/median|y|, eta0/sigma)``.  Two independent
measurement sets (alpha=1 and the target alpha) are combined into the
block-sparsity estimate, with plug-in asymptotic variances for confidence
intervals.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from statistics import NormalDist
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateDataError, DomainError, EvaluationError, ParameterError
from .measurement import MeasurementSet, eta0_for
from .stable import _check_alpha, _gen, sample_sas

__all__ = [
    "NormEstimate",
    "SparsityEstimate",
    "empirical_cf",
    "invert_cf",
    "v_hat",
    "pilot_t",
    "theta",
    "estimate_norm",
    "norm_ci",
    "combine_sparsity",
    "estimate_block_sparsity",
    "sparsity_variance",
    "theoretical_constants",
    "recovery_error_bound",
    "z_quantile",
    "V_FLOOR",
]

V_FLOOR = 1e-12
# |phi_0| below this is treated as a root; dividing by it only amplifies rounding error
PHI_FLOOR = 1e-12


def z_quantile(beta: float) -> float:
    """``z_{1 - beta/2}`` of the standard normal."""
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    return NormalDist().inv_cdf(1.0 - beta / 2.0)


def empirical_cf(y, t: float) -> complex:
    """``mean(exp(i t y))``."""
    y = np.asarray(y, dtype=float)
    if y.size == 0:
        raise DomainError("empirical CF of an empty sample")
    ty = t * y
    return complex(np.mean(np.cos(ty)), np.mean(np.sin(ty)))


def invert_cf(cf_value, t, alpha, gamma, sigma, phi0):
    """``-log|Re(cf / phi0(sigma t))| / (gamma |t|)**alpha``."""
    if t == 0:
        raise EvaluationError("v_hat is undefined at t = 0")
    denom = phi0(sigma * t)
    if abs(denom) < PHI_FLOOR:
        raise EvaluationError(f"noise CF vanishes at sigma*t = {sigma * t:g}")
    ratio = (cf_value / denom).real
    if ratio == 0:
        raise EvaluationError(f"Re(Psi_hat/phi_0) is exactly zero at t = {t:g}")
    return -math.log(abs(ratio)) / (gamma * abs(t)) ** alpha


def v_hat(y: MeasurementSet, t: float) -> float:
    """Estimate of ``|x|_{2,alpha}**alpha`` from the empirical CF at ``t``.

    May be negative for finite samples; callers decide whether to clamp.
    """
    return invert_cf(empirical_cf(y.y, t), t, y.alpha, y.gamma, y.sigma, y.noise.cf)


def pilot_t(y: MeasurementSet, eta0: float):
    """Return ``(t_pilot, m_hat)`` with ``m_hat = median|y|``.

    With sigma = 0 the noise cap ``eta0/sigma`` is taken as infinite.
    """
    if not eta0 > 0:
        raise ParameterError(f"eta0 must be positive, got {eta0}")
    m = float(np.median(np.abs(y.y)))
    if m == 0:
        raise DegenerateDataError("median |y| is zero; measurements carry no scale information")
    t = 1.0 / m
    if y.sigma > 0:
        t = min(t, eta0 / y.sigma)
    return t, m


def theta(alpha: float, c: float, rho: float, noise_cf: Callable) -> float:
    """Limiting variance of ``sqrt(n) (v_hat / v - 1)`` at ``gamma t |x| -> c``."""
    _check_alpha(alpha)
    if c == 0:
        raise EvaluationError("theta needs c != 0")
    if rho < 0:
        raise ParameterError(f"rho must be non-negative, got {rho}")
    ca = abs(c) ** alpha
    phi1 = float(noise_cf(rho * abs(c)))
    if abs(phi1) < PHI_FLOOR:
        raise EvaluationError(f"noise CF vanishes at rho*|c| = {rho * abs(c):g}")
    phi2 = float(noise_cf(2.0 * rho * abs(c)))
    inner = (math.exp(2.0 * ca) / (2.0 * phi1 * phi1)
             + phi2 / (2.0 * phi1 * phi1) * math.exp((2.0 - 2.0 ** alpha) * ca)
             - 1.0)
    return inner / (ca * ca)


@dataclass
class NormEstimate:
    """Estimate of ``|x|_{2,alpha}**alpha`` with its plug-in variance terms."""

    alpha: float
    v_hat: float
    t_pilot: float
    m_hat: float
    c_hat: float
    rho_hat: float
    theta_hat: float
    n: int
    clamped: bool = False
    v_raw: float = field(default=math.nan, repr=False)

    def ci(self, beta: float = 0.05):
        return norm_ci(self, beta)


def estimate_norm(y: MeasurementSet, eta0: Optional[float] = None) -> NormEstimate:
    """Pilot-point CF estimate of the mixed norm with plug-in ``c``, ``rho``, ``theta``.

    ``eta0`` defaults to the noise family's value from :func:`eta0_for`.
    A non-positive raw estimate is clamped to ``V_FLOOR`` and flagged.
    """
    if eta0 is None:
        eta0 = eta0_for(y.noise)
    t, m = pilot_t(y, eta0)
    raw = v_hat(y, t)
    clamped = not raw > V_FLOOR
    v = V_FLOOR if clamped else raw
    root = v ** (1.0 / y.alpha)
    c = y.gamma * t * root
    rho = y.sigma / (y.gamma * root)
    th = theta(y.alpha, c, rho, y.noise.cf)
    return NormEstimate(y.alpha, v, t, m, c, rho, th, y.n, clamped, raw)


def norm_ci(est: NormEstimate, beta: float = 0.05):
    """Asymptotic ``1 - beta`` interval ``(1 -+ sqrt(theta/n) z) v_hat``."""
    half = math.sqrt(est.theta_hat / est.n) * z_quantile(beta)
    return (1.0 - half) * est.v_hat, (1.0 + half) * est.v_hat


def combine_sparsity(v_alpha: float, v_one: float, alpha: float) -> float:
    """``v_alpha**(1/(1-alpha)) / v_one**(alpha/(1-alpha))`` evaluated in log space."""
    if alpha == 1:
        raise ParameterError("the ratio estimator is undefined at alpha = 1")
    if not (v_alpha > 0 and v_one > 0):
        raise EvaluationError("norm estimates must be positive to combine")
    return math.exp((math.log(v_alpha) - alpha * math.log(v_one)) / (1.0 - alpha))


def sparsity_variance(alpha: float, theta_alpha: float, theta_one: float, pi_alpha: float) -> float:
    """``theta_alpha/pi (1/(1-alpha))**2 + theta_1/(1-pi) (alpha/(1-alpha))**2``."""
    if not 0.0 < pi_alpha < 1.0:
        raise ParameterError(f"sample fraction must lie in (0, 1), got {pi_alpha}")
    g = 1.0 / (1.0 - alpha)
    return theta_alpha / pi_alpha * g * g + theta_one / (1.0 - pi_alpha) * (alpha * g) ** 2


@dataclass
class SparsityEstimate:
    alpha: float
    k_hat: float
    w_hat: float
    pi_alpha: float
    n1: int
    n_alpha: int
    ci_low: float
    ci_high: float
    beta: float
    norm_one: NormEstimate
    norm_alpha: NormEstimate

    @property
    def clamped(self) -> bool:
        return self.norm_one.clamped or self.norm_alpha.clamped

    def as_record(self) -> dict:
        """Flat key-value view used for serialisation."""
        return {
            "alpha": self.alpha,
            "n1": self.n1,
            "n_alpha": self.n_alpha,
            "v1_hat": self.norm_one.v_hat,
            "va_hat": self.norm_alpha.v_hat,
            "k_hat": self.k_hat,
            "theta1": self.norm_one.theta_hat,
            "theta_a": self.norm_alpha.theta_hat,
            "w_hat": self.w_hat,
            "ci_low": self.ci_low,
            "ci_high": self.ci_high,
            "clamped_flags": f"{int(self.norm_one.clamped)}{int(self.norm_alpha.clamped)}",
        }


def estimate_block_sparsity(y1: MeasurementSet, y_alpha: MeasurementSet,
                            eta0: Optional[float] = None, beta: float = 0.05) -> SparsityEstimate:
    """Estimate ``k_alpha(x)`` from a Cauchy set ``y1`` and an index-alpha set ``y_alpha``.

    The two sets must come from independent draws of the same signal.
    """
    if y1.alpha != 1.0:
        raise ParameterError(f"first measurement set must use alpha = 1, got {y1.alpha}")
    alpha = y_alpha.alpha
    if alpha == 1.0:
        raise ParameterError("target alpha must differ from 1")
    if y1.layout != y_alpha.layout:
        raise ParameterError("measurement sets were taken with different block layouts")
    e1 = estimate_norm(y1, eta0)
    ea = estimate_norm(y_alpha, eta0)
    k = combine_sparsity(ea.v_hat, e1.v_hat, alpha)
    pi_a = y_alpha.n / (y1.n + y_alpha.n)
    w = sparsity_variance(alpha, ea.theta_hat, e1.theta_hat, pi_a)
    half = math.sqrt(w / (y1.n + y_alpha.n)) * z_quantile(beta)
    return SparsityEstimate(alpha, k, w, pi_a, y1.n, y_alpha.n,
                            (1.0 - half) * k, (1.0 + half) * k, beta, e1, ea)


def theoretical_constants(alpha: float, rho: float, eta0: float, rng, noise_cf_unit=None,
                          noise_sampler=None, stable_index: float = 1.0, draws: int = 10**6):
    """Monte Carlo value of ``c = min(1/median|S + rho eps|, eta0/rho)`` and ``theta(c, rho)``.

    ``S`` follows S(1, stable_index, 1).  The default index 1 is the literal
    textbook form; passing ``stable_index=alpha`` gives the constant that the
    pilot ``gamma t_pilot |x|_{2,alpha}`` actually converges to.  ``noise_sampler``
    draws unit noise ``(gen, size) -> array`` and ``noise_cf_unit`` is its CF;
    both default to standard Gaussian.
    """
    if rho < 0:
        raise ParameterError(f"rho must be non-negative, got {rho}")
    if noise_cf_unit is None:
        noise_cf_unit = lambda t: math.exp(-0.5 * t * t)  # noqa: E731
    gen = _gen(rng)
    s = sample_sas(stable_index, 1.0, gen, size=draws)
    if rho > 0:
        eps = gen.standard_normal(draws) if noise_sampler is None else noise_sampler(gen, draws)
        s = s + rho * eps
    c = 1.0 / float(np.median(np.abs(s)))
    if rho > 0:
        c = min(c, eta0 / rho)
    return c, theta(alpha, c, rho, noise_cf_unit)


def recovery_error_bound(k2: float, d: int, n: int, m: int, delta: float, x_l2: float,
                         kappa2: float, kappa3: float) -> float:
    """``kappa2 sqrt(k2 d ln(eN/m) / m) + kappa3 delta / |x|_2`` for caller-supplied constants."""
    if not (m >= 1 and n >= 1 and d >= 1):
        raise ParameterError("m, N and d must be positive")
    if m > n:
        raise ParameterError(f"bound requires m <= N, got m={m}, N={n}")
    if k2 <= 0 or x_l2 <= 0 or delta < 0 or kappa2 <= 0 or kappa3 <= 0:
        raise ParameterError("k2, |x|_2, kappa2, kappa3 must be positive and delta non-negative")
    return kappa2 * math.sqrt(k2 * d * math.log(math.e * n / m) / m) + kappa3 * delta / x_l2
