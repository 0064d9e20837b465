"""Symmetric and isotropic alpha-stable random variates.

Univariate symmetric variates use the Chambers-Mallows-Stuck transform of a
uniform angle and a unit exponential.  Isotropic d-dimensional vectors use
the sub-Gaussian representation ``v = sqrt(D) * q`` where ``q`` is standard
normal and ``D`` is a one-sided (alpha/2)-stable subordinator whose scale is
chosen so that ``E exp(i u.v) = exp(-gamma**alpha * |u|**alpha)``.

All logarithmic work is done before exponentiating: for small alpha the
variates span hundreds of decades and the naive products overflow.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import ParameterError

__all__ = [
    "RandomStream",
    "StableSpec",
    "sample_sas",
    "sample_positive_stable",
    "sample_isotropic_vector",
    "subordinator_sqrt",
]


class RandomStream:
    """Seeded, splittable source of randomness.

    A stream is identified by ``(seed, stream_id)``; ``stream_id`` may be an
    integer or a tuple of integers (a path in the spawn tree).  Two streams
    with the same identity replay the same variates; distinct identities are
    statistically independent (PCG64 seeded through ``SeedSequence`` spawn
    keys).
    """

    def __init__(self, seed: int, stream_id: Union[int, tuple] = 0):
        seed = int(seed)
        if seed < 0 or seed >= 2**64:
            raise ParameterError(f"seed must be a 64-bit unsigned integer, got {seed}")
        key = tuple(int(k) for k in stream_id) if isinstance(stream_id, tuple) else (int(stream_id),)
        if any(k < 0 for k in key):
            raise ParameterError(f"stream ids must be non-negative, got {key}")
        self.seed = seed
        self.stream_id = key
        seq = np.random.SeedSequence(entropy=seed, spawn_key=key)
        self.generator = np.random.Generator(np.random.PCG64(seq))

    def substream(self, *keys: int) -> "RandomStream":
        """Independent child stream addressed by ``keys`` below this one."""
        return RandomStream(self.seed, self.stream_id + tuple(keys))

    def __repr__(self):
        return f"RandomStream(seed={self.seed}, stream_id={self.stream_id})"


RngLike = Union[RandomStream, np.random.Generator]


def _gen(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, RandomStream):
        return rng.generator
    if isinstance(rng, np.random.Generator):
        return rng
    raise TypeError(f"expected RandomStream or numpy Generator, got {type(rng).__name__}")


def _check_alpha(alpha):
    if not (0.0 < alpha <= 2.0) or math.isnan(alpha):
        raise ParameterError(f"alpha must lie in (0, 2], got {alpha}")


def _check_positive(name, value):
    if not value > 0 or math.isinf(value):
        raise ParameterError(f"{name} must be a finite positive number, got {value}")


@dataclass(frozen=True)
class StableSpec:
    """Parameters of the isotropic law S(dim, alpha, gamma)."""

    dim: int
    alpha: float
    gamma: float

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise ParameterError(f"dim must be a positive integer, got {self.dim}")
        _check_alpha(self.alpha)
        _check_positive("gamma", self.gamma)

    def cf(self, u):
        """Characteristic function at ``u`` (last axis is the coordinate axis)."""
        u = np.asarray(u, dtype=float)
        r = np.linalg.norm(u, axis=-1) if u.ndim else abs(float(u))
        return np.exp(-(self.gamma * r) ** self.alpha)


def _log_abs_sas(alpha, gen, size):
    """sign and log|X| for X ~ S(1, alpha, 1) via Chambers-Mallows-Stuck."""
    phi = np.pi * (1.0 - gen.random(size) - 0.5)  # (-pi/2, pi/2]
    w = gen.standard_exponential(size)
    with np.errstate(divide="ignore"):
        logx = (np.log(np.abs(np.sin(alpha * phi)))
                - np.log(np.cos(phi)) / alpha
                + (1.0 - alpha) / alpha * (np.log(np.cos((1.0 - alpha) * phi)) - np.log(w)))
    return np.sign(phi), logx


def sample_sas(alpha: float, gamma: float, rng: RngLike, size=None):
    """Draw symmetric alpha-stable variates with CF ``exp(-gamma**alpha |t|**alpha)``.

    alpha=2 gives N(0, 2 gamma**2); alpha=1 gives Cauchy with scale gamma.
    Returns a float when ``size`` is None, otherwise an array of that shape.
    """
    _check_alpha(alpha)
    _check_positive("gamma", gamma)
    gen = _gen(rng)
    sign, logx = _log_abs_sas(float(alpha), gen, size)
    with np.errstate(over="ignore"):
        x = gamma * sign * np.exp(logx)
    return float(x) if size is None else x


def _log_positive_stable(beta, gen, size):
    # Kanter's representation, Laplace transform exp(-s**beta)
    u = np.pi * (1.0 - gen.random(size))  # (0, pi]
    w = gen.standard_exponential(size)
    with np.errstate(divide="ignore"):
        return (np.log(np.sin(beta * u))
                - np.log(np.sin(u)) / beta
                + (1.0 - beta) / beta * (np.log(np.sin((1.0 - beta) * u)) - np.log(w)))


def sample_positive_stable(beta: float, scale: float, rng: RngLike, size=None):
    """Draw one-sided beta-stable variates D > 0.

    Parameterised by the Laplace transform ``E exp(-s D) = exp(-(scale * s)**beta)``.
    With ``beta = 1/2`` this is the Levy law with location 0 and scale ``scale / 2``.
    """
    if not 0.0 < beta < 1.0:
        raise ParameterError(f"beta must lie in (0, 1), got {beta}")
    _check_positive("scale", scale)
    gen = _gen(rng)
    logd = _log_positive_stable(float(beta), gen, size)
    with np.errstate(over="ignore"):
        d = scale * np.exp(logd)
    return float(d) if size is None else d


def subordinator_sqrt(alpha: float, gamma: float, rng: RngLike, size=None):
    """``sqrt(D)`` for the subordinator that makes ``sqrt(D) * q`` follow S(d, alpha, gamma).

    D has Laplace transform ``exp(-(sqrt(2) gamma)**alpha * s**(alpha/2))`` so that
    ``E exp(-|u|**2 D / 2) = exp(-gamma**alpha |u|**alpha)``.  For alpha=2 D is the
    constant ``2 gamma**2`` and no randomness is consumed.
    """
    _check_alpha(alpha)
    _check_positive("gamma", gamma)
    if alpha == 2.0:
        root = math.sqrt(2.0) * gamma
        return root if size is None else np.full(size, root)
    gen = _gen(rng)
    logd = math.log(2.0 * gamma * gamma) + _log_positive_stable(alpha / 2.0, gen, size)
    with np.errstate(over="ignore"):
        s = np.exp(0.5 * logd)
    return float(s) if size is None else s


def sample_isotropic_vector(spec: StableSpec, rng: RngLike, size=None):
    """Draw vectors from S(spec.dim, spec.alpha, spec.gamma).

    Output shape is ``(dim,)`` for ``size=None`` and ``(*size, dim)`` otherwise.
    Components are i.i.d. N(0, 2 gamma**2) when alpha=2.
    """
    gen = _gen(rng)
    shape = () if size is None else ((size,) if np.isscalar(size) else tuple(size))
    root = subordinator_sqrt(spec.alpha, spec.gamma, gen, size=shape or None)
    q = gen.standard_normal(shape + (spec.dim,))
    return np.asarray(root)[..., None] * q
