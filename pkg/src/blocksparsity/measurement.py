"""Random stable projections of a block signal plus symmetric noise.

Each measurement is ``y_i = <a_i, x> + sigma * eps_i`` where block j of the row
``a_i`` is drawn from S(d_j, alpha, gamma).  The noiseless part then follows
S(1, alpha, gamma * |x|_{2,alpha}).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy import integrate, optimize, special

from .blocks import BlockLayout, BlockSignal
from .errors import ParameterError
from .stable import RandomStream, _check_alpha, _check_positive, _gen, subordinator_sqrt

__all__ = [
    "NoiseModel",
    "MeasurementSet",
    "project",
    "noise_cf",
    "eta0_for",
]

FAMILIES = ("gaussian", "laplace", "uniform", "student_t")
_ETA_GRID = 1000


@lru_cache(maxsize=None)
def _t_density(nu: float):
    logc = special.gammaln((nu + 1) / 2) - special.gammaln(nu / 2) - 0.5 * math.log(nu * math.pi)
    c, power = math.exp(logc), -(nu + 1) / 2
    return lambda x: c * (1.0 + x * x / nu) ** power


@lru_cache(maxsize=8192)
def _student_t_cf(nu: float, t: float) -> float:
    # E cos(t eps) = 2 * int_0^inf f(x) cos(t x) dx, QUADPACK's Fourier-weighted rule
    if t == 0.0:
        return 1.0
    val, _ = integrate.quad(_t_density(nu), 0.0, np.inf, weight="cos", wvar=t, limlst=200)
    return 2.0 * val


@dataclass(frozen=True)
class NoiseModel:
    """A symmetric noise family scaled by ``sigma``.

    ``sigma`` multiplies a unit draw: standard normal, unit Laplace, uniform on
    [-1, 1] or Student t with ``nu`` degrees of freedom.  ``cf`` is the
    characteristic function of the unit draw.
    """

    family: str = "gaussian"
    sigma: float = 0.0
    nu: Optional[float] = None
    eta0: Optional[float] = None

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown noise family {self.family!r}; choose from {FAMILIES}")
        if not self.sigma >= 0 or math.isinf(self.sigma):
            raise ParameterError(f"sigma must be finite and non-negative, got {self.sigma}")
        if self.family == "student_t":
            if self.nu is None or not self.nu > 0:
                raise ParameterError("student_t noise needs nu > 0")
        elif self.nu is not None:
            raise ParameterError(f"nu only applies to student_t noise, not {self.family}")
        if self.eta0 is not None and not self.eta0 > 0:
            raise ParameterError(f"eta0 must be positive, got {self.eta0}")

    @classmethod
    def parse(cls, text: str, sigma: float = 0.0, eta0: Optional[float] = None) -> "NoiseModel":
        """Build from ``gaussian``, ``laplace``, ``uniform`` or ``t:<nu>``."""
        text = text.strip().lower()
        if text.startswith("t:") or text.startswith("student_t:"):
            try:
                nu = float(text.split(":", 1)[1])
            except ValueError:
                raise ParameterError(f"bad degrees of freedom in noise spec {text!r}") from None
            return cls("student_t", sigma, nu, eta0)
        if text in ("uniform_symmetric",):
            text = "uniform"
        return cls(text, sigma, None, eta0)

    @property
    def label(self) -> str:
        if self.family == "student_t":
            return f"t:{self.nu:g}"
        return self.family

    def with_sigma(self, sigma: float) -> "NoiseModel":
        return NoiseModel(self.family, sigma, self.nu, self.eta0)

    def cf(self, t):
        """phi_0(t) for the unit draw; real and even."""
        t = np.abs(np.asarray(t, dtype=float))
        if self.family == "gaussian":
            out = np.exp(-0.5 * t * t)
        elif self.family == "laplace":
            out = 1.0 / (1.0 + t * t)
        elif self.family == "uniform":
            out = np.sinc(t / np.pi)
        else:
            out = np.vectorize(lambda s: _student_t_cf(float(self.nu), float(s)), otypes=[float])(t)
        return float(out) if out.ndim == 0 else out

    def sample(self, rng, size):
        gen = _gen(rng)
        if self.family == "gaussian":
            return gen.standard_normal(size)
        if self.family == "laplace":
            return gen.laplace(0.0, 1.0, size)
        if self.family == "uniform":
            return gen.uniform(-1.0, 1.0, size)
        return gen.standard_t(self.nu, size)


def noise_cf(noise: NoiseModel, t):
    return noise.cf(t)


def eta0_for(noise: NoiseModel) -> float:
    """Largest eta0 <= 1 with ``phi_0 > 1/2`` on all of ``[0, eta0]``.

    An explicit ``noise.eta0`` wins.  Otherwise 1 is returned when it passes the
    grid check; else 0.99 times the first crossing of 1/2.
    """
    if noise.eta0 is not None:
        return float(noise.eta0)
    grid = np.linspace(0.0, 1.0, _ETA_GRID + 1)
    if np.all(noise.cf(grid) > 0.5):
        return 1.0
    root = optimize.brentq(lambda s: noise.cf(s) - 0.5, 0.0, 1.0, xtol=1e-12)
    return 0.99 * root


@dataclass
class MeasurementSet:
    y: np.ndarray
    alpha: float
    gamma: float
    noise: NoiseModel
    layout: BlockLayout
    rows: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float)
        if self.y.ndim != 1 or self.y.size < 1:
            raise ParameterError("measurements must be a non-empty vector")
        _check_alpha(self.alpha)
        _check_positive("gamma", self.gamma)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def sigma(self) -> float:
        return self.noise.sigma


# rows are produced in chunks of roughly this many matrix entries
_CHUNK_ENTRIES = 1 << 22


def project(x: BlockSignal, alpha: float, gamma: float, n: int, noise: NoiseModel,
            rng, method: str = "blockwise", materialize: bool = False) -> MeasurementSet:
    """Draw ``n`` noisy stable projections of ``x``.

    ``method="rows"`` builds every row ``a_i`` explicitly (block j as
    ``sqrt(D_ij) * q_ij``) and forms ``<a_i, x>``; rows are discarded unless
    ``materialize`` is set.  ``method="blockwise"`` uses that ``<q_ij, x[j]>``
    is exactly ``|x[j]|_2 * Z_ij`` with Z standard normal, which draws one
    Gaussian per non-zero block instead of d_j; the law of y is identical.
    """
    _check_alpha(alpha)
    _check_positive("gamma", gamma)
    if int(n) != n or n < 1:
        raise ParameterError(f"number of measurements must be a positive integer, got {n}")
    n = int(n)
    gen = rng.generator if isinstance(rng, RandomStream) else _gen(rng)
    rows = None
    if method == "blockwise":
        if materialize:
            raise ParameterError("materialize requires method='rows'")
        y = _project_blockwise(x, alpha, gamma, n, gen)
    elif method == "rows":
        y, rows = _project_rows(x, alpha, gamma, n, gen, materialize)
    else:
        raise ParameterError(f"unknown projection method {method!r}")
    if noise.sigma > 0:
        y = y + noise.sigma * noise.sample(gen, n)
    return MeasurementSet(y, float(alpha), float(gamma), noise, x.layout, rows)


def _project_blockwise(x, alpha, gamma, n, gen):
    b = x.block_norms()
    b = b[b > 0]
    if b.size == 0:
        return np.zeros(n)
    root = subordinator_sqrt(alpha, gamma, gen, size=(n, b.size))
    z = gen.standard_normal((n, b.size))
    return (root * z) @ b


def _project_rows(x, alpha, gamma, n, gen, materialize):
    lengths = np.asarray(x.layout.block_lengths)
    p, big_n = lengths.size, x.layout.n
    step = max(1, _CHUNK_ENTRIES // big_n)
    y = np.empty(n)
    rows = np.empty((n, big_n)) if materialize else None
    for start in range(0, n, step):
        m = min(step, n - start)
        root = subordinator_sqrt(alpha, gamma, gen, size=(m, p))
        a = gen.standard_normal((m, big_n)) * np.repeat(root, lengths, axis=1)
        with np.errstate(invalid="ignore"):
            y[start:start + m] = a @ x.values
        if materialize:
            rows[start:start + m] = a
    return y, rows
