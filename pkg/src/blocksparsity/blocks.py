"""Block-structured signals, mixed norms and the soft block-sparsity measure.

A signal of length N is cut sequentially into p blocks of lengths
``d_1, ..., d_p``.  Everything here works on the vector of block l2 norms,
so unequal block lengths need no special handling.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import DomainError, ParameterError

__all__ = [
    "BlockLayout",
    "BlockSignal",
    "mixed_norm",
    "block_l0",
    "block_sparsity",
    "block_distribution",
    "bdnr",
    "l20_approx_bound",
    "make_exact_signal",
    "make_nearly_sparse_signal",
    "make_stepped_signal",
]

INF = math.inf
# |alpha - 1| below this is evaluated through the Shannon-entropy path
ALPHA_ONE_BAND = 1e-9


@dataclass(frozen=True)
class BlockLayout:
    block_lengths: tuple

    def __init__(self, block_lengths: Sequence[int]):
        lengths = tuple(int(d) for d in block_lengths)
        if not lengths:
            raise ParameterError("a layout needs at least one block")
        if any(d < 1 for d in lengths) or any(int(d) != d for d in block_lengths):
            raise ParameterError(f"block lengths must be positive integers, got {list(block_lengths)}")
        object.__setattr__(self, "block_lengths", lengths)

    @classmethod
    def uniform(cls, n: int, d: int) -> "BlockLayout":
        if d < 1 or n < 1 or n % d:
            raise ParameterError(f"N={n} is not a positive multiple of d={d}")
        return cls((d,) * (n // d))

    @property
    def p(self) -> int:
        return len(self.block_lengths)

    @property
    def n(self) -> int:
        return sum(self.block_lengths)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate(([0], np.cumsum(self.block_lengths)))

    @property
    def is_uniform(self) -> bool:
        return len(set(self.block_lengths)) == 1

    def __repr__(self):
        if self.is_uniform:
            return f"BlockLayout(d={self.block_lengths[0]}, p={self.p})"
        return f"BlockLayout({list(self.block_lengths)})"


class BlockSignal:
    """A real vector together with its block layout."""

    def __init__(self, values, layout: BlockLayout):
        values = np.asarray(values, dtype=float)
        if values.ndim != 1:
            raise ParameterError("signal values must be one-dimensional")
        if values.size != layout.n:
            raise ParameterError(f"signal has {values.size} entries but layout covers {layout.n}")
        self.values = values
        self.layout = layout

    @classmethod
    def uniform(cls, values, d: int) -> "BlockSignal":
        values = np.asarray(values, dtype=float)
        return cls(values, BlockLayout.uniform(values.size, d))

    def blocks(self):
        off = self.layout.offsets
        return [self.values[off[j]:off[j + 1]] for j in range(self.layout.p)]

    def block_norms(self) -> np.ndarray:
        """l2 norm of every block, length p.

        Each block is scaled by its largest entry first so tiny blocks do not
        underflow to zero when squared.
        """
        starts = self.layout.offsets[:-1]
        a = np.abs(self.values)
        top = np.maximum.reduceat(a, starts)
        scale = np.repeat(np.where(top > 0, top, 1.0), self.layout.block_lengths)
        return top * np.sqrt(np.add.reduceat((a / scale) ** 2, starts))

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def scaled(self, c: float) -> "BlockSignal":
        return BlockSignal(c * self.values, self.layout)

    def __len__(self):
        return self.values.size

    def __repr__(self):
        return f"BlockSignal(N={self.values.size}, {self.layout!r})"


def _norms(x) -> np.ndarray:
    if isinstance(x, BlockSignal):
        return x.block_norms()
    return np.abs(np.asarray(x, dtype=float))


def _norm_from_block_norms(b, alpha):
    nz = b[b > 0]
    if nz.size == 0:
        return 0.0
    if math.isinf(alpha):
        return float(nz.max())
    # scale out the largest block to keep b**alpha in range
    top = nz.max()
    return float(top * np.sum((nz / top) ** alpha) ** (1.0 / alpha))


def mixed_norm(x: BlockSignal, alpha: float) -> float:
    """Mixed l2/l_alpha norm ``(sum_j |x[j]|_2**alpha)**(1/alpha)``; ``math.inf`` gives the max."""
    if not alpha > 0:
        raise ParameterError(f"mixed_norm needs alpha > 0 (use block_l0 for alpha=0), got {alpha}")
    return _norm_from_block_norms(_norms(x), alpha)


def block_l0(x: BlockSignal) -> int:
    """Number of blocks with non-zero l2 norm (no tolerance)."""
    return int(np.count_nonzero(_norms(x) > 0))


def _sparsity_from_block_norms(b, alpha):
    nz = b[b > 0]
    if nz.size == 0:
        return 0.0
    if alpha == 0:
        return float(nz.size)
    if math.isinf(alpha):
        return float(nz.sum() / nz.max())
    # nz / sum is bitwise scale invariant for power-of-two scalings
    logpi = np.log(nz / nz.sum())
    if abs(alpha - 1.0) < ALPHA_ONE_BAND:
        return float(math.exp(-np.sum(np.exp(logpi) * logpi)))
    return float(math.exp(logsumexp(alpha * logpi) / (1.0 - alpha)))


def block_sparsity(x: BlockSignal, alpha: float) -> float:
    """Soft block-sparsity ``k_alpha(x) = (|x|_{2,alpha} / |x|_{2,1})**(alpha/(1-alpha))``.

    Equivalently ``exp(H_alpha(pi(x)))`` with ``H_alpha`` the Renyi entropy of the
    block distribution.  ``alpha`` may be 0 (block count), 1 (Shannon entropy) or
    ``math.inf``; the zero signal has sparsity 0.
    """
    if not alpha >= 0:
        raise ParameterError(f"alpha must be non-negative, got {alpha}")
    return _sparsity_from_block_norms(_norms(x), float(alpha))


def block_distribution(x: BlockSignal) -> np.ndarray:
    """Mass ``|x[j]|_2 / |x|_{2,1}`` on every block index."""
    b = _norms(x)
    total = b.sum()
    if total == 0:
        raise DomainError("block distribution is undefined for the zero signal")
    return b / total


def bdnr(x: BlockSignal) -> float:
    """Block dynamic range: largest over smallest non-zero block norm."""
    nz = _norms(x)
    nz = nz[nz > 0]
    if nz.size == 0:
        raise DomainError("BDNR is undefined for the zero signal")
    return float(nz.max() / nz.min())


def l20_approx_bound(x: BlockSignal, alpha: float, k_estimate_rel_err: float = 0.0) -> float:
    """Upper bound on ``|k_tilde / |x|_{2,0} - 1|`` for any ``k_tilde``.

    ``k_estimate_rel_err`` is ``|k_tilde / k_alpha(x) - 1|``; the added term is the
    approximation error of ``k_alpha`` to the block count, which shrinks with alpha.
    """
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if k_estimate_rel_err < 0:
        raise ParameterError("relative error must be non-negative")
    return k_estimate_rel_err + approx_term(bdnr(x), block_l0(x), alpha)


def approx_term(dynamic_range: float, l0: float, alpha: float) -> float:
    """``alpha/(1-alpha) * (ln BDNR + alpha ln l0)``."""
    return alpha / (1.0 - alpha) * (math.log(dynamic_range) + alpha * math.log(l0))


# ---- test signals -------------------------------------------------------

def _check_shape(n, d):
    if d < 1 or n < 1 or n % d:
        raise ParameterError(f"N={n} must be a positive multiple of d={d}")


def make_exact_signal(n: int, d: int) -> BlockSignal:
    """``(1/sqrt(10) * ones(10), zeros(N-10))``; unit l2 norm."""
    _check_shape(n, d)
    if n < 10:
        raise ParameterError(f"exact signal needs N >= 10, got {n}")
    x = np.zeros(n)
    x[:10] = 1.0 / math.sqrt(10.0)
    return BlockSignal.uniform(x, d)


def make_nearly_sparse_signal(n: int, d: int) -> BlockSignal:
    """Every entry of block j equals ``c/sqrt(d) / j``, c normalising to unit l2 norm."""
    _check_shape(n, d)
    p = n // d
    j = np.arange(1, p + 1, dtype=float)
    c = 1.0 / math.sqrt(np.sum(j ** -2.0))
    x = np.repeat(c / math.sqrt(d) / j, d)
    return BlockSignal.uniform(x, d)


def make_stepped_signal(n: int, d: int, k: int) -> BlockSignal:
    """First k blocks at levels 1, 1/2, ..., 1/k (per-entry ``1/sqrt(d)/j``), rest zero.

    Normalised to unit l2 norm, so block_l0 = BDNR = k.
    """
    _check_shape(n, d)
    if k < 1 or k * d > n:
        raise ParameterError(f"need 1 <= k and k*d <= N, got k={k}, d={d}, N={n}")
    j = np.arange(1, k + 1, dtype=float)
    levels = 1.0 / j
    c = 1.0 / math.sqrt(np.sum(levels ** 2))
    x = np.zeros(n)
    x[: k * d] = np.repeat(c * levels / math.sqrt(d), d)
    return BlockSignal.uniform(x, d)
