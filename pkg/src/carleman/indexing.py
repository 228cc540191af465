"""Multi-index enumeration and monomial evaluation.

Every homogeneous block of the lifted state is indexed by the exponent
vectors of a fixed total degree.  Within one degree the ordering is
decreasing lexicographic, so for ``d = 2`` the degree-``k`` block reads
``x1^k, x1^(k-1) x2, ..., x2^k``.
"""

from __future__ import annotations

from functools import lru_cache
from math import comb
from typing import Iterable, Sequence

import numpy as np

# Largest count that can address a dense numpy array.
INDEX_LIMIT = int(np.iinfo(np.intp).max)


class MultiIndex(tuple):
    """Exponent vector of a monomial ``x1^a1 * ... * xd^ad``."""

    __slots__ = ()

    def __new__(cls, exponents: Iterable[int]) -> "MultiIndex":
        values = tuple(int(a) for a in exponents)
        if not values:
            raise ValueError("a multi-index needs at least one coordinate")
        if any(a < 0 for a in values):
            raise ValueError(f"negative exponent in {values}")
        return super().__new__(cls, values)

    @classmethod
    def unit(cls, d: int, j: int) -> "MultiIndex":
        """The ``j``-th standard basis vector (0-based) in dimension ``d``."""
        return cls(1 if i == j else 0 for i in range(d))

    @classmethod
    def zero(cls, d: int) -> "MultiIndex":
        return cls((0,) * d)

    @property
    def d(self) -> int:
        return len(self)

    @property
    def degree(self) -> int:
        return sum(self)

    def __repr__(self) -> str:
        return f"MultiIndex({tuple(self)})"


def _check_overflow(value: int, what: str) -> int:
    if value > INDEX_LIMIT:
        raise OverflowError(f"{what} = {value} exceeds the addressable limit {INDEX_LIMIT}")
    return value


def block_size(d: int, k: int) -> int:
    """Number of monomials of total degree ``k`` in ``d`` variables."""
    if d < 1 or k < 0:
        raise ValueError(f"block_size needs d >= 1 and k >= 0, got d={d}, k={k}")
    return _check_overflow(comb(k + d - 1, d - 1), f"block_size({d}, {k})")


def total_dim(d: int, N: int) -> int:
    """Dimension of the lifted state holding degrees ``1..N``."""
    if d < 1 or N < 1:
        raise ValueError(f"total_dim needs d >= 1 and N >= 1, got d={d}, N={N}")
    return _check_overflow(comb(N + d, d) - 1, f"total_dim({d}, {N})")


def block_offsets(d: int, N: int) -> tuple[int, ...]:
    """Prefix sums of block sizes; block ``k`` occupies ``[off[k-1], off[k])``."""
    offsets = [0]
    for k in range(1, N + 1):
        offsets.append(offsets[-1] + block_size(d, k))
    _check_overflow(offsets[-1], f"total_dim({d}, {N})")
    return tuple(offsets)


@lru_cache(maxsize=None)
def _enumerate(d: int, k: int) -> tuple[MultiIndex, ...]:
    if d == 1:
        return (MultiIndex((k,)),)
    out = []
    for first in range(k, -1, -1):
        for rest in _enumerate(d - 1, k - first):
            out.append(MultiIndex((first,) + tuple(rest)))
    return tuple(out)


def indices_of_degree(d: int, k: int) -> list[MultiIndex]:
    """All multi-indices with ``|alpha| = k``, decreasing lexicographic order.

    >>> indices_of_degree(2, 2)
    [MultiIndex((2, 0)), MultiIndex((1, 1)), MultiIndex((0, 2))]
    """
    if d < 1 or k < 0:
        raise ValueError(f"indices_of_degree needs d >= 1 and k >= 0, got d={d}, k={k}")
    block_size(d, k)
    return list(_enumerate(d, k))


@lru_cache(maxsize=None)
def position_map(d: int, k: int) -> dict[MultiIndex, int]:
    """Lookup table ``alpha -> rank`` for one degree (cached)."""
    return {alpha: i for i, alpha in enumerate(_enumerate(d, k))}


@lru_cache(maxsize=None)
def exponent_matrix(d: int, k: int) -> np.ndarray:
    """Exponents of degree ``k`` stacked row-wise, shape ``(block_size, d)``."""
    arr = np.array(_enumerate(d, k), dtype=np.int64).reshape(-1, d)
    arr.flags.writeable = False
    return arr


def rank(alpha: Sequence[int]) -> int:
    """Position of ``alpha`` within ``indices_of_degree(len(alpha), |alpha|)``."""
    alpha = MultiIndex(alpha)
    remaining = alpha.degree
    pos = 0
    d = len(alpha)
    for i in range(d - 1):
        # every index with a larger i-th exponent (same prefix) precedes alpha
        for a in range(alpha[i] + 1, remaining + 1):
            pos += comb(remaining - a + d - i - 2, d - i - 2)
        remaining -= alpha[i]
    return pos


def unrank(d: int, k: int, i: int) -> MultiIndex:
    """Inverse of :func:`rank`."""
    n = block_size(d, k)
    if not 0 <= i < n:
        raise IndexError(f"index {i} out of range for block_size({d}, {k}) = {n}")
    out = []
    remaining = k
    for pos in range(d - 1):
        for a in range(remaining, -1, -1):
            count = comb(remaining - a + d - pos - 2, d - pos - 2)
            if i < count:
                out.append(a)
                remaining -= a
                break
            i -= count
    out.append(remaining)
    return MultiIndex(out)


def monomial_eval(x: Sequence[float], alpha: Sequence[int]) -> float:
    """``prod_j x_j ** alpha_j`` with ``0 ** 0 = 1``."""
    if len(x) != len(alpha):
        raise ValueError(f"state has length {len(x)} but multi-index has length {len(alpha)}")
    value = 1.0
    for xj, aj in zip(x, alpha):
        if aj:
            value *= float(xj) ** aj
    return value


def monomials(x: np.ndarray, k: int) -> np.ndarray:
    """All degree-``k`` monomials of ``x`` in block order.

    ``x`` may carry leading batch axes: shape ``(..., d)`` maps to
    ``(..., block_size(d, k))``.
    """
    x = np.asarray(x, dtype=float)
    exps = exponent_matrix(x.shape[-1], k)
    return np.prod(x[..., None, :] ** exps, axis=-1)
