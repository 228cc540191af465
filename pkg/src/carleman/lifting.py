"""Carleman blocks and the order-N finite section.

The degree-``k`` monomials of the state evolve as

    d/dt x^alpha = sum_beta ( sum_j alpha_j f_{j, beta - alpha + e_j}(t) ) x^beta,

so the lifted generator couples degree ``k`` to degree ``l`` through a block
whose entries read off one coefficient of ``f`` each.  Only
``|beta - alpha + e_j| = l - k + 1`` contributes, which makes the generator
block upper triangular for fields vanishing at the origin and adds a single
subdiagonal block row when a drift term ``f(t, 0)`` is present.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Sequence

import numpy as np

from ._io import atomic_write_text
from .field import MaclaurinField, drift_bound
from .indexing import (
    MultiIndex,
    block_offsets,
    block_size,
    indices_of_degree,
    monomials,
    position_map,
    total_dim,
)


@dataclass
class CarlemanBlock:
    k: int
    l: int
    t: float
    entries: np.ndarray


def _block_entries(field: MaclaurinField, k: int, l: int, t: float) -> np.ndarray:
    d = field.d
    out = np.zeros((block_size(d, k), block_size(d, l)))
    g = l - k + 1
    if g < 0 or k < 1 or l < 1:
        return out
    terms = field.terms_of_degree(g)
    if not terms:
        return out
    coeffs = [(np.array(gamma), c.evaluate(t)) for gamma, c in terms.items()]
    col = position_map(d, l)
    for i, alpha in enumerate(indices_of_degree(d, k)):
        a = np.array(alpha)
        for j in range(d):
            if a[j] == 0:
                continue
            base = a.copy()
            base[j] -= 1
            for gamma, vec in coeffs:
                c = vec[j]
                if c != 0.0:
                    beta = MultiIndex(base + gamma)
                    out[i, col[beta]] += a[j] * c
    return out


def build_block(field: MaclaurinField, k: int, l: int, t: float = 0.0) -> CarlemanBlock:
    """Block coupling degree ``k`` (rows) to degree ``l`` (columns) at time ``t``."""
    if k < 1 or l < 1:
        raise ValueError(f"block degrees start at 1, got k={k}, l={l}")
    return CarlemanBlock(k, l, float(t), _block_entries(field, k, l, t))


class FiniteSection:
    """The lifted generator truncated to monomial degrees ``1..N``.

    Use :func:`assemble_finite_section` to build one from a field, or
    :meth:`from_matrix` to wrap a generator matrix obtained elsewhere.
    Constant sections cache their assembled matrix.

    A drift term ``f(t, 0)`` enters the degree-1 rows as ``f_0(t) * x^0``;
    since ``x^0 = 1`` is not a lifted coordinate it is carried as the affine
    ``forcing(t)`` vector, so the section integrates ``z' = A(t) z + b(t)``.
    """

    def __init__(
        self,
        d: int,
        N: int,
        builder: Callable[[float], np.ndarray],
        *,
        constant: bool,
        equilibrium: bool,
        nonzero_blocks: Sequence[tuple[int, int]] = (),
        field: MaclaurinField | None = None,
        label: str = "",
        forcing: Callable[[float], np.ndarray] | None = None,
    ):
        if N < 1:
            raise ValueError(f"truncation order must be >= 1, got {N}")
        self.d = d
        self.N = N
        self.offsets = block_offsets(d, N)
        self.dim = total_dim(d, N)
        self.constant = constant
        self.equilibrium = equilibrium
        self.nonzero_blocks = tuple(nonzero_blocks)
        self.field = field
        self.label = label
        self._builder = builder
        self._forcing = forcing
        self._cached: np.ndarray | None = None
        if constant:
            self._cached = self._build(0.0)

    @classmethod
    def from_matrix(cls, matrix: np.ndarray, d: int, N: int, *, label: str = "") -> "FiniteSection":
        matrix = np.array(matrix, dtype=float)
        offsets = block_offsets(d, N)
        if matrix.shape != (offsets[-1], offsets[-1]):
            raise ValueError(f"matrix shape {matrix.shape} does not match total_dim({d}, {N})")
        nz = []
        for k in range(1, N + 1):
            for l in range(1, N + 1):
                if np.any(matrix[offsets[k - 1] : offsets[k], offsets[l - 1] : offsets[l]]):
                    nz.append((k, l))
        lower = any(l < k for k, l in nz)
        return cls(d, N, lambda t: matrix, constant=True, equilibrium=not lower, nonzero_blocks=nz, label=label)

    @property
    def structure(self) -> str:
        return "upper" if self.equilibrium else "subdiagonal"

    def _build(self, t: float) -> np.ndarray:
        M = np.asarray(self._builder(t), dtype=float)
        M.flags.writeable = False
        return M

    def matrix(self, t: float = 0.0) -> np.ndarray:
        """Assembled generator at time ``t`` (read-only)."""
        if self._cached is not None:
            return self._cached
        return self._build(t)

    def forcing(self, t: float = 0.0) -> np.ndarray | None:
        """Affine term of the degree-1 rows, ``None`` when ``f(t, 0) = 0``."""
        if self._forcing is None:
            return None
        return np.asarray(self._forcing(t), dtype=float)

    def block_slice(self, k: int) -> slice:
        return slice(self.offsets[k - 1], self.offsets[k])

    def block(self, k: int, l: int, t: float = 0.0) -> np.ndarray:
        return self.matrix(t)[self.block_slice(k), self.block_slice(l)]

    def block_labels(self) -> list[str]:
        return [f"k={k}:{self.offsets[k - 1]}..{self.offsets[k] - 1}" for k in range(1, self.N + 1)]

    def __repr__(self) -> str:
        return f"FiniteSection(d={self.d}, N={self.N}, dim={self.dim}, {self.structure}, label={self.label!r})"


def structural_blocks(field: MaclaurinField, N: int) -> list[tuple[int, int]]:
    """Block pairs ``(k, l)`` that can be nonzero in the order-``N`` section."""
    pairs = []
    for k in range(1, N + 1):
        for l in range(max(1, k - 1), N + 1):
            if field.terms_of_degree(l - k + 1):
                pairs.append((k, l))
    return pairs


def assemble_finite_section(field: MaclaurinField, N: int) -> FiniteSection:
    """Order-``N`` finite section of the lifted system of ``field``.

    Generator fields are consulted up to degree ``N``, which is all the
    section can see.
    """
    d = field.d
    offsets = block_offsets(d, N)
    dim = offsets[-1]
    pairs = structural_blocks(field, N)

    def build(t: float) -> np.ndarray:
        M = np.zeros((dim, dim))
        for k, l in pairs:
            M[offsets[k - 1] : offsets[k], offsets[l - 1] : offsets[l]] = _block_entries(field, k, l, t)
        return M

    forcing = None
    if not field.equilibrium:
        def forcing(t: float) -> np.ndarray:
            b = np.zeros(dim)
            b[:d] = field.coefficient(MultiIndex.zero(d), t)
            return b

    constant = all(c.constant for g in range(N + 1) for c in field.terms_of_degree(g).values())
    return FiniteSection(
        d, N, build, constant=constant, equilibrium=field.equilibrium,
        nonzero_blocks=pairs, field=field, label=field.name, forcing=forcing,
    )


@dataclass
class LiftedVector:
    """Stacked monomial blocks ``z_1, ..., z_N``."""

    d: int
    N: int
    data: np.ndarray
    offsets: tuple[int, ...] = dc_field(init=False)

    def __post_init__(self):
        self.offsets = block_offsets(self.d, self.N)
        if self.data.shape[-1] != self.offsets[-1]:
            raise ValueError("lifted data does not match total_dim")

    def block(self, k: int) -> np.ndarray:
        return self.data[..., self.offsets[k - 1] : self.offsets[k]]


def lift_initial(x0, N: int) -> LiftedVector:
    """Monomials of ``x0`` of degrees ``1..N``.  Accepts batches ``(..., d)``."""
    x0 = np.asarray(x0, dtype=float)
    if x0.ndim == 0:
        x0 = x0[None]
    blocks = [monomials(x0, k) for k in range(1, N + 1)]
    return LiftedVector(x0.shape[-1], N, np.concatenate(blocks, axis=-1))


def schur_norm(matrix) -> float:
    """Larger of the maximal absolute row sum and column sum."""
    M = np.abs(np.asarray(matrix, dtype=float))
    if M.size == 0:
        return 0.0
    return float(max(M.sum(axis=1).max(), M.sum(axis=0).max()))


@dataclass
class BlockNormReport:
    worst_ratio: float
    checked: int
    violations: list[tuple[int, int, float, float]]  # (k, l, norm, bound)
    drift_worst_ratio: float = 0.0

    @property
    def ok(self) -> bool:
        return not self.violations


def _ratio(norm: float, bound: float) -> float:
    if bound > 0:
        return norm / bound
    return 0.0 if norm == 0 else float("inf")


def check_block_norms(
    field: MaclaurinField,
    radius: float,
    coef_bound: float,
    k_max: int,
    l_max: int,
    t_samples: Sequence[float] = (0.0,),
    drift: float | None = None,
    rtol: float = 1e-12,
) -> BlockNormReport:
    """Compare Schur norms of generated blocks with ``D k R^(k-l-1)``.

    Checks every ``1 <= k <= l <= l_max`` with ``k <= k_max``.  When the
    field has a drift term, the subdiagonal blocks are also compared with
    ``nu0 * k`` where block ``(k, k-1)`` maps degree ``k-1`` into degree
    ``k``; ``drift`` defaults to the field's drift bound.
    """
    worst = 0.0
    drift_worst = 0.0
    checked = 0
    violations = []
    nu0 = drift_bound(field) if drift is None else drift
    for t in t_samples:
        for k in range(1, k_max + 1):
            for l in range(k, l_max + 1):
                norm = schur_norm(_block_entries(field, k, l, t))
                bound = coef_bound * k * radius ** (k - l - 1)
                r = _ratio(norm, bound)
                worst = max(worst, r)
                checked += 1
                if norm > bound * (1 + rtol):
                    violations.append((k, l, norm, bound))
            if not field.equilibrium and k >= 2:
                norm = schur_norm(_block_entries(field, k, k - 1, t))
                bound = nu0 * k
                drift_worst = max(drift_worst, _ratio(norm, bound))
                checked += 1
                if norm > bound * (1 + rtol):
                    violations.append((k, k - 1, norm, bound))
    return BlockNormReport(worst, checked, violations, drift_worst)


def write_matrix_csv(section: FiniteSection, path, t: float = 0.0) -> None:
    """Dump the assembled matrix; the header row names the block ranges."""
    M = section.matrix(t)
    lines = [",".join(section.block_labels())]
    for row in M:
        lines.append(",".join(f"{v:.17g}" for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip().split(",")
        M = np.loadtxt(fh, delimiter=",", ndmin=2)
    return header, M
