"""Carleman linearization of analytic ODEs with certified truncation bounds."""

from .field import MaclaurinField, PreconditionError, SpecError, load_field, parse_field
from .indexing import MultiIndex, block_size, indices_of_degree, total_dim
from .lifting import FiniteSection, assemble_finite_section, lift_initial, schur_norm

__all__ = [
    "FiniteSection",
    "MaclaurinField",
    "MultiIndex",
    "PreconditionError",
    "SpecError",
    "assemble_finite_section",
    "block_size",
    "indices_of_degree",
    "lift_initial",
    "load_field",
    "parse_field",
    "schur_norm",
    "total_dim",
]
