"""Variational characterization of eigenvalues in spectral gaps.

Block-decomposed self-adjoint operators, min-max level solver, radial
Pauli/Dirac discretizations and continuation sweeps.
"""
from .errors import ConvergenceError, GapSpecError, PreconditionError, ValidationError
from .operator_model import (
    DecomposedOperator,
    GapProfile,
    from_blocks,
    from_matrix,
    gap_profile,
    negate_and_swap,
    read_matrix_file,
    write_matrix_file,
)
from .solver import LevelResult, Status, solve_level, solve_levels, solve_both_sides, spectrum_check

__version__ = "0.1.0"

__all__ = [
    "ConvergenceError",
    "DecomposedOperator",
    "GapProfile",
    "GapSpecError",
    "LevelResult",
    "PreconditionError",
    "Status",
    "ValidationError",
    "from_blocks",
    "from_matrix",
    "gap_profile",
    "negate_and_swap",
    "read_matrix_file",
    "solve_both_sides",
    "solve_level",
    "solve_levels",
    "spectrum_check",
    "write_matrix_file",
]
