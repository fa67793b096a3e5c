"""1D micro-macro DG/IMEX solver for linear kinetic transport equations."""

from .core import (
    KineticState,
    MaterialCoefficients,
    Mesh1D,
    VelocityQuadrature,
    project_initial,
)
from .dg_ops import DGOperatorSet, assemble_operators
from .imex import ButcherTableau, ars222, ars443, imex1, step, tableau_for_order
from .schur import SchurStageSolver, full_system_solve, prepare

__all__ = [
    "KineticState",
    "MaterialCoefficients",
    "Mesh1D",
    "VelocityQuadrature",
    "project_initial",
    "DGOperatorSet",
    "assemble_operators",
    "ButcherTableau",
    "imex1",
    "ars222",
    "ars443",
    "tableau_for_order",
    "step",
    "SchurStageSolver",
    "prepare",
    "full_system_solve",
]

__version__ = "0.1.0"
