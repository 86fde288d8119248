"""Quasi-exact solutions of the generalized Dirac oscillator via the functional Bethe ansatz."""

from __future__ import annotations

from .bethe import (
    ConstraintReport,
    PolyODE,
    RootSet,
    bethe_jacobian,
    bethe_residuals,
    coefficient_constraints,
    make_poly_ode,
    solve_bethe_roots,
    verify_polynomial_solution,
)
from .calibration import CalibrationResult, calibrate, constraint_profile
from .degeneration import DegenerationReport, degeneration_check, lower_model
from .errors import (
    QESError, DegreeViolation, SingularRoot, RootCollision, NoConvergence,
    ExponentViolation, CaseMismatch, EvaluationDomain, EnergyDegenerate,
    NonNormalizable, NotConfining, FreeParameterUnbounded, ConfigError,
)
from .models import (
    Case,
    Family,
    PotentialModel,
    QuasiExactSolution,
    ReducedProblem,
    assemble_spinor,
    assemble_wavefunction,
    energy_squared,
    normalization_constant,
    printed_energy_squared,
    reduce,
    solve_level,
)
from .numeric import RadialGrid, fd_eigensolve, quadrature, radial_residual

__version__ = "0.1.0"
