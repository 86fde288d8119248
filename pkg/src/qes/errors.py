"""Exception hierarchy shared by the solver, model and oracle layers."""

from __future__ import annotations


class QESError(Exception):
    """Base class for all errors raised by this package."""


class DegreeViolation(QESError, ValueError):
    """Polynomial coefficients exceed the degree caps or violate deg Q > deg W."""


class SingularRoot(QESError, ValueError):
    """A Bethe root sits on a zero of P(x)."""


class RootCollision(QESError, ValueError):
    """Two Bethe roots are closer than the distinctness tolerance."""


class NoConvergence(QESError, RuntimeError):
    """An iterative method failed; ``best_residual`` records how close it got."""

    def __init__(self, message: str, best_residual: float = float("inf")):
        super().__init__(message)
        self.best_residual = best_residual


class ExponentViolation(QESError, ValueError):
    """The leading power extracted at the origin is not positive."""


class CaseMismatch(QESError, ValueError):
    """The requested tail case is incompatible with the potential family or coefficients."""


class EvaluationDomain(QESError, ValueError):
    """A radial function was evaluated at r <= 0."""


class EnergyDegenerate(QESError, ZeroDivisionError):
    """E is too close to M for the upper spinor component to be formed."""


class NonNormalizable(QESError, ValueError):
    """The exponential tail does not decay at one of the two ends."""


class NotConfining(QESError, RuntimeError):
    """The finite-difference spectrum is not discrete on the chosen grid."""


class FreeParameterUnbounded(QESError, ValueError):
    """The calibration scan window is empty, reversed or not finite."""


class ConfigError(QESError, ValueError):
    """A job configuration file is malformed."""
