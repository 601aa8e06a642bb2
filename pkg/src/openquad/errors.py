"""Exception and warning types shared across the package."""


class OpenQuadError(Exception):
    """Base class for errors raised by openquad."""


class ModelError(OpenQuadError, ValueError):
    """Invalid model data (shape, Hermiticity, negative rates, bad file)."""


class UnknownPresetError(OpenQuadError, KeyError):
    """Requested preset name is not registered."""

    def __str__(self):
        return str(self.args[0]) if self.args else ""


class NoUniqueSolutionError(OpenQuadError, ArithmeticError):
    """Sylvester system is singular or numerically singular.

    Attributes
    ----------
    min_separation : float
        Smallest ``|alpha_i + beta_j|`` over eigenvalues of the two
        coefficient matrices.
    """

    def __init__(self, message, min_separation):
        super().__init__(f"{message} (min |alpha_i + beta_j| = {min_separation:.3e})")
        self.min_separation = float(min_separation)


class NoUniqueStationaryError(NoUniqueSolutionError):
    """The second-moment Lyapunov equation has no unique solution."""


class IntegrationError(OpenQuadError, RuntimeError):
    """A time integrator failed to satisfy its accuracy guards."""


class ValidityWarning(UserWarning):
    """A result is outside the regime where its approximation holds."""


class PhaseWarning(UserWarning):
    """Model parameters lie outside the phase a preset describes."""


class DiscrepancyWarning(UserWarning):
    """Two independent evaluation routes disagree beyond tolerance."""


class LowConfidenceWarning(UserWarning):
    """A rank or cluster decision was close to its threshold."""
