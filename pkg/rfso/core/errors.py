"""
Exception hierarchy shared by the numerical model and the runners.

Every error raised on purpose by the package derives from LinkModelError, so
the sweep runner can isolate a failing grid point without swallowing genuine
programming errors.
"""

from typing import Iterable, List, Optional


class LinkModelError(Exception):
    """Base class of all model-level errors."""


class DomainError(LinkModelError, ValueError):
    """Argument outside the domain of a special function (e.g. a gamma pole)."""


class MeijerGError(LinkModelError):
    """Base class for Meijer G evaluation failures."""


class PoleCoincidence(MeijerGError):
    """Two or more poles of the Mellin-Barnes integrand coincide; the residue series does not apply."""


class SeriesLossOfPrecision(MeijerGError):
    """The residue series converged but cancelled too much to be trusted."""


class ContourNotSeparable(MeijerGError):
    """No vertical line separates the left and right pole families."""


class NonConvergent(MeijerGError):
    """A series or contour integral did not reach its tolerance within its iteration cap."""


class NegativeCorrelation(LinkModelError, ValueError):
    """The Jakes model produced a negative correlation coefficient."""


class NotRationalizable(LinkModelError, ValueError):
    """β₂/β₁ has no ratio l/k of small positive integers within tolerance."""


class InfiniteCeiling(LinkModelError):
    """Ideal hardware (δ = 0) has no SNDR or capacity ceiling."""


class UnsupportedParameters(LinkModelError, ValueError):
    """The requested closed form is not defined for this parameter family."""


class CatastrophicCancellation(UnsupportedParameters):
    """An alternating closed-form sum cancels beyond what float64 terms can resolve."""


class QuadratureNonConvergent(LinkModelError):
    """Adaptive quadrature finished with an error estimate above tolerance."""

    def __init__(self, message: str, achieved_error: float):
        super().__init__(f"{message} (achieved error estimate {achieved_error:.3e})")
        self.achieved_error = achieved_error


class DiscrepancyFlag(LinkModelError):
    """A closed form disagrees with its integral reference beyond tolerance."""

    def __init__(self, quantity: str, closed: float, reference: float, tolerance: float):
        self.quantity = quantity
        self.closed = closed
        self.reference = reference
        self.delta = closed - reference
        self.tolerance = tolerance
        super().__init__(
            f"{quantity}: closed form {closed:.10g} vs reference {reference:.10g} "
            f"(delta {self.delta:.3e}, tolerance {tolerance:.1e})"
        )


class ConfigInvalid(LinkModelError, ValueError):
    """Scenario or sweep configuration failed validation."""

    def __init__(self, messages: Iterable[str], source: Optional[str] = None):
        self.messages: List[str] = list(messages)
        self.source = source
        prefix = f"{source}: " if source else ""
        super().__init__(prefix + "; ".join(self.messages))
