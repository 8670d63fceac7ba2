"""Exception hierarchy for the mocomp package.

Every error raised by the package derives from :class:`MocompError` so
callers can catch one type at service boundaries.  Subclasses split along
the failure surfaces users actually hit: bad parameters, bad input files,
simulation blow-ups, planner/transport trouble, and optimization aborts.
"""

from __future__ import annotations


class MocompError(Exception):
    """Base class for all package errors."""


class ParameterDomainError(MocompError, ValueError):
    """A scalar parameter is outside its admissible domain."""


class MaterialValidationError(MocompError, ValueError):
    """A material record violates one or more invariants.

    Carries the full diagnostic list so callers can report every violation
    at once instead of the first one found.
    """

    def __init__(self, diagnostics: list[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


class ParseError(MocompError, ValueError):
    """An input file (CSV, PLY, labels, config) failed to parse."""


class ConfigError(MocompError, ValueError):
    """A configuration file parsed but is semantically invalid."""


class SimulationError(MocompError, RuntimeError):
    """Base class for failures raised while advancing a simulation."""


class OutOfDomainError(SimulationError):
    """A particle left the supported interior region of the grid."""


class InversionError(SimulationError):
    """A deformation gradient lost positive determinant (element inversion)."""


class TimestepError(SimulationError):
    """The requested timestep violates the stability bound."""


class SceneError(MocompError, ValueError):
    """Scene composition or validation failed (labels, overlap, margins)."""


class OptimizationError(MocompError, RuntimeError):
    """Parameter optimization aborted (bad gradient, failed evaluation)."""


class PlannerError(MocompError, RuntimeError):
    """Base class for planner failures."""


class PlannerFormatError(PlannerError):
    """A planner response stayed unparseable after the format-reminder retry."""

    def __init__(self, message: str, raw_response: str = ""):
        self.raw_response = raw_response
        super().__init__(message)


class TransportError(PlannerError):
    """The chat-completion endpoint was unreachable or returned garbage."""


class RegionError(MocompError, ValueError):
    """Region splitting or placement failed (grammar, fit, bounds)."""


class InpaintError(MocompError, ValueError):
    """Masked-inpainting inputs are inconsistent (masks, schedule, shapes)."""
