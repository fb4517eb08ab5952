"""Exception taxonomy.

Configuration and contract violations map to CLI exit code 2, numerical
failures to exit code 3 (see cli.py).
"""


class UcLabError(Exception):
    """Base class for all library errors."""


class ValidationError(UcLabError):
    """A precondition or declared invariant is violated by the inputs."""


class ConfigError(ValidationError):
    """Malformed or inconsistent run configuration."""


class InvalidParams(ValidationError):
    """Parameter set outside its admissible range."""


class OutOfChart(ValidationError):
    """Point leaves the interface chart cylinder."""


class RadiiOrder(ValidationError):
    """Ball radii are not strictly increasing or exceed their cap."""


class BallOutsideDomain(ValidationError):
    """A ball required to sit inside the domain does not."""


class GeometryInfeasible(ValidationError):
    """Requested mesh width / ball configuration is geometrically impossible."""


class DimensionMismatch(ValidationError):
    """Array shapes disagree with the mesh or field they belong to."""


class EmptyRegion(ValidationError):
    """A region that must carry positive area resolves to nothing on the mesh."""


class EmptySet(ValidationError):
    """A measurable set required to have positive measure is empty."""


class DegenerateSamples(ValidationError):
    """Envelope fit received samples that pin no exponent."""


class InsufficientPoints(ValidationError):
    """Too few usable points for the requested fit."""


class TargetNotSolution(ValidationError):
    """Approximation target fails the local equation residual audit."""


class ScheduleInfeasible(ValidationError):
    """Requested tolerance schedule is below the discretization floor."""


class NumericalFailure(UcLabError):
    """Base class for failures of the numerical machinery itself."""


class MeshFailure(NumericalFailure):
    """Mesh generation could not satisfy its quality guarantees."""


class SolveFailure(NumericalFailure):
    """Linear solve failed or missed the residual target."""


class EigSolveFailure(NumericalFailure):
    """Generalized eigenproblem failed to converge."""


class IllPosedFailure(NumericalFailure):
    """Unregularized normal equations are numerically singular."""


class CoverFailure(NumericalFailure):
    """Greedy covering construction did not terminate cleanly."""


class PathNotFound(NumericalFailure):
    """No connecting path exists in the discretized set."""
