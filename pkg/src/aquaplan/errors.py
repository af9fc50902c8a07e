"""Exception types shared across the package."""


class AquaplanError(Exception):
    """Base class for all package errors."""

    code = "AQUAPLAN_ERROR"


class ConfigError(AquaplanError):
    """Bad or inconsistent configuration (file or programmatic)."""

    code = "AQUAPLAN_CONFIG_ERROR"


class SolverError(AquaplanError):
    """Nodal system could not be solved (e.g. an isolated node)."""

    code = "AQUAPLAN_SOLVER_ERROR"

    def __init__(self, message, node=None):
        super().__init__(message)
        self.node = node


class QualityError(AquaplanError):
    """Chlorine / transport-delay state is invalid (e.g. empty tank)."""

    code = "AQUAPLAN_QUALITY_ERROR"


class FitError(AquaplanError):
    """Emissions regression cannot be performed (rank deficiency etc.)."""

    code = "AQUAPLAN_FIT_ERROR"


class SeriesError(AquaplanError):
    """A time series lookup or construction failed."""

    code = "AQUAPLAN_SERIES_ERROR"


class ParseError(AquaplanError):
    """Malformed input file."""

    code = "AQUAPLAN_PARSE_ERROR"

    def __init__(self, message, line=None):
        super().__init__(message)
        self.line = line


class ComparisonError(AquaplanError):
    """Metrics being compared are not comparable."""

    code = "AQUAPLAN_COMPARE_ERROR"


class TraceError(AquaplanError):
    """A simulation trace file is missing or unusable."""

    code = "AQUAPLAN_TRACE_ERROR"
