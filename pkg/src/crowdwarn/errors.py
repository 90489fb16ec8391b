"""Exception hierarchy. Each class carries a stable machine-readable code used by the CLI."""


class CrowdWarnError(Exception):
    code = "error"
    exit_code = 1


class IngestError(CrowdWarnError, ValueError):
    code = "ingest_error"
    exit_code = 4


class EmptyPeaksError(CrowdWarnError, ValueError):
    code = "empty_peaks"
    exit_code = 5


class DegenerateSeriesError(CrowdWarnError, ValueError):
    code = "degenerate_series"
    exit_code = 5


class NoOverlapError(CrowdWarnError, ValueError):
    code = "no_overlap"
    exit_code = 5


class InsufficientDataError(CrowdWarnError, ValueError):
    code = "insufficient_data"
    exit_code = 5

    def __init__(self, message, *, available=None, required=None):
        super().__init__(message)
        self.available = available
        self.required = required


class ParameterError(CrowdWarnError, ValueError):
    code = "parameter_error"
    exit_code = 6


class ConfigError(CrowdWarnError, ValueError):
    code = "config_error"
    exit_code = 6


class TrainingError(CrowdWarnError, ValueError):
    code = "training_error"
    exit_code = 5


class ShapeError(CrowdWarnError, ValueError):
    code = "shape_error"
    exit_code = 5
