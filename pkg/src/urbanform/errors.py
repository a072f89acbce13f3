"""Exception types shared across the package."""


class UrbanFormError(Exception):
    """Base class for package errors."""


class DegenerateGeometryError(UrbanFormError):
    """Raised when a geometric primitive cannot be computed (zero area,
    collinear vertices, empty input)."""


class DataError(UrbanFormError):
    """Raised for invalid input data (wrong CRS, overlapping footprints,
    missing attributes)."""


class ParseError(DataError):
    """Raised when an input file cannot be parsed.

    Carries the feature index when the failure is attributable to a
    single feature.
    """

    def __init__(self, message, feature_index=None):
        if feature_index is not None:
            message = f"feature {feature_index}: {message}"
        super().__init__(message)
        self.feature_index = feature_index


class ConfigError(UrbanFormError):
    """Raised for invalid pipeline configuration."""


class StageError(UrbanFormError):
    """Raised when a pipeline stage fails; names the stage."""

    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage
