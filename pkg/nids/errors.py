""" Exceptions raised by the nids package.

Per-record problems (a bad frame, an out-of-order packet, a malformed csv row) are counted
by the component that sees them and never raised. Everything here is a hard stop for the
operation that raised it.
"""
from typing import Any, Dict, Optional


class NidsError(Exception):
    """ Root of everything we raise on purpose. """


class ConfigError(NidsError, ValueError):
    """ Bad configuration, detected at load time. """


class PcapParseError(NidsError, ValueError):
    """ The capture cannot be read at all (e.g. truncated global header, unknown magic). """


class CodecError(NidsError, ValueError):
    ...


class SchemaMismatchError(CodecError):
    def __init__(self, expected_fingerprint: int, actual_fingerprint: int):
        super().__init__(
            f"schema fingerprint mismatch: expected {expected_fingerprint:#018x}, got {actual_fingerprint:#018x}"
        )
        self.expected_fingerprint = expected_fingerprint
        self.actual_fingerprint = actual_fingerprint


class TruncatedRecordError(CodecError):
    ...


class ModelFormatError(NidsError, ValueError):
    """ Model file is corrupt, truncated or of an unknown format version. """


class SpecVersionMismatchError(NidsError, ValueError):
    def __init__(self, model_spec_version: str, pipeline_spec_version: str):
        super().__init__(
            f"model was trained under normalization spec {model_spec_version!r}, "
            f"but the pipeline runs spec {pipeline_spec_version!r}; retrain or load the matching spec"
        )
        self.model_spec_version = model_spec_version
        self.pipeline_spec_version = pipeline_spec_version


class DimensionMismatchError(NidsError, ValueError):
    def __init__(self, expected: int, actual: int, what: str = 'vector'):
        super().__init__(f"{what} dimension mismatch: expected {expected}, got {actual}")
        self.expected = expected
        self.actual = actual


class EmptyInputError(NidsError, ValueError):
    ...


class TrainingError(NidsError):
    """ Training failed; when raised from a grid search it names the grid point. """

    def __init__(self, message: str, grid_point_or_none: Optional[Dict[str, Any]] = None):
        if grid_point_or_none is not None:
            message = f"{message} (at grid point {grid_point_or_none})"
        super().__init__(message)
        self.grid_point_or_none = grid_point_or_none


class InvariantViolation(NidsError, AssertionError):
    """ Something that cannot happen, happened. Maps to exit code 3. """


class GroundTruthFormatError(NidsError, ValueError):
    """ The ground-truth table lacks required columns. Bad individual rows are only counted. """
