"""Exception types raised across the pipeline."""


class SenmError(Exception):
    """Base class. ``exit_code`` is what the CLI returns when this escapes."""

    exit_code = 3


class ValidationError(SenmError):
    """Bad configuration, missing input paths, out-of-range thresholds."""

    exit_code = 2


class MalformedRecord(SenmError):
    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        self.reason = reason
        msg = f"malformed record at line {line_no}"
        if reason:
            msg += f": {reason}"
        super().__init__(msg)


class EmptyTimeline(SenmError):
    pass


class ClassifierUnavailable(SenmError):
    pass


class DegenerateInput(SenmError):
    pass


class EmptyNetwork(SenmError):
    pass


class MissingText(SenmError):
    pass


class AlterMismatch(SenmError):
    pass


class NoSignedRelationships(SenmError):
    pass


class InsufficientEgos(SenmError):
    pass


class NoMatchingEgos(SenmError):
    pass


class DegenerateVariance(SenmError):
    pass


class InfeasibleConfig(ValidationError):
    pass
