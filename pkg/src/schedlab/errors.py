"""Exception hierarchy shared across the toolkit."""


class SchedlabError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(SchedlabError):
    """A generator or experiment configuration is invalid.

    The message names the offending field (dotted path for nested configs).
    """


class MalformedRecordError(SchedlabError):
    """A serialized record (instance, schedule, metrics line) cannot be parsed."""


class DigestMismatchError(SchedlabError):
    """A stored instance id does not match the digest recomputed from its content."""


class InternalError(SchedlabError):
    """An invariant the library itself guarantees was violated (likely a bug)."""


class ConstraintViolationError(SchedlabError):
    """A placement conflicts with an existing one or violates precedence.

    Attributes:
        resource: human-readable resource name, e.g. "machine 3" or "tool 1".
        interval: the conflicting busy interval (start, end), if any.
    """

    def __init__(self, message: str, *, resource: str = "", interval: tuple[int, int] | None = None):
        super().__init__(message)
        self.resource = resource
        self.interval = interval


class InvalidActionError(SchedlabError):
    """An environment step was attempted with an out-of-range or masked action."""


class NoValidActionError(SchedlabError):
    """An action was requested but the mask admits none."""


class InvalidScheduleError(SchedlabError):
    """A schedule handed to a consumer (renderer, plotter CLI) fails validation."""

    def __init__(self, message: str, violations=()):
        super().__init__(message)
        self.violations = list(violations)


class OracleSizeError(SchedlabError):
    """An exhaustive oracle was asked to handle an instance beyond its size guard."""


class ModelVersionError(SchedlabError):
    """A model file declares an unsupported format version."""


class ModelFormatError(SchedlabError):
    """A model file is truncated or structurally invalid."""


class UnknownMethodError(SchedlabError):
    """An evaluation method name is not registered.

    Attributes:
        valid_names: the accepted method identifiers.
    """

    def __init__(self, name: str, valid_names):
        self.valid_names = sorted(valid_names)
        super().__init__(f"unknown method {name!r}; valid methods: {', '.join(self.valid_names)}")


class TrainingDivergedError(SchedlabError):
    """Training produced a non-finite loss; carries diagnostics in the message."""
