"""Exception hierarchy and warnings for the audit toolkit.

Two top-level families map onto CLI exit codes: ``InputError`` (bad or
inadequate data, exit 2) and ``ConfigError`` (bad parameters or run
configuration, exit 3).
"""


class AuditError(Exception):
    """Base class for all toolkit errors."""


class InputError(AuditError):
    """The supplied data is invalid or inadequate for the requested operation."""


class FormatError(InputError):
    """A data file violates the documented record format."""


class ProfileError(InputError):
    """A user profile is missing or inconsistent with the request."""


class SchemaError(InputError):
    """An attribute, value, or distribution does not match the declared schema."""


class MeasureUndefinedError(InputError):
    """The measure is mathematically undefined on this input."""


class ComplexityError(InputError):
    """The instance exceeds a hard size guard of the requested exact method."""


class ConfigError(AuditError):
    """The run configuration is invalid or inconsistent."""


class ParameterError(ConfigError):
    """An operation parameter is outside its allowed range."""


class ModeError(ConfigError):
    """The measure is unavailable in the current audit mode (e.g. no ground truth)."""


class DegenerateInputWarning(UserWarning):
    """Emitted when an operation is evaluated on degenerate input (e.g. empty lists)."""
