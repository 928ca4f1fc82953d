"""Exception hierarchy shared by all s3fn modules.

The CLI maps these onto process exit codes: configuration/usage problems
exit 2, data and format problems exit 3, numeric failures exit 4.
"""


class S3FNError(Exception):
    """Base class for all errors raised by this package."""


class FormatError(S3FNError):
    """A file does not conform to one of the documented on-disk formats."""


class TruncationError(FormatError):
    """A file's declared size disagrees with its actual payload."""


class DataError(S3FNError):
    """Input data is unusable: non-finite values, degenerate statistics."""


class ValidationError(S3FNError):
    """Inputs are well-formed but violate a cross-object invariant."""


class ShapeError(S3FNError):
    """Array dimensions disagree with what an operation requires."""


class ConfigError(S3FNError):
    """A parameter or option is outside its allowed range or missing."""


class NumericError(S3FNError):
    """A computation produced non-finite values (diverged training etc.)."""


EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_NUMERIC = 4

_EXIT_CODES = {
    ConfigError: EXIT_USAGE,
    NumericError: EXIT_NUMERIC,
}


def exit_code_for(exc: S3FNError) -> int:
    """Process exit code the CLI should use for ``exc``."""
    for klass, code in _EXIT_CODES.items():
        if isinstance(exc, klass):
            return code
    return EXIT_DATA
