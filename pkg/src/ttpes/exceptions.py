"""Exception types shared across the package."""


class TtpesError(Exception):
    """Base class for package-specific failures."""


class ConfigError(TtpesError):
    """Invalid or inconsistent run configuration (CLI exit code 2)."""


class GuardExceededError(TtpesError):
    """A dense materialization would exceed its configured size guard."""


class NumericalError(TtpesError):
    """Non-finite values or ill-conditioned linear algebra (CLI exit code 3)."""


class ConvergenceError(TtpesError):
    """An iterative solver failed to converge (CLI exit code 4)."""


class SamplingError(TtpesError):
    """Metropolis chain failure, e.g. zero acceptance over a long window."""


class SchemaError(TtpesError):
    """A serialized file does not match the expected schema."""
