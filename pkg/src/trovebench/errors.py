"""Exception hierarchy and process exit codes."""

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_VALIDATION = 2
EXIT_INFRA = 3


class HarnessError(Exception):
    """Base class for every error raised by this package."""

    exit_code = EXIT_VALIDATION


class UsageError(HarnessError):
    """Bad flags or configuration: invalid k, missing template files, and the like."""

    exit_code = EXIT_USAGE


class ValidationError(HarnessError):
    """Inputs that parse but violate a documented contract."""


class DatasetError(ValidationError):
    """Malformed or inconsistent dataset files."""


class FixtureError(ValidationError):
    """Missing or malformed fixture entries."""


class BudgetError(ValidationError):
    """A generation request would exceed the per-task call budget."""


class TransportError(HarnessError):
    """Backend unreachable or off-protocol after bounded retries."""

    exit_code = EXIT_INFRA


class RunnerUnavailableError(HarnessError):
    """Runner process missing or replying off-protocol; distinct from candidate failure."""

    exit_code = EXIT_INFRA


class LockError(HarnessError):
    """Run directory already owned by another process."""

    exit_code = EXIT_INFRA
