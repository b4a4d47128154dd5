"""Exception hierarchy shared by all modules.

Every error carries the module and operation that raised it so that the CLI
can report a precise origin and map it onto an exit status.
"""


class PercolationError(Exception):
    """Base class for all errors raised by :mod:`lrperc`."""

    exit_code = 1

    def __init__(self, message, *, module=None, operation=None):
        self.module = module
        self.operation = operation
        where = ".".join(p for p in (module, operation) if p)
        super().__init__(f"[{where}] {message}" if where else message)


class ValidationError(PercolationError, ValueError):
    exit_code = 2


class KernelError(ValidationError):
    pass


class EmptyDeltaError(KernelError):
    pass


class OrderViolationError(KernelError):
    pass


class InfiniteDifferenceError(KernelError):
    pass


class ZeroProductError(KernelError):
    pass


class SizeError(PercolationError):
    exit_code = 3


class BracketingError(PercolationError):
    exit_code = 4


class FitError(PercolationError):
    exit_code = 4


class InternalConsistencyError(PercolationError, AssertionError):
    """Raised when a runtime invariant check of the exploration fails.

    The offending trace (possibly ``None`` when tracing is off) is attached as
    ``trace`` for post-mortem inspection.
    """

    exit_code = 5

    def __init__(self, message, *, trace=None, module="exploration", operation=None):
        super().__init__(message, module=module, operation=operation)
        self.trace = trace
