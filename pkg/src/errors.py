"""Error categories for fks3d.

Every error raised on purpose by the solver derives from FksError and
carries the process exit code the CLI uses for its category.
"""
from typing import Optional, Sequence


class FksError(Exception):
    """Base class for all solver errors."""

    exit_code = 1
    category = "error"


class ConfigError(FksError):
    """Invalid configuration, grid or decomposition."""

    exit_code = 2
    category = "config"


class CostGuardError(ConfigError):
    """An oracle was asked for a problem size it refuses to run."""


class ProtocolError(FksError):
    """Halo-exchange protocol violation (step, slot list or payload mismatch)."""

    exit_code = 3
    category = "protocol"


class NumericError(FksError):
    """Non-finite values, broken invariants or unstable steps."""

    exit_code = 4
    category = "numeric"


class InvalidStateError(NumericError):
    """A cell holds a non-physical state (rho <= 0 or T <= 0)."""

    def __init__(self, message: str, cell: Optional[Sequence[int]] = None):
        self.reason = message
        self.cell = tuple(int(c) for c in cell) if cell is not None else None
        if self.cell is not None:
            message = f"{message} at cell {self.cell}"
        super().__init__(message)


class CflError(NumericError):
    """A particle would cross more than one cell in a single step."""


class TransportError(FksError):
    """Message transport failure between two workers."""

    exit_code = 5
    category = "transport"

    def __init__(self, message: str, sender: Optional[int] = None, receiver: Optional[int] = None):
        self.sender = sender
        self.receiver = receiver
        super().__init__(f"{message} (sender={sender}, receiver={receiver})")


class WorkerFailure(FksError):
    """A worker raised while running the time loop."""

    exit_code = 6
    category = "worker"

    def __init__(self, rank: int, step: int, cause: BaseException):
        self.rank = rank
        self.step = step
        self.cause = cause
        super().__init__(f"worker {rank} failed at step {step}: {type(cause).__name__}: {cause}")
        # surface the category of the underlying error
        if isinstance(cause, FksError):
            self.exit_code = cause.exit_code
            self.category = cause.category


class OutputError(FksError):
    """Writing or reading a result file failed."""

    exit_code = 7
    category = "output"

    def __init__(self, message: str, path=None):
        self.path = path
        super().__init__(f"{message}: {path}" if path is not None else message)


class StabilityWarning(UserWarning):
    """Explicit Euler relaxation overshoots (dt * nu > 1)."""
