# ─────────────────────────────────────────────────────────────────────────────
# Exception hierarchy; every library error maps onto one CLI exit code
# ─────────────────────────────────────────────────────────────────────────────

from lib.config import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC


class SindyError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = EXIT_NUMERIC


class DimensionError(SindyError, ValueError):
    """Operand shapes do not chain."""


class DomainError(SindyError, ValueError):
    """Input outside the domain of an operation."""


class ContractError(SindyError, ValueError):
    """API used against its contract (e.g. gradient of a non-scalar)."""


class NumericError(SindyError, ArithmeticError):
    """A forward computation produced NaN or Inf."""


class DivergenceError(NumericError):
    """
    Optimization or simulation left the finite range.

    `partial` carries whatever was finite when the failure was detected:
    a partial trajectory, the last finite parameter state, or a loss history.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class RankDeficientError(DomainError):
    def __init__(self, rank, n_columns):
        super().__init__(
            f"candidate library is rank deficient: rank {rank} < {n_columns} columns"
        )
        self.rank = rank
        self.n_columns = n_columns


class ConfigError(SindyError, ValueError):
    exit_code = EXIT_CONFIG

    def __init__(self, message, line=None, source=None):
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif source is not None:
            where = f"{source}: "
        super().__init__(where + message)
        self.line = line
        self.source = source


class CheckpointError(SindyError, OSError):
    exit_code = EXIT_IO


class DatasetError(SindyError, OSError):
    exit_code = EXIT_IO


class StageError(SindyError):
    """A pipeline stage failed; keeps the stage name and the original exit code."""

    def __init__(self, stage, cause):
        super().__init__(f"{stage} failed: {cause}")
        self.stage = stage
        self.cause = cause
        self.exit_code = exit_code_for(cause)


def exit_code_for(exc):
    if isinstance(exc, SindyError):
        return exc.exit_code
    if isinstance(exc, OSError):
        return EXIT_IO
    return EXIT_NUMERIC
