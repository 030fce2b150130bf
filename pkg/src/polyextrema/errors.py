"""Exception hierarchy; the CLI maps each family to an exit code."""


class PolyExtremaError(Exception):
    """Base class for library errors."""


class ConfigError(PolyExtremaError, ValueError):
    """Invalid configuration, schema violation or bad argument (exit code 2)."""


class NumericalError(PolyExtremaError, ArithmeticError):
    """A computation could not be carried out reliably (exit code 3)."""


class UnderdeterminedError(NumericalError):
    pass


class RankDeficientError(NumericalError):
    def __init__(self, rank, needed):
        super().__init__(f"design matrix is rank deficient: rank {rank} < {needed}")
        self.rank = rank
        self.needed = needed


class ZeroVarianceError(NumericalError):
    pass


class SymmetricOutputError(NumericalError):
    """Skewness indices are undefined because the output is symmetric."""
