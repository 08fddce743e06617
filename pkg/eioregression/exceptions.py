class EioError(ValueError):
    """
    Base class for every domain failure raised by this app.

    Subclasses ValueError so callers that only care about "bad input"
    can keep catching ValueError.
    """


class NonmonotoneSpectrum(EioError):
    """Covariance spectrum is negative somewhere or not nonincreasing."""


class DimensionMismatch(EioError):
    """Array shapes disagree with the declared dimension or sample size."""


class NonorthogonalEigvecs(EioError):
    """Eigenvector matrix V fails ‖VᵀV − I‖_max ≤ 1e-10."""


class NonfiniteValues(EioError):
    """An array that must be finite contains NaN or ±inf."""


class InvalidHyperparams(EioError):
    """Penalty weights or iteration controls are out of range."""


class KindMismatch(EioError):
    """A sampler was called with a design of the wrong family."""


class InfiniteMu(EioError):
    """A finite-μ formula was evaluated at the μ = ∞ sentinel."""


class SingularSystem(EioError):
    """An unregularized Gram matrix is numerically singular."""


class ZeroTheta(EioError):
    """A bound that divides by ‖θ°‖ was asked for θ° = 0."""


class TauLambdaMismatch(EioError):
    """Ridge/EiO bias comparison requires τ² = 2λ."""


class ConfigParseError(EioError):
    """
    Run configuration text could not be parsed.

    Attributes:
        line (int): 1-based line of the offending character.
        column (int): 1-based column of the offending character.
    """

    def __init__(self, message: str, line: int = 0, column: int = 0):
        self.line = line
        self.column = column
        super().__init__(f"{message} (line {line}, column {column})")
