"""Exception types shared across the package."""


class GwrError(Exception):
    """Base class for all package errors."""


class InvalidBandwidthError(GwrError, ValueError):
    pass


class InvalidConfigError(GwrError, ValueError):
    pass


class SingularSystemError(GwrError, ArithmeticError):
    """A local weighted system could not be solved reliably.

    Carries the condition estimate and the target location so the caller can
    decide whether to enlarge the bandwidth.
    """

    def __init__(self, message, condition=float("inf"), location=None, stage=None):
        super().__init__(message)
        self.condition = condition
        self.location = location
        self.stage = stage

    def __str__(self):
        parts = [super().__str__()]
        if self.location is not None:
            parts.append(f"location={self.location}")
        if self.stage is not None:
            parts.append(f"stage={self.stage}")
        if self.condition is not None:
            parts.append(f"condition={self.condition:.3g}")
        return " ".join(parts)


class UndefinedVarianceError(GwrError, ValueError):
    pass


class SearchFailureError(GwrError, RuntimeError):
    pass


class SchemaError(GwrError, ValueError):
    pass


class DimensionMismatchError(GwrError, ValueError):
    pass
