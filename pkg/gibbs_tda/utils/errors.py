"""
Exception and warning types shared by the library, the Mage blocks and the CLI.
"""


class ParameterError(ValueError):
    """An input parameter is out of range. `field` names the offending one."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class PreconditionError(ValueError):
    """An operation was called on data it is not defined for."""


class NonNormalizableModelError(ValueError):
    """θ_H or θ_V is not positive, so the conditional density has no normalizer."""


class InvariantViolation(RuntimeError):
    """Internal consistency check failed. Always a bug or corrupt input."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for the CLI error line."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


class DegenerateDeltaWarning(UserWarning):
    pass


class NeighborCountWarning(UserWarning):
    pass


class CovarianceFloorWarning(UserWarning):
    pass


class ConvergenceWarning(UserWarning):
    pass


class AcceptanceGuardWarning(UserWarning):
    pass
