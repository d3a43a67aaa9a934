"""Exception hierarchy shared by every module of the package."""


class QCBMError(Exception):
    """Base class for all errors raised by photonic_qcbm."""


class InputError(QCBMError, ValueError):
    """An argument violates the documented preconditions."""


class ResourceError(QCBMError):
    """The requested computation exceeds a configured size cap."""


class InsufficientDataError(QCBMError):
    """An estimator has no samples in the stratum it needs.

    ``iteration`` is filled in by the training loop when the error escapes a
    loss evaluation.
    """

    def __init__(self, message: str, iteration: int | None = None):
        super().__init__(message)
        self.iteration = iteration

    def __str__(self) -> str:
        base = super().__str__()
        if self.iteration is None:
            return base
        return f"{base} (iteration {self.iteration})"


class DegenerateInputError(QCBMError, ValueError):
    """The input carries no mass where the operation needs it."""


class NumericalError(QCBMError, ArithmeticError):
    """An iterative or spectral routine failed to converge."""


class ConfigError(QCBMError, ValueError):
    """A run configuration is invalid; ``problems`` lists every violation."""

    def __init__(self, problems: list[tuple[str, str]]):
        self.problems = list(problems)
        lines = [f"{path}: {msg}" for path, msg in self.problems]
        super().__init__("invalid configuration:\n  " + "\n  ".join(lines))
