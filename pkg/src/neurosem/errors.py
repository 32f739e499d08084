"""Exception hierarchy. ``exit_code`` is what the CLI returns for each family."""


class NeuroSemError(Exception):
    exit_code = 1


class InvalidArgumentError(NeuroSemError, ValueError):
    exit_code = 2


class ConfigError(InvalidArgumentError):
    pass


class TooShortError(InvalidArgumentError):
    pass


class ShapeError(InvalidArgumentError):
    pass


class OutOfRangeError(InvalidArgumentError):
    pass


class EmptyTextError(InvalidArgumentError):
    pass


class InvalidBatchError(InvalidArgumentError):
    pass


class DegenerateInputError(InvalidArgumentError):
    pass


class GrammarExhaustedError(InvalidArgumentError):
    pass


class UnknownSentenceError(NeuroSemError, KeyError):
    exit_code = 2


class DivergedError(NeuroSemError, ArithmeticError):
    """Training produced a non-finite loss."""

    exit_code = 3

    def __init__(self, epoch, loss):
        super().__init__(f"training diverged at epoch {epoch} (loss={loss!r})")
        self.epoch = epoch
        self.loss = loss


class SingularMatrixError(NeuroSemError, ArithmeticError):
    exit_code = 3
