"""Exception hierarchy shared by the services and the command line."""


class IsolabError(Exception):
    """Base class for all toolkit errors."""


class InputValidationError(IsolabError, ValueError):
    """Malformed input: wrong shapes, indices out of range, violated preconditions."""


class PreconditionError(InputValidationError):
    """Input is well formed but violates an operation precondition."""


class InsufficientDegreeError(InputValidationError):
    """The germ is not given to a high enough degree to be reduced."""

    def __init__(self, required, given):
        super().__init__(f'raise degree: truncation degree {given} is below the required bound {required}')
        self.required = required
        self.given = given


class NumericalAbort(IsolabError, ArithmeticError):
    """A numerical computation could not be completed reliably."""


class SingularMatrixError(NumericalAbort):
    """Matrix is not invertible within the singularity threshold."""


class IllConditionedError(NumericalAbort):
    """A quantity sits too close to a branch cut, a collision or a singular system."""

    def __init__(self, message, detail=None):
        super().__init__(message)
        self.detail = detail or {}


class DegeneracyError(NumericalAbort):
    """A flow brought two special points together."""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location or {}


class StepSizeUnderflowError(NumericalAbort):
    """The adaptive integrator could not meet its tolerance."""


class InconsistencyError(NumericalAbort):
    """A rational triple does not produce a potential in the expected space."""


class LoopTooCloseError(NumericalAbort):
    """A transport loop passes too close to a pole."""


class IntertwinerNotConjugatorError(IsolabError):
    """Nonzero intertwiners exist but none of the sampled ones is invertible."""
