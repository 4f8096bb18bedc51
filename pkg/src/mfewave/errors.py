"""Exception hierarchy."""


class MfeWaveError(Exception):
    pass


class InvalidArgument(MfeWaveError, ValueError):
    pass


class NumericalFailure(MfeWaveError, ArithmeticError):
    pass


class FactorizationError(NumericalFailure):
    """A linear system could not be factorized.

    ``s`` carries the Laplace parameter (or ``None`` for time-stepping
    matrices) so that resonances can be reported to the caller.
    """

    def __init__(self, message, s=None, step=None):
        super().__init__(message)
        self.s = s
        self.step = step


class ModulationPositivityError(FactorizationError):
    """The modulated coefficient became non-positive somewhere on the grid."""
