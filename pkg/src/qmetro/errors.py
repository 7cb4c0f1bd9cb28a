"""Exception hierarchy shared by all modules."""


class QMetroError(Exception):
    """Base class for errors raised by qmetro."""


class InputError(QMetroError, ValueError):
    """Malformed or inconsistent input (shapes, symmetry, normalization)."""


class SingularFisherError(QMetroError):
    """The quantum Fisher information matrix is not invertible.

    ``null_direction`` holds the parameter combination carrying no information.
    """

    def __init__(self, message, null_direction=None):
        super().__init__(message)
        self.null_direction = null_direction


class SingularOutcomeError(QMetroError):
    """An outcome has vanishing probability but non-vanishing derivative."""


class NumericalInconsistencyError(QMetroError):
    """A computed quantity violates an invariant beyond tolerance."""


class SaturationError(NumericalInconsistencyError):
    """A constructed measurement fails to reach the tradeoff bound."""
