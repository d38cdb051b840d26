"""Exception types raised across the package."""


class GssError(Exception):
    """Base class for all package errors."""


class DimensionMismatch(GssError, ValueError):
    pass


class ConnectivityFailure(GssError):
    """No connected sample was drawn within the attempt budget."""


class SimplicityFailure(GssError):
    """The pairing model kept producing self-loops or multi-edges."""


class DisconnectedGraph(GssError):
    """More than one eigenvalue sits below the zero threshold."""


class EmptyBand(GssError):
    """No non-constant eigenvalue passes the cutoff."""


class NonFiniteLoss(GssError, FloatingPointError):
    pass


class SingularSystem(GssError, ArithmeticError):
    pass


class DegenerateSignal(GssError):
    pass


class ZeroReference(GssError, ValueError):
    pass


class EmptyList(GssError, ValueError):
    pass


class EmptyGrid(GssError, ValueError):
    pass
