"""Exception hierarchy for ssfplsim."""


class SSFPLSIMError(Exception):
    """Base class for all package errors."""


class GridMismatchError(SSFPLSIMError, ValueError):
    """Two curves (or a curve and a sample) live on different grids."""


class DegenerateDirectionError(SSFPLSIMError, ValueError):
    """A direction with zero coefficients (or zero norm) cannot be calibrated."""


class EmptyNeighborhood(SSFPLSIMError):
    """Every kernel weight vanished, so the Nadaraya-Watson weights are undefined.

    ``index`` is the row of the sample (or ``"query"`` for an external curve)
    and ``h`` the bandwidth that was too small.
    """

    def __init__(self, index, h, message=None):
        self.index = index
        self.h = h
        if message is None:
            message = f"empty kernel neighborhood at {index!r} for h={h!r}"
        super().__init__(message)


class DegenerateProjection(SSFPLSIMError):
    """All pairwise projected distances are zero."""


class SingularDesign(SSFPLSIMError, ValueError):
    """The (profiled) normal equations are singular and no ridge was allowed."""


class NumericalDivergence(SSFPLSIMError, ArithmeticError):
    """The coordinate-descent objective became non-finite."""


class NoFeasibleFit(SSFPLSIMError):
    """Every (direction, bandwidth) pair failed."""


class DataError(SSFPLSIMError, ValueError):
    """Malformed input data or configuration file."""
