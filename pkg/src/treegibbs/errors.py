"""Exception types raised across the package."""


class TreeGibbsError(Exception):
    """Base class for all package errors."""


class DomainError(TreeGibbsError, ValueError):
    """An argument lies outside the domain of the operation."""


class RootHasNoParent(TreeGibbsError, ValueError):
    pass


class InfeasibleConditioning(TreeGibbsError):
    """The conditioning event has probability zero."""


class DegenerateProduct(TreeGibbsError, ArithmeticError):
    """A transfer-matrix row vanished entirely."""


class NotApplicable(TreeGibbsError, ValueError):
    """The bound or estimate does not apply to this input (e.g. alternating env)."""


class VolumeTooLarge(TreeGibbsError, ValueError):
    """Brute-force enumeration was requested beyond its volume cap."""
