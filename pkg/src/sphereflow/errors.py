"""Exception and warning types shared across the package."""


class SphereFlowError(Exception):
    """Base class for package-specific errors."""


class SpacingTooCoarse(SphereFlowError):
    pass


class NoGraphAvailable(SphereFlowError):
    pass


class DimensionMismatch(SphereFlowError):
    pass


class NearZeroVector(SphereFlowError):
    pass


class GridMismatch(SphereFlowError):
    pass


class NoConvergence(SphereFlowError):
    pass


class OrderTooHighForGrid(SphereFlowError):
    pass


class CFLViolated(SphereFlowError):
    pass


class NormBlowup(SphereFlowError):
    pass


class TimeNotBeforeCenter(SphereFlowError):
    pass


class WindowOutsideTrajectory(SphereFlowError):
    pass


class EmptyIntersection(SphereFlowError):
    pass


class TooFewScales(SphereFlowError):
    pass


class PoleProximity(SphereFlowError):
    pass


class UnboundedDomainUnsupported(SphereFlowError):
    pass


class ConfigError(SphereFlowError):
    pass


class KernelUnderresolved(UserWarning):
    """Gaussian weight narrower than a few grid cells; quadrature degraded."""
