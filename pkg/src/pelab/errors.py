"""Exception hierarchy shared by all pelab modules."""


class PelabError(Exception):
    """Base class for all pelab errors."""


class GridMismatch(PelabError):
    """Operands live on different grids."""


class NonFiniteProfile(PelabError):
    """A metric profile contains NaN or infinite values."""


class RadiusOutOfRange(PelabError):
    """Requested evaluation radius lies outside (0, R_max]."""


class ShiftNotPositive(PelabError):
    """Scalar shifted solve requires a positive shift constant."""


class ShiftBelowThreshold(PelabError):
    """Tensor shifted solve requires the shift above the invertibility threshold."""


class SingularSystem(PelabError):
    """Direct solve hit a numerically singular matrix; signals a discretization bug."""


class NewtonDiverged(PelabError):
    """Newton iteration failed to reduce the residual within the iteration cap."""


class NegativeConformalFactor(PelabError):
    """Conformal substitution variable crossed zero; input left the perturbative regime."""


class NonAdmissibleMetric(PelabError):
    """Metric violates the decay conditions of the admissible perturbation class."""


class IterationStalled(PelabError):
    """Inverse iteration failed to converge to an eigenpair."""


class LimitNotConverged(PelabError):
    """Large-radius extrapolation increments fail to decay; input likely inadmissible."""


class InsufficientData(PelabError):
    """Not enough usable samples or trajectory states for the requested fit."""


class StepRejected(PelabError):
    """Flow step rejected after the maximum number of halvings."""


class MonotonicityViolated(PelabError):
    """Entropy decreased along the flow beyond tolerance; flags a discretization bug."""


class PreconditionFailed(PelabError):
    """Caller-checked precondition does not hold for the given input."""


class SpecInvalid(PelabError):
    """Perturbation specification is malformed."""


class ConfigInvalid(PelabError):
    """Experiment configuration is malformed or contains unknown keys."""
