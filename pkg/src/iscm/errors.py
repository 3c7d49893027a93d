"""Exception hierarchy shared by all modules."""


class IscmError(Exception):
    """Base class for all errors raised by this package."""


class InvalidParameter(IscmError, ValueError):
    pass


class CycleDetected(IscmError, ValueError):
    pass


class NotAForest(IscmError, ValueError):
    pass


class TooLarge(IscmError, ValueError):
    pass


class DimensionMismatch(IscmError, ValueError):
    pass


class ZeroVariance(IscmError, ValueError):
    """A column or latent variable has zero variance and cannot be standardized."""


class DegenerateCalibration(IscmError, ValueError):
    pass


class PopulationUnavailable(IscmError, ValueError):
    """Closed-form moments were requested for a mechanism that has none."""


class MissingStandardizationStats(IscmError, ValueError):
    pass


class RootVarianceMismatch(IscmError, ValueError):
    pass


class NonPositiveTarget(IscmError, ValueError):
    pass


class NoPaths(IscmError, ValueError):
    pass


class SingularCovariance(IscmError, ValueError):
    pass


class NonFiniteInput(IscmError, ValueError):
    pass


class InconsistentCovariance(IscmError, ValueError):
    pass


class NotInMec(IscmError, ValueError):
    pass
