"""Exception hierarchy for the shrinksim package."""


class ShrinkageError(Exception):
    """Base class for all errors raised by shrinksim."""


class InvalidCorrelationError(ShrinkageError, ValueError):
    pass


class RootFindError(ShrinkageError, RuntimeError):
    pass


class SamplingError(ShrinkageError, ValueError):
    pass


class DegeneratePredictorError(ShrinkageError, ValueError):
    pass


class RankDeficiencyError(ShrinkageError, ArithmeticError):
    pass


class ConvergenceError(ShrinkageError, RuntimeError):
    pass


class UndefinedFactorError(ShrinkageError, ArithmeticError):
    """Likelihood-ratio statistic of zero; uniform shrinkage factor undefined."""


class BootstrapFailureError(ShrinkageError, RuntimeError):
    pass


class CvInfeasibleError(ShrinkageError, ValueError):
    pass


class UndefinedMetricError(ShrinkageError, ValueError):
    pass


class ConfigurationError(ShrinkageError, ValueError):
    pass
