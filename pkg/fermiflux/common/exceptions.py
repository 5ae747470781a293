"""
error types raised by fermiflux

Every error carries the process exit code the command line front end reports
for it: 1 for configuration problems, 2 when a model assumption fails and 3 when
a numerical procedure cannot deliver the requested accuracy.
"""


class FermiFluxError(Exception):
    exit_code = 3


class ConfigError(FermiFluxError):
    exit_code = 1


class AssumptionError(FermiFluxError):
    # a hypothesis of the model is violated by the input
    exit_code = 2


class NumericalError(FermiFluxError):
    exit_code = 3


class NotHermitian(AssumptionError):
    pass


class NotUnitary(AssumptionError):
    pass


class SpectrumOutOfRange(AssumptionError):
    pass


class SpectralRadiusTooLarge(AssumptionError):
    pass


class ObservableNotBlockDiagonal(AssumptionError):
    pass


class InvalidReservoir(AssumptionError):
    pass


class KalmanFailed(AssumptionError):
    pass


class NotSimple(AssumptionError):
    pass


class NotRankOne(AssumptionError):
    pass


class SingularResolvent(NumericalError):
    pass


class TruncationExceeded(NumericalError):
    pass


class UnresolvedSplitting(NumericalError):
    pass
