"""Exception types shared across modules."""


class SpinConvError(Exception):
    """Base class for domain errors raised by this package."""


class DegreeOutOfRangeError(SpinConvError, ValueError):
    pass


class IndexOutOfRangeError(SpinConvError, ValueError):
    pass


class BandwidthMismatchError(SpinConvError, ValueError):
    pass


class SpinSetError(SpinConvError, ValueError):
    """Empty spin intersection, unknown spin, or a spin outside the bandwidth."""


class ShapeMismatchError(SpinConvError, ValueError):
    """Weights or inputs whose shapes disagree with the layer/network spec."""


class StateError(SpinConvError, RuntimeError):
    """Operation needs state (e.g. batch-norm statistics) that is not initialised."""


class FormatError(SpinConvError, ValueError):
    """Malformed IDX file, manifest, or blob."""
