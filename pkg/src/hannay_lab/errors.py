"""Exception hierarchy shared by every module."""


class HannayLabError(Exception):
    """Base class for all errors raised by hannay_lab."""


class NonOscillatory(HannayLabError, ValueError):
    """alpha*gamma <= beta**2, so the oscillator has no real frequency."""


class NonOscillatoryOnSurface(NonOscillatory):
    pass


class OutOfWindow(HannayLabError, ValueError):
    pass


class ZeroAmplitude(HannayLabError, ValueError):
    pass


class UndersampledTrajectory(HannayLabError, ValueError):
    pass


class DegenerateParameter(HannayLabError, ValueError):
    pass


class SingularConfiguration(HannayLabError, ValueError):
    pass


class StepSizeUnderflow(HannayLabError, RuntimeError):
    pass


class NonFinite(HannayLabError, FloatingPointError):
    pass


class MapOverflow(HannayLabError, OverflowError):
    """exp(Lambda) would overflow a double."""


class DomainViolation(HannayLabError, ValueError):
    pass


class MissingLagrangian(HannayLabError, ValueError):
    pass


class SchemaError(HannayLabError, ValueError):
    """Scenario file failed validation; ``path`` is dotted, e.g. ``schedule.gamma``."""

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path}: {message}" if path else message)
