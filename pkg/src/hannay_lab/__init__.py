"""Slowly driven oscillators: Hannay angle, adiabatic invariant and the
canonical links between the generalized, damped and pendulum oscillators."""

__version__ = "0.1.0"

from .errors import *  # noqa: F401,F403
from .schedules import (  # noqa: F401
    ConstantSchedule,
    GhoParams,
    Harmonic,
    LinearRamp,
    LoopSpec,
    ParamSchedule,
    SlownessSpec,
    SplineSchedule,
    TrigLoop,
    eval_schedule,
    gho_frequency,
)
from .dynamics import (  # noqa: F401
    DhoParams,
    PendulumParams,
    PhaseSpaceState,
    Trajectory,
    gho_rhs,
    integrate,
)
from .phases import PhaseDecomposition, decompose, geometric_phase_line, geometric_phase_surface  # noqa: F401
