"""Slowly varying parameter paths in (alpha, beta, gamma) space.

Every schedule is written in slow time ``tau = epsilon * t``.  Real-time
derivatives are the slow-time derivatives multiplied by ``epsilon``, so the
same loop run at two different rates differs only by that factor.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any, NamedTuple, Sequence

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import NonOscillatory, OutOfWindow

TWO_PI = 2.0 * math.pi
MIN_VALIDATION_POINTS = 1000
_COMPONENTS = ("alpha", "beta", "gamma")


@dataclass(frozen=True)
class SlownessSpec:
    epsilon: float
    t_span: tuple[float, float]

    def __post_init__(self):
        if not (self.epsilon > 0.0 and math.isfinite(self.epsilon)):
            raise ValueError(f"epsilon must be positive, got {self.epsilon}")
        t0, t1 = self.t_span
        if not t1 > t0:
            raise ValueError(f"t_span must be increasing, got {self.t_span}")
        object.__setattr__(self, "t_span", (float(t0), float(t1)))

    @property
    def tau_span(self) -> tuple[float, float]:
        return (self.epsilon * self.t_span[0], self.epsilon * self.t_span[1])


class GhoParams(NamedTuple):
    """Coefficients of H = (alpha Q^2 + 2 beta Q P + gamma P^2) / 2.

    Fields may be floats or equally shaped arrays.
    """

    alpha: Any
    beta: Any
    gamma: Any


class ParamRates(NamedTuple):
    """Real-time derivatives (alpha_dot, beta_dot, gamma_dot)."""

    alpha: Any
    beta: Any
    gamma: Any


def gho_frequency(p: GhoParams):
    """Return omega = sqrt(alpha*gamma - beta**2).

    Works elementwise on arrays; raises NonOscillatory if any entry is not
    strictly inside the oscillatory region.
    """
    disc = np.asarray(p.alpha * p.gamma - p.beta * p.beta)
    if np.any(~(disc > 0.0)):
        raise NonOscillatory(f"alpha*gamma - beta^2 = {np.min(disc)!r} <= 0")
    w = np.sqrt(disc)
    return float(w) if w.ndim == 0 else w


@dataclass(frozen=True)
class Harmonic:
    """mean + cos*cos(2 pi k tau) + sin*sin(2 pi k tau)."""

    mean: float = 0.0
    cos: float = 0.0
    sin: float = 0.0
    harmonic: int = 1

    def value(self, tau):
        ph = TWO_PI * self.harmonic * tau
        if isinstance(ph, float):  # scalar fast path for ODE right-hand sides
            return self.mean + self.cos * math.cos(ph) + self.sin * math.sin(ph)
        return self.mean + self.cos * np.cos(ph) + self.sin * np.sin(ph)

    def dtau(self, tau):
        k = TWO_PI * self.harmonic
        ph = k * tau
        if isinstance(ph, float):
            return k * (self.sin * math.cos(ph) - self.cos * math.sin(ph))
        return k * (self.sin * np.cos(ph) - self.cos * np.sin(ph))

    def d2tau(self, tau):
        k = TWO_PI * self.harmonic
        return -k * k * (self.value(tau) - self.mean)

    @classmethod
    def coerce(cls, spec) -> "Harmonic":
        if isinstance(spec, Harmonic):
            return spec
        if isinstance(spec, (int, float)):
            return cls(mean=float(spec))
        return cls(**spec)

    def to_dict(self) -> dict:
        out = {"mean": self.mean, "cos": self.cos, "sin": self.sin}
        if self.harmonic != 1:
            out["harmonic"] = self.harmonic
        return out


class ParamSchedule:
    """Base class for the four schedule families.

    Subclasses implement ``tau_params(tau) -> (values, d/dtau values)`` as
    3-tuples; everything else (windowing, epsilon scaling, validation) lives
    here.
    """

    family: str = ""

    def __init__(self, slowness: SlownessSpec):
        self.slowness = slowness
        self._validate_path()

    # -- family hooks -------------------------------------------------------
    def tau_params(self, tau):
        raise NotImplementedError

    def _coefficients(self) -> dict:
        raise NotImplementedError

    @property
    def period(self) -> float | None:
        """Slow-time period for exactly periodic families, else None."""
        return None

    # -- shared behaviour ---------------------------------------------------
    @property
    def epsilon(self) -> float:
        return self.slowness.epsilon

    @property
    def t_span(self) -> tuple[float, float]:
        return self.slowness.t_span

    @property
    def is_closed(self) -> bool:
        return self.period is not None

    def _validate_path(self):
        t0, t1 = self.t_span
        n = MIN_VALIDATION_POINTS
        if self.period is not None:
            n = max(n, int(200 * (t1 - t0) * self.epsilon / self.period) + 1)
        tau = self.epsilon * np.linspace(t0, t1, n)
        (a, b, g), _ = self.tau_params(tau)
        a, b, g = np.broadcast_arrays(a, b, g)
        if np.any(g <= 0.0):
            raise NonOscillatory(f"{self.family}: gamma must stay positive")
        disc = a * g - b * b
        if np.any(disc <= 0.0):
            i = int(np.argmin(disc))
            raise NonOscillatory(
                f"{self.family}: alpha*gamma - beta^2 = {disc[i]:.3g} at t = {tau[i] / self.epsilon:.6g}"
            )
        w = np.sqrt(disc)
        self.omega_min = float(w.min())
        self.omega_max = float(w.max())

    def check_window(self, t):
        t0, t1 = self.t_span
        slack = 1e-9 * max(1.0, abs(t0), abs(t1))
        tt = np.asarray(t)
        if np.any(tt < t0 - slack) or np.any(tt > t1 + slack):
            raise OutOfWindow(f"t = {t!r} outside t_span {self.t_span}")

    def evaluate(self, t, check: bool = True) -> tuple[GhoParams, ParamRates]:
        """Parameters and real-time derivatives at time(s) ``t``."""
        if check:
            self.check_window(t)
        eps = self.epsilon
        (a, b, g), (da, db, dg) = self.tau_params(eps * np.asarray(t, dtype=float))
        p = GhoParams(*_shape_like(t, a, b, g))
        r = ParamRates(*_shape_like(t, eps * da, eps * db, eps * dg))
        if check and not np.all(np.asarray(p.alpha * p.gamma - p.beta * p.beta) > 0.0):
            raise NonOscillatory(f"alpha*gamma <= beta^2 at t = {t!r}")
        return p, r

    def params(self, t) -> GhoParams:
        return self.evaluate(t, check=False)[0]

    def omega(self, t):
        return gho_frequency(self.params(t))

    def with_slowness(self, slowness: SlownessSpec) -> "ParamSchedule":
        return type(self)(**self._coefficients(), slowness=slowness)

    def to_dict(self) -> dict:
        eps = self.epsilon
        out = {"family": self.family, "epsilon": eps}
        out.update(self._serial_coefficients())
        out["tau_span"] = list(self.slowness.tau_span)
        return out

    def _serial_coefficients(self) -> dict:
        return self._coefficients()

    def __repr__(self):
        return f"{type(self).__name__}(eps={self.epsilon:g}, t_span={self.t_span})"


def _shape_like(t, *arrays):
    shape = np.shape(t)
    out = []
    for x in arrays:
        x = np.broadcast_to(np.asarray(x, dtype=float), shape)
        out.append(float(x) if x.ndim == 0 else np.array(x))
    return out


class ConstantSchedule(ParamSchedule):
    family = "constant"

    def __init__(self, alpha: float, beta: float, gamma: float, slowness: SlownessSpec):
        self.values = (float(alpha), float(beta), float(gamma))
        super().__init__(slowness)

    def tau_params(self, tau):
        zero = np.zeros_like(tau, dtype=float)
        a, b, g = self.values
        return (a + zero, b + zero, g + zero), (zero, zero, zero)

    def _coefficients(self):
        return dict(zip(_COMPONENTS, self.values))


class LinearRamp(ParamSchedule):
    """p(tau) = start + slope * tau, componentwise."""

    family = "linear-ramp"

    def __init__(self, start: Sequence[float], slope: Sequence[float], slowness: SlownessSpec):
        self.start = tuple(float(x) for x in start)
        self.slope = tuple(float(x) for x in slope)
        super().__init__(slowness)

    def tau_params(self, tau):
        zero = np.zeros_like(tau, dtype=float)
        vals = tuple(s + k * tau for s, k in zip(self.start, self.slope))
        rates = tuple(k + zero for k in self.slope)
        return vals, rates

    def _coefficients(self):
        return {"start": self.start, "slope": self.slope}

    def _serial_coefficients(self):
        return {
            c: {"start": s, "slope": k} for c, s, k in zip(_COMPONENTS, self.start, self.slope)
        }


class TrigLoop(ParamSchedule):
    """Closed loop, exactly periodic in tau with period 1.

    ``orientation=-1`` traverses the same curve backwards.
    """

    family = "trig-loop"

    def __init__(self, alpha, beta, gamma, slowness: SlownessSpec, orientation: int = 1):
        if orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        self.components = tuple(Harmonic.coerce(c) for c in (alpha, beta, gamma))
        self.orientation = orientation
        super().__init__(slowness)

    @property
    def period(self):
        return 1.0

    def tau_params(self, tau):
        s = self.orientation
        u = s * np.asarray(tau, dtype=float)
        vals = tuple(c.value(u) for c in self.components)
        rates = tuple(s * c.dtau(u) for c in self.components)
        return vals, rates

    def reversed(self) -> "TrigLoop":
        return TrigLoop(*self.components, slowness=self.slowness, orientation=-self.orientation)

    def _coefficients(self):
        out = dict(zip(_COMPONENTS, self.components))
        out["orientation"] = self.orientation
        return out

    def _serial_coefficients(self):
        out = {c: h.to_dict() for c, h in zip(_COMPONENTS, self.components)}
        out["orientation"] = self.orientation
        return out


class SplineSchedule(ParamSchedule):
    """Not-a-knot cubic spline through samples given on a slow-time grid."""

    family = "sampled-spline"

    def __init__(self, tau, alpha, beta, gamma, slowness: SlownessSpec):
        self.tau = np.asarray(tau, dtype=float)
        if self.tau.ndim != 1 or self.tau.size < 4 or np.any(np.diff(self.tau) <= 0):
            raise ValueError("spline knots must be a strictly increasing 1-D grid of >= 4 points")
        self.samples = tuple(np.asarray(x, dtype=float) for x in (alpha, beta, gamma))
        self._splines = tuple(CubicSpline(self.tau, y, bc_type="not-a-knot") for y in self.samples)
        self._derivs = tuple(s.derivative() for s in self._splines)
        super().__init__(slowness)

    def tau_params(self, tau):
        return tuple(s(tau) for s in self._splines), tuple(d(tau) for d in self._derivs)

    def _coefficients(self):
        return dict(tau=self.tau, **dict(zip(_COMPONENTS, self.samples)))

    def _serial_coefficients(self):
        out = {"tau": self.tau.tolist()}
        out.update({c: y.tolist() for c, y in zip(_COMPONENTS, self.samples)})
        return out


FAMILIES = {
    cls.family: cls for cls in (ConstantSchedule, LinearRamp, TrigLoop, SplineSchedule)
}


def eval_schedule(schedule: ParamSchedule, t) -> tuple[GhoParams, ParamRates]:
    return schedule.evaluate(t)


def schedule_from_dict(block: dict, pad: float = 0.0) -> ParamSchedule:
    """Build a schedule from a scenario ``schedule`` block.

    ``tau_span`` fixes the analysis window in slow time; the real-time window
    is widened by ``pad`` on both sides so trajectories can run past it.
    """
    family = block["family"]
    eps = float(block["epsilon"])
    tau0, tau1 = block["tau_span"]
    slowness = SlownessSpec(eps, (tau0 / eps - pad, tau1 / eps + pad))
    if family == "constant":
        return ConstantSchedule(block["alpha"], block["beta"], block["gamma"], slowness)
    if family == "linear-ramp":
        start = [block[c]["start"] for c in _COMPONENTS]
        slope = [block[c]["slope"] for c in _COMPONENTS]
        return LinearRamp(start, slope, slowness)
    if family == "trig-loop":
        return TrigLoop(
            *(block[c] for c in _COMPONENTS),
            slowness=slowness,
            orientation=int(block.get("orientation", 1)),
        )
    if family == "sampled-spline":
        return SplineSchedule(block["tau"], *(block[c] for c in _COMPONENTS), slowness=slowness)
    raise ValueError(f"unknown schedule family {family!r}")


@dataclass
class LoopSpec:
    """A closed schedule plus the cone surface spanning it.

    The surface is ``X(s, u) = c + s * (Gamma(u) - c)`` for s, u in [0, 1],
    with ``c`` the centroid of the loop and ``Gamma(u)`` the schedule at slow
    time ``tau0 + u`` (traversed backwards when ``orientation == -1``).
    With this parameterisation ds^du is positively oriented with respect to
    the boundary traversal.
    """

    schedule: ParamSchedule
    orientation: int = 1
    tau0: float = 0.0
    grid: tuple[int, int] = (200, 200)
    centroid: np.ndarray = field(init=False)

    def __post_init__(self):
        if not self.schedule.is_closed:
            raise ValueError(f"{self.schedule.family} schedule is not a closed loop")
        if self.orientation not in (1, -1):
            raise ValueError("orientation must be +1 or -1")
        u = (np.arange(4096) + 0.5) / 4096
        self.centroid = self.boundary(u)[0].mean(axis=1)

    def reversed(self) -> "LoopSpec":
        return LoopSpec(self.schedule, -self.orientation, self.tau0, self.grid)

    def boundary(self, u):
        """Loop points and d/du tangents, each shaped (3, len(u))."""
        period = self.schedule.period
        u = np.asarray(u, dtype=float)
        if self.orientation == 1:
            tau = self.tau0 + period * u
        else:
            tau = self.tau0 + period * (1.0 - u)
        vals, dvals = self.schedule.tau_params(tau)
        pts = np.array(np.broadcast_arrays(*vals), dtype=float)
        tan = np.array(np.broadcast_arrays(*dvals), dtype=float) * period * self.orientation
        return pts, tan

    def surface(self, s, u):
        """Points X and partials X_s, X_u on the cone, shaped (3, len(s), len(u))."""
        s = np.asarray(s, dtype=float)[:, None]
        pts, tan = self.boundary(u)
        c = self.centroid[:, None, None]
        rel = pts[:, None, :] - c
        x = c + s[None] * rel
        x_s = np.broadcast_to(rel, x.shape)
        x_u = s[None] * tan[:, None, :]
        return x, x_s, x_u
