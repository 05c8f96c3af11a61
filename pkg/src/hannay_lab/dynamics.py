"""Equations of motion for the five oscillator models and one adaptive integrator.

State vectors are flat numpy arrays:

* GHO and pendulum: ``(Q, P)`` canonical pair.
* damped oscillator (Newtonian form): ``(q, qdot, Lambda)``.
* Caldirola-Kanai Hamiltonian form: ``(q, p, Lambda)``.
* quadratic friction, Hirota: ``(q, qdot)``.

``Lambda(t) = int_{t0}^t lambda(s) ds`` rides along as an extra component so
the damping exponent shares the adaptive step sequence of the oscillator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np
from scipy.integrate import DOP853

from .errors import (
    DegenerateParameter,
    NonFinite,
    SingularConfiguration,
    StepSizeUnderflow,
)
from .schedules import GhoParams, Harmonic, ParamSchedule, SlownessSpec, gho_frequency

HIROTA_GUARD = math.pi / 2 - 1e-9
# scipy refuses relative tolerances below 100 * machine epsilon
_RTOL_FLOOR = 100 * np.finfo(float).eps


@dataclass(frozen=True)
class PhaseSpaceState:
    Q: float
    P: float
    t: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(x) for x in (self.Q, self.P, self.t)):
            raise NonFinite(f"non-finite state {self!r}")

    def as_array(self) -> np.ndarray:
        return np.array([self.Q, self.P])


def _qp(state):
    if isinstance(state, PhaseSpaceState):
        return state.Q, state.P
    return state[0], state[1]


# ---------------------------------------------------------------------------
# generalized harmonic oscillator
# ---------------------------------------------------------------------------


def gho_rhs(state, p: GhoParams) -> np.ndarray:
    """Hamilton's equations: (Qdot, Pdot) = (beta Q + gamma P, -alpha Q - beta P)."""
    Q, P = _qp(state)
    return np.array([p.beta * Q + p.gamma * P, -p.alpha * Q - p.beta * P])


def gho_energy(state, p: GhoParams):
    Q, P = _qp(state)
    return 0.5 * (p.alpha * Q * Q + 2.0 * p.beta * Q * P + p.gamma * P * P)


def gho_closed_form(p: GhoParams, r: float, t) -> PhaseSpaceState:
    """Exact constant-parameter solution with phase omega*t and amplitude r."""
    w = gho_frequency(p)
    th = w * t
    c, s = math.cos(th), math.sin(th)
    return PhaseSpaceState(r * c, -(r / p.gamma) * (p.beta * c + w * s), t)


def gho_flow(params: ParamSchedule | Callable[[float], GhoParams]):
    """Time-dependent right-hand side ``f(t, y)`` for ``integrate``."""
    if isinstance(params, ParamSchedule):
        eps = params.epsilon
        tau_params = params.tau_params

        def rhs(t, y):
            (a, b, g), _ = tau_params(eps * t)
            Q, P = y
            return np.array([b * Q + g * P, -a * Q - b * P])

    else:

        def rhs(t, y):
            p = params(t)
            Q, P = y
            return np.array([p.beta * Q + p.gamma * P, -p.alpha * Q - p.beta * P])

    return rhs


# ---------------------------------------------------------------------------
# pendulum with moving suspension point
# ---------------------------------------------------------------------------


class PendulumValues(NamedTuple):
    m: float
    mdot: float
    l: float
    ldot: float
    v: float
    vdot: float
    g: float


@dataclass(frozen=True)
class PendulumParams:
    """Mass, string length and suspension speed as slow-time harmonics."""

    m: Harmonic
    l: Harmonic
    v: Harmonic
    g: float
    slowness: SlownessSpec

    def __post_init__(self):
        for name in ("m", "l", "v"):
            object.__setattr__(self, name, Harmonic.coerce(getattr(self, name)))
        if not self.g > 0:
            raise ValueError("g must be positive")
        t0, t1 = self.slowness.t_span
        tau = self.slowness.epsilon * np.linspace(t0, t1, 1000)
        if np.any(self.m.value(tau) <= 0) or np.any(self.l.value(tau) <= 0):
            raise ValueError("pendulum mass and length must stay positive")

    @property
    def epsilon(self) -> float:
        return self.slowness.epsilon

    def values(self, t) -> PendulumValues:
        eps = self.slowness.epsilon
        tau = eps * t
        return PendulumValues(
            self.m.value(tau),
            eps * self.m.dtau(tau),
            self.l.value(tau),
            eps * self.l.dtau(tau),
            self.v.value(tau),
            eps * self.v.dtau(tau),
            self.g,
        )

    def to_gho(self, t) -> GhoParams:
        """alpha = m(g l + v^2 + v ldot), beta = v / l, gamma = 1 / (m l^2)."""
        m, _, l, ldot, v, _, g = self.values(t)
        return GhoParams(m * (g * l + v * v + v * ldot), v / l, 1.0 / (m * l * l))

    def omega_max(self, t_span=None) -> float:
        t0, t1 = t_span or self.slowness.t_span
        ts = np.linspace(t0, t1, 1000)
        return float(np.max(gho_frequency(self.to_gho(ts))))


def pendulum_rhs(state, pp: PendulumParams, t) -> np.ndarray:
    """Hamilton flow of the linearised moving-suspension pendulum, state (phi, p)."""
    phi, p = _qp(state)
    m, _, l, ldot, v, _, g = pp.values(t)
    return np.array(
        [
            p / (m * l * l) + (v / l) * phi,
            -(v / l) * p - m * l * (g + v * v / l + v * ldot / l) * phi,
        ]
    )


def pendulum_flow(pp: PendulumParams):
    return lambda t, y: pendulum_rhs(y, pp, t)


# ---------------------------------------------------------------------------
# damped oscillator, Newtonian and Caldirola-Kanai forms
# ---------------------------------------------------------------------------


class DhoValues(NamedTuple):
    M: float
    Mdot: float
    lam: float
    Omega2: float


@dataclass(frozen=True)
class DhoParams:
    """Mass M(tau), damping rate lambda(tau) and natural frequency Omega(tau).

    Lambda(t0) = 0 by convention; the integrated value travels with the state.
    """

    M: Harmonic
    lam: Harmonic
    Omega: Harmonic
    slowness: SlownessSpec

    def __post_init__(self):
        for name in ("M", "lam", "Omega"):
            object.__setattr__(self, name, Harmonic.coerce(getattr(self, name)))
        t0, t1 = self.slowness.t_span
        tau = self.slowness.epsilon * np.linspace(t0, t1, 1000)
        if np.any(self.M.value(tau) <= 0):
            raise ValueError("mass M must stay positive")

    @property
    def epsilon(self) -> float:
        return self.slowness.epsilon

    def values(self, t) -> DhoValues:
        eps = self.slowness.epsilon
        tau = eps * t
        om = self.Omega.value(tau)
        return DhoValues(self.M.value(tau), eps * self.M.dtau(tau), self.lam.value(tau), om * om)


def dho_rhs(state, dp, t) -> np.ndarray:
    """q'' = -(Mdot/M) q' - 2 lambda q' - Omega^2 q.

    ``state`` is (q, qdot) or (q, qdot, Lambda); with three components the
    derivative of Lambda (= lambda) is appended.
    """
    M, Mdot, lam, om2 = dp.values(t)
    q, qd = state[0], state[1]
    acc = -(Mdot / M) * qd - 2.0 * lam * qd - om2 * q
    if len(state) == 3:
        return np.array([qd, acc, lam])
    return np.array([qd, acc])


def dho_flow(dp):
    return lambda t, y: dho_rhs(y, dp, t)


def ck_hamiltonian(state, dp, t) -> float:
    """H = p^2 e^{-2 Lambda} / (2M) + M Omega^2 q^2 e^{2 Lambda} / 2, state (q, p, Lambda)."""
    q, p, lam_int = state
    M, _, _, om2 = dp.values(t)
    e2 = math.exp(2.0 * lam_int)
    return p * p / (2.0 * M * e2) + 0.5 * M * om2 * q * q * e2


def ck_rhs(state, dp, t) -> np.ndarray:
    q, p, lam_int = state
    M, _, lam, om2 = dp.values(t)
    e2 = math.exp(2.0 * lam_int)
    return np.array([p / (M * e2), -M * om2 * q * e2, lam])


def ck_flow(dp):
    return lambda t, y: ck_rhs(y, dp, t)


# ---------------------------------------------------------------------------
# oscillators with velocity-dependent "friction"
# ---------------------------------------------------------------------------


def quadratic_friction_rhs(state, b: float, omega0: float) -> np.ndarray:
    if b == 0:
        raise DegenerateParameter("b = 0: the quadratic-friction Lagrangian has 1/b poles")
    q, qd = state[0], state[1]
    return np.array([qd, -b * qd * qd - omega0 * omega0 * q])


def quadratic_friction_energy(state, b: float, omega0: float, m: float = 1.0) -> float:
    """Legendre-transform energy of the exp(2bq) Lagrangian."""
    if b == 0:
        raise DegenerateParameter("b = 0")
    q, qd = state[0], state[1]
    w2 = omega0 * omega0
    return 0.5 * m * ((qd * qd + (w2 / b) * q - w2 / (2 * b * b)) * math.exp(2 * b * q) + w2 / (2 * b * b))


def hirota_rhs(state) -> np.ndarray:
    phi, phid = state[0], state[1]
    if not abs(phi) < HIROTA_GUARD:
        raise SingularConfiguration(f"|phi| = {abs(phi)!r} reached the tan singularity")
    return np.array([phid, -(1.0 + phid * phid) * math.tan(phi)])


def hirota_invariant(state) -> float:
    """(1 + phidot^2) / cos(phi)^2, conserved along Hirota flow."""
    phi, phid = state[0], state[1]
    return (1.0 + phid * phid) / math.cos(phi) ** 2


# ---------------------------------------------------------------------------
# integrator
# ---------------------------------------------------------------------------


@dataclass
class Trajectory:
    t: np.ndarray
    y: np.ndarray
    columns: tuple[str, ...]
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.t.ndim != 1 or self.y.shape[0] != self.t.size:
            raise ValueError("t and y have inconsistent shapes")
        if self.t.size > 1 and np.any(np.diff(self.t) <= 0):
            raise ValueError("trajectory times must be strictly increasing")

    def __len__(self):
        return self.t.size

    def __getitem__(self, name: str) -> np.ndarray:
        return self.y[:, self.columns.index(name)]

    def window(self, t0: float, t1: float) -> "Trajectory":
        slack = 1e-9 * max(1.0, abs(t0), abs(t1))
        m = (self.t >= t0 - slack) & (self.t <= t1 + slack)
        return Trajectory(self.t[m], self.y[m], self.columns, dict(self.metadata))

    def states(self):
        for t, row in zip(self.t, self.y):
            yield PhaseSpaceState(float(row[0]), float(row[1]), float(t))

    def to_csv(self, path) -> None:
        """Write ``t,<columns>`` with shortest round-trip float formatting."""
        with open(path, "w", newline="\n") as fh:
            fh.write(",".join(("t",) + self.columns) + "\n")
            for t, row in zip(self.t, self.y):
                fh.write(",".join(repr(float(x)) for x in (t, *row)) + "\n")


def sample_grid(t_span, omega_max: float, samples_per_period: int = 20, breakpoints=()) -> np.ndarray:
    """Grid with at least ``samples_per_period`` points per 2*pi/omega_max;
    every breakpoint inside ``t_span`` is a grid point.

    Pieces between breakpoints are uniform.  The two outer pieces reuse the
    step of their inner neighbour, anchored at the breakpoint, so the spacing
    is exactly constant across the first and last breakpoints (only the
    final step at either end of the span may be short).  Window filters
    centred on a breakpoint rely on this.
    """
    t0, t1 = t_span
    lo, hi = min(t0, t1), max(t0, t1)
    h0 = 2 * math.pi / (omega_max * samples_per_period)
    bps = sorted({float(b) for b in breakpoints if lo < b < hi})
    if not bps:
        n = max(int(math.ceil((hi - lo) / h0)), 1)
        grid = np.linspace(lo, hi, n + 1)
        return grid if t1 >= t0 else grid[::-1]
    inner = []
    steps = []
    for a, b in zip(bps[:-1], bps[1:]):
        n = max(int(math.ceil((b - a) / h0)), 1)
        inner.append(np.linspace(a, b, n + 1)[:-1])
        steps.append((b - a) / n)
    h_left = steps[0] if steps else h0
    h_right = steps[-1] if steps else h0
    k = int(math.floor((bps[0] - lo) / h_left * (1 + 1e-12)))
    left = bps[0] - h_left * np.arange(k, 0, -1)
    left = left[left > lo + 1e-9 * h_left]
    k = int(math.floor((hi - bps[-1]) / h_right * (1 + 1e-12)))
    right = bps[-1] + h_right * np.arange(0, k + 1)
    right = right[right < hi - 1e-9 * h_right]
    grid = np.concatenate([[lo], left, *inner, right, [hi]])
    return grid if t1 >= t0 else grid[::-1]


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    y0: Sequence[float],
    t_span: tuple[float, float],
    tol: float = 1e-12,
    *,
    omega_max: float = 1.0,
    samples_per_period: int = 20,
    breakpoints: Sequence[float] = (),
    t_eval: np.ndarray | None = None,
    columns: Sequence[str] | None = None,
    model: str = "",
    schedule_id: str = "",
    atol: float | None = None,
) -> Trajectory:
    """Adaptive 8(5,3) Dormand-Prince integration with dense output.

    Integration may run backwards (``t_span[1] < t_span[0]``); the returned
    samples are always in increasing time.  Output is sampled on a uniform
    grid dense enough for ``samples_per_period`` points per period of the
    fastest oscillation ``2*pi/omega_max`` unless ``t_eval`` is given;
    ``breakpoints`` are forced onto the grid.  ``atol`` defaults to ``tol``;
    lower it for components that decay by many orders of magnitude.
    """
    if not 1e-14 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-14, 1e-6], got {tol!r}")
    t0, t1 = map(float, t_span)
    y0 = np.asarray(y0, dtype=float)
    if not np.all(np.isfinite(y0)):
        raise NonFinite(f"non-finite initial state {y0!r}")
    if t_eval is None:
        grid = sample_grid((t0, t1), omega_max, samples_per_period, breakpoints)
    else:
        grid = np.asarray(t_eval, dtype=float)
    columns = tuple(columns) if columns else tuple(f"y{i}" for i in range(y0.size))
    nfev = 0

    def fun(t, y):
        nonlocal nfev
        nfev += 1
        dy = np.asarray(rhs(t, y), dtype=float)
        if not math.isfinite(dy.sum()):  # any nan/inf poisons the sum
            raise NonFinite(f"non-finite derivative at t = {t!r}")
        return dy

    out = np.empty((grid.size, y0.size))
    out[0] = y0
    if grid.size == 1 or t1 == t0:
        return Trajectory(grid[:1], out[:1], columns, {"model": model})

    solver = DOP853(fun, t0, y0, t1, rtol=max(tol, _RTOL_FLOOR), atol=tol if atol is None else atol)
    forward = t1 > t0
    idx = 1
    accepted = 0
    step_fevals = 0
    while solver.status == "running":
        before = nfev
        msg = solver.step()
        step_fevals += nfev - before
        if solver.status == "failed":
            if msg and "step size" in msg:
                raise StepSizeUnderflow(f"{msg} (t = {solver.t!r})")
            raise RuntimeError(msg)
        accepted += 1
        if not np.all(np.isfinite(solver.y)):
            raise NonFinite(f"non-finite state at t = {solver.t!r}")
        t_hi = solver.t
        j = idx
        if forward:
            while j < grid.size and grid[j] <= t_hi:
                j += 1
        else:
            while j < grid.size and grid[j] >= t_hi:
                j += 1
        if j > idx:
            dense = solver.dense_output()
            out[idx:j] = dense(grid[idx:j]).T
            idx = j
    out[-1] = solver.y
    attempts = step_fevals // DOP853.n_stages
    meta = {
        "model": model,
        "schedule_id": schedule_id,
        "tol": tol,
        "accepted_steps": accepted,
        "rejected_steps": max(attempts - accepted, 0),
        "nfev": nfev,
    }
    if not forward:
        grid, out = grid[::-1], out[::-1]
    return Trajectory(np.array(grid), out, columns, meta)


class PendulumSchedule(ParamSchedule):
    """The pendulum read as a GHO path through the parameter map

    alpha = m(g l + v^2 + v ldot), beta = v / l, gamma = 1 / (m l^2).

    alpha carries ldot = epsilon * dl/dtau, so unlike the analytic families
    this path depends on epsilon even in slow time.
    """

    family = "pendulum-map"

    def __init__(self, pp: PendulumParams):
        self.pendulum = pp
        super().__init__(pp.slowness)

    @property
    def period(self):
        return 1.0  # harmonics have integer frequency in tau

    def tau_params(self, tau):
        pp = self.pendulum
        eps, g = pp.slowness.epsilon, pp.g
        m, dm = pp.m.value(tau), pp.m.dtau(tau)
        l, dl, ddl = pp.l.value(tau), pp.l.dtau(tau), pp.l.d2tau(tau)
        v, dv = pp.v.value(tau), pp.v.dtau(tau)
        ldot = eps * dl
        alpha = m * (g * l + v * v + v * ldot)
        d_alpha = dm * (g * l + v * v + v * ldot) + m * (g * dl + 2 * v * dv + dv * ldot + v * eps * ddl)
        beta = v / l
        d_beta = dv / l - v * dl / (l * l)
        gamma = 1.0 / (m * l * l)
        d_gamma = -gamma * (dm / m + 2 * dl / l)
        return (alpha, beta, gamma), (d_alpha, d_beta, d_gamma)

    def with_slowness(self, slowness):
        pp = self.pendulum
        return PendulumSchedule(PendulumParams(pp.m, pp.l, pp.v, pp.g, slowness))

    def to_dict(self):
        raise TypeError("pendulum-map schedules are derived, not serialised")
