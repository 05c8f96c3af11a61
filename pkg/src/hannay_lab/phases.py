"""Amplitude/phase extraction, dynamical and geometric phases, adiabatic invariant.

Phase convention (single source of truth): with ``w = (gamma P + beta Q)/omega``
the state is ``Q = r cos(theta)``, ``w = -r sin(theta)``, so
``theta = atan2(-w, Q)`` and ``theta`` advances at ``+omega`` for constant
parameters.

Geometric phase, line form, real-time integrand::

    beta * gamma_dot / (2 omega gamma) - beta_dot / (2 omega)

Its exterior derivative on (alpha, beta, gamma) space is::

    (gamma da^db + alpha db^dg - beta da^dg) / (4 omega^3)

which is what the surface quadrature integrates over the cone spanning a
closed loop.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np
from scipy.integrate import IntegrationWarning, cumulative_simpson, quad

from .dynamics import PendulumParams, Trajectory, gho_flow, integrate
from .errors import NonOscillatoryOnSurface, UndersampledTrajectory, ZeroAmplitude
from .schedules import GhoParams, LoopSpec, ParamSchedule, gho_frequency

QUAD_TOL = 1e-12
SURFACE_TOL = 1e-8
# Gaussian ripple filter: sigma in local oscillation periods, truncated at this many sigma
FILTER_PERIODS = 3.0
FILTER_TRUNCATION = 9.0


@dataclass(frozen=True)
class PhaseState:
    r: float
    theta: float
    t: float = 0.0


@dataclass
class AdiabaticReport:
    t: np.ndarray
    invariant: np.ndarray
    energy: np.ndarray
    omega: np.ndarray
    drift: float
    drift_max: float

    def digest(self) -> dict:
        return {
            "invariant_start": float(self.invariant[0]),
            "invariant_end": float(self.invariant[-1]),
            "invariant_drift": self.drift,
            "invariant_drift_max": self.drift_max,
            "energy_ratio": float(self.energy[-1] / self.energy[0]),
            "omega_min": float(self.omega.min()),
            "omega_max": float(self.omega.max()),
        }


@dataclass
class PhaseDecomposition:
    theta_total: float
    theta_d: float
    theta_g_line: float
    theta_g_surface: float | None
    residual: float
    invariant_drift: float
    # unfiltered diagnostics; not part of the serialised record
    theta_total_raw: float = math.nan
    invariant_drift_max: float = math.nan

    JSON_KEYS = ("theta_total", "theta_d", "theta_g_line", "theta_g_surface", "residual", "invariant_drift")

    def to_dict(self) -> dict:
        d = asdict(self)
        return {k: d[k] for k in self.JSON_KEYS}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=False)


# ---------------------------------------------------------------------------
# pointwise extraction
# ---------------------------------------------------------------------------


def amplitude_phase(Q, P, p: GhoParams):
    """Vectorised (r, theta) with theta wrapped to (-pi, pi]."""
    w_freq = gho_frequency(p)
    w = (p.gamma * P + p.beta * Q) / w_freq
    return np.hypot(Q, w), np.arctan2(-w, Q)


def extract_phase(state, p: GhoParams) -> PhaseState:
    Q, P = (state.Q, state.P) if hasattr(state, "Q") else state
    r, theta = amplitude_phase(Q, P, p)
    if r < 1e-300:
        raise ZeroAmplitude("phase undefined at the origin")
    return PhaseState(float(r), float(theta), float(getattr(state, "t", 0.0)))


def adiabatic_invariant(ps: PhaseState | float, p: GhoParams):
    """I = omega r^2 / (2 gamma); ``ps`` may be a PhaseState or an amplitude."""
    r = ps.r if isinstance(ps, PhaseState) else ps
    return gho_frequency(p) * r * r / (2.0 * p.gamma)


def unwrap_phases(theta, t=None, omega=None) -> np.ndarray:
    """Unwrap so consecutive differences lie in (-pi, pi].

    With ``t`` and ``omega`` given, refuse series whose expected advance
    between samples reaches pi, where unwrapping becomes ambiguous.
    """
    if isinstance(theta, Sequence) and theta and isinstance(theta[0], PhaseState):
        t = np.array([s.t for s in theta]) if t is None else t
        theta = np.array([s.theta for s in theta])
    theta = np.asarray(theta, dtype=float)
    if theta.size < 2:
        return theta.copy()
    if t is not None and omega is not None:
        t = np.asarray(t, dtype=float)
        om = np.broadcast_to(np.asarray(omega, dtype=float), t.shape)
        advance = np.maximum(om[1:], om[:-1]) * np.diff(t)
        if np.any(advance >= math.pi):
            i = int(np.argmax(advance))
            raise UndersampledTrajectory(
                f"expected phase advance {advance[i]:.3f} >= pi between t={t[i]:.6g} and t={t[i + 1]:.6g}"
            )
    step = np.diff(theta)
    step = step - 2 * math.pi * np.ceil((step - math.pi) / (2 * math.pi))
    return theta[0] + np.concatenate(([0.0], np.cumsum(step)))


def total_phase(series: Sequence[PhaseState]) -> float:
    if len(series) < 2:
        return 0.0
    un = unwrap_phases(list(series))
    return float(un[-1] - un[0])


# ---------------------------------------------------------------------------
# phase integrals along the schedule
# ---------------------------------------------------------------------------


def _breakpoints(schedule: ParamSchedule, tau0: float, tau1: float) -> list[float]:
    pts = [tau0]
    if schedule.period is not None:
        k = math.floor(tau0 / schedule.period) + 1
        while k * schedule.period < tau1:
            pts.append(k * schedule.period)
            k += 1
    elif getattr(schedule, "tau", None) is not None:
        pts.extend(float(x) for x in schedule.tau if tau0 < x < tau1)
    pts.append(tau1)
    return pts


def _tau_quad(fn, schedule: ParamSchedule, tau0: float, tau1: float, abs_tol: float) -> float:
    sign = 1.0
    if tau1 < tau0:
        tau0, tau1, sign = tau1, tau0, -1.0
    pts = _breakpoints(schedule, tau0, tau1)
    per_piece = abs_tol / max(len(pts) - 1, 1)
    total = 0.0
    with warnings.catch_warnings():
        # roundoff warnings fire once the estimate is already at machine level
        warnings.simplefilter("ignore", IntegrationWarning)
        for a, b in zip(pts[:-1], pts[1:]):
            val, _ = quad(fn, a, b, epsabs=per_piece, epsrel=1e-14, limit=500)
            total += val
    return sign * total


def _omega_tau(schedule: ParamSchedule):
    def f(tau):
        (a, b, g), _ = schedule.tau_params(tau)
        return math.sqrt(a * g - b * b)

    return f


def geometric_integrand_tau(schedule: ParamSchedule):
    """Slow-time integrand beta gamma'/(2 omega gamma) - beta'/(2 omega)."""

    def f(tau):
        (a, b, g), (_, db, dg) = schedule.tau_params(tau)
        w = math.sqrt(a * g - b * b)
        return b * dg / (2.0 * w * g) - db / (2.0 * w)

    return f


def dynamical_phase(schedule: ParamSchedule, t0: float, t1: float) -> float:
    """Integral of omega dt, computed in slow time to 1e-12 absolute."""
    schedule.check_window([t0, t1])
    eps = schedule.epsilon
    return _tau_quad(_omega_tau(schedule), schedule, eps * t0, eps * t1, QUAD_TOL * eps) / eps


def geometric_phase_line(schedule: ParamSchedule, t0: float, t1: float) -> float:
    schedule.check_window([t0, t1])
    eps = schedule.epsilon
    return _tau_quad(geometric_integrand_tau(schedule), schedule, eps * t0, eps * t1, QUAD_TOL)


def curvature_density(x, x_s, x_u):
    """Pull-back of the geometric 2-form to the (s, u) chart."""
    a, b, g = x
    disc = a * g - b * b
    if np.any(~(disc > 0.0)):
        raise NonOscillatoryOnSurface(f"surface leaves the oscillatory region (min {disc.min():.3g})")
    w3 = disc * np.sqrt(disc)

    def wedge(i, j):
        return x_s[i] * x_u[j] - x_u[i] * x_s[j]

    return (g * wedge(0, 1) + a * wedge(1, 2) - b * wedge(0, 2)) / (4.0 * w3)


def _midpoint_surface(loop: LoopSpec, n_s: int, n_u: int) -> float:
    s = (np.arange(n_s) + 0.5) / n_s
    u = (np.arange(n_u) + 0.5) / n_u
    dens = curvature_density(*loop.surface(s, u))
    return float(dens.sum() / (n_s * n_u))


def geometric_phase_surface(loop: LoopSpec, tol: float = SURFACE_TOL, max_levels: int = 4) -> float:
    """Midpoint rule on the cone mesh plus Richardson refinement.

    Doubles the mesh until two successive extrapolated values agree to
    ``tol`` (at most ``max_levels`` doublings).
    """
    n_s, n_u = loop.grid
    coarse = _midpoint_surface(loop, n_s, n_u)
    prev = None
    for _ in range(max_levels):
        n_s, n_u = 2 * n_s, 2 * n_u
        fine = _midpoint_surface(loop, n_s, n_u)
        extrap = (4.0 * fine - coarse) / 3.0
        if prev is not None and abs(extrap - prev) < tol:
            return extrap
        if abs(extrap - fine) < tol / 10:
            return extrap
        prev, coarse = extrap, fine
    return prev


# ---------------------------------------------------------------------------
# trajectory analysis
# ---------------------------------------------------------------------------


def _window_weights(t, center, sigma):
    half = FILTER_TRUNCATION * sigma
    m = np.abs(t - center) <= half
    return m, np.exp(-0.5 * ((t[m] - center) / sigma) ** 2)


def _filtered_offset(t, values, center, sigma):
    """Gaussian-window average of ``values``, clipped to the sampled range."""
    m, w = _window_weights(t, center, sigma)
    return float(np.trapezoid(w * values[m], t[m]) / np.trapezoid(w, t[m]))


def _filtered_phase(t, theta, rate, t_e, sigma):
    """Endpoint phase with the fast ripple removed.

    Subtracts the first-order model trend (``rate``) around ``t_e`` and
    averages what is left, so only the 2*omega ripple is smoothed away.
    """
    m, _ = _window_weights(t, t_e, sigma)
    tt, th, rr = t[m], theta[m], rate[m]
    model = cumulative_simpson(rr, x=tt, initial=0.0)
    k = int(np.argmin(np.abs(tt - t_e)))
    rho = (th - th[k]) - (model - model[k])
    offset = _filtered_offset(tt, rho, t_e, sigma)
    return float(th[k] + offset), tt[k]


def adiabatic_report(trajectory: Trajectory, schedule: ParamSchedule, window=None) -> AdiabaticReport:
    t0, t1 = window or (trajectory.t[0], trajectory.t[-1])
    Q, P = trajectory.y[:, 0], trajectory.y[:, 1]
    p, _ = schedule.evaluate(trajectory.t)
    om = gho_frequency(p)
    r, _ = amplitude_phase(Q, P, p)
    inv = om * r * r / (2.0 * p.gamma)
    energy = gho_energy_arrays(Q, P, p)
    drift, drift_max = _invariant_drifts(trajectory.t, inv, om, t0, t1)
    m = (trajectory.t >= t0 - 1e-9) & (trajectory.t <= t1 + 1e-9)
    return AdiabaticReport(trajectory.t[m], inv[m], energy[m], om[m], drift, drift_max)


def gho_energy_arrays(Q, P, p: GhoParams):
    return 0.5 * (p.alpha * Q * Q + 2.0 * p.beta * Q * P + p.gamma * P * P)


def _invariant_drifts(t, inv, om, t0, t1):
    m = (t >= t0 - 1e-9) & (t <= t1 + 1e-9)
    i0 = inv[m][0]
    drift_max = float(np.max(np.abs(inv[m] - i0)) / i0)
    k0, k1 = _sample_index(t, t0), _sample_index(t, t1)
    a = _filtered_offset(t, inv, t[k0], FILTER_PERIODS * 2 * math.pi / om[k0])
    b = _filtered_offset(t, inv, t[k1], FILTER_PERIODS * 2 * math.pi / om[k1])
    return float(abs(b - a) / a), drift_max


def decompose(trajectory: Trajectory, schedule: ParamSchedule, window=None) -> PhaseDecomposition:
    """Split the phase accumulated over ``window`` into dynamical and geometric parts.

    ``window`` defaults to the whole trajectory.  Endpoint phases and
    invariants are Gaussian-filtered over a few local periods; padding the
    trajectory beyond the window on both sides keeps that filter centred.
    """
    t = trajectory.t
    t0, t1 = window or (t[0], t[-1])
    Q, P = trajectory.y[:, 0], trajectory.y[:, 1]
    p, rates = schedule.evaluate(t)
    om = gho_frequency(p)
    r, theta = amplitude_phase(Q, P, p)
    if np.any(r < 1e-300):
        raise ZeroAmplitude("trajectory passes through the origin")
    theta = unwrap_phases(theta, t, om)

    k0, k1 = _sample_index(t, t0), _sample_index(t, t1)
    if len(t) < 2 or k0 == k1:
        theta_total = theta_raw = 0.0
    else:
        if schedule.epsilon * 2 * math.pi / schedule.omega_min >= 1.0:
            raise ValueError("epsilon * 2 pi / omega_min >= 1: too fast for phase extraction")
        rate = om + (p.beta * rates.gamma / p.gamma - rates.beta) / (2.0 * om)
        th0, _ = _filtered_phase(t, theta, rate, t[k0], FILTER_PERIODS * 2 * math.pi / om[k0])
        th1, _ = _filtered_phase(t, theta, rate, t[k1], FILTER_PERIODS * 2 * math.pi / om[k1])
        theta_total = th1 - th0
        theta_raw = float(theta[k1] - theta[k0])
    ta, tb = t[k0], t[k1]
    theta_d = dynamical_phase(schedule, ta, tb)
    theta_g = geometric_phase_line(schedule, ta, tb)
    surface = None
    loops = _loop_count(schedule, ta, tb)
    if loops:
        surface = loops * geometric_phase_surface(LoopSpec(schedule, tau0=schedule.epsilon * ta))
    inv = om * r * r / (2.0 * p.gamma)
    drift, drift_max = _invariant_drifts(t, inv, om, ta, tb)
    return PhaseDecomposition(
        theta_total=float(theta_total),
        theta_d=theta_d,
        theta_g_line=theta_g,
        theta_g_surface=surface,
        residual=float(theta_total - theta_d - theta_g),
        invariant_drift=drift,
        theta_total_raw=theta_raw,
        invariant_drift_max=drift_max,
    )


def filter_padding(omega_min: float) -> float:
    """Time needed beyond each window end for the endpoint filters (plus one period)."""
    return (FILTER_TRUNCATION * FILTER_PERIODS + 1.0) * 2 * math.pi / omega_min


def integrate_window(
    schedule: ParamSchedule,
    y0,
    window,
    tol: float = 1e-12,
    samples_per_period: int = 20,
    pad: float | None = None,
) -> Trajectory:
    """GHO trajectory through ``y0`` at ``window[0]``, run both ways.

    Samples sit on one uniform lattice through both window ends, extended
    by ``pad`` (default: ``filter_padding``) on each side as far as the
    schedule's time span allows.
    """
    t0, t1 = map(float, window)
    lo_s, hi_s = schedule.slowness.t_span
    if pad is None:
        pad = filter_padding(schedule.omega_min)
    lo, hi = max(lo_s, t0 - pad), min(hi_s, t1 + pad)
    h0 = 2 * math.pi / (schedule.omega_max * samples_per_period)
    n = max(int(math.ceil((t1 - t0) / h0)), 1)
    h = (t1 - t0) / n if t1 > t0 else h0
    k_lo = int(math.floor((lo - t0) / h * (1 - 1e-12)))
    k_hi = int(math.ceil((hi - t0) / h * (1 - 1e-12)))
    k = np.arange(k_lo, k_hi + 1)
    lattice = t0 + h * k
    lattice[k == 0] = t0
    lattice[k == n] = t1  # exact window ends
    lattice = lattice[(lattice > lo) & (lattice < hi)]
    grid = np.unique(np.concatenate([[lo, t0, t1, hi], lattice]))
    rhs = gho_flow(schedule)
    kw = dict(columns=["Q", "P"], model="gho", schedule_id=schedule.family)
    fwd = integrate(rhs, y0, (t0, hi), tol, t_eval=grid[grid >= t0], **kw)
    if lo < t0:
        back = integrate(rhs, y0, (t0, lo), tol, t_eval=grid[grid <= t0][::-1], **kw)
        t = np.concatenate([back.t[:-1], fwd.t])
        y = np.vstack([back.y[:-1], fwd.y])
        meta = dict(fwd.metadata)
        for key in ("accepted_steps", "rejected_steps", "nfev"):
            meta[key] = fwd.metadata[key] + back.metadata[key]
        return Trajectory(t, y, fwd.columns, meta)
    return fwd


def _sample_index(t, t_e) -> int:
    k = int(np.argmin(np.abs(t - t_e)))
    if abs(t[k] - t_e) > 1e-9 * max(1.0, abs(t_e)):
        raise ValueError(f"window endpoint {t_e!r} is not a sample time of the trajectory")
    return k


def _loop_count(schedule: ParamSchedule, t0: float, t1: float) -> int:
    if not schedule.is_closed:
        return 0
    n = (t1 - t0) * schedule.epsilon / schedule.period
    k = round(n)
    return k if k >= 1 and abs(n - k) < 1e-9 else 0


# ---------------------------------------------------------------------------
# pendulum
# ---------------------------------------------------------------------------


def pendulum_phases(pp: PendulumParams, t0: float, t1: float) -> tuple[float, float]:
    """Dynamical phase int sqrt(g/l) dt and geometric phase
    -int (v mdot/m + vdot) / (2 sqrt(g l)) dt."""
    eps, g = pp.epsilon, pp.g

    def dyn(tau):
        return math.sqrt(g / pp.l.value(tau))

    def geo(tau):
        m, v = pp.m.value(tau), pp.v.value(tau)
        return -(v * pp.m.dtau(tau) / m + pp.v.dtau(tau)) / (2.0 * math.sqrt(g * pp.l.value(tau)))

    tau0, tau1 = eps * t0, eps * t1
    kw = dict(epsrel=1e-14, limit=500)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        theta_d = quad(dyn, tau0, tau1, epsabs=QUAD_TOL * eps, **kw)[0] / eps
        theta_g = quad(geo, tau0, tau1, epsabs=QUAD_TOL, **kw)[0]
    return theta_d, theta_g


def pendulum_effective_frequency(pp: PendulumParams, t):
    """Squared frequency g/l - (v mdot/m + vdot)/l of the averaged Lagrangian."""
    m, mdot, l, _, v, vdot, g = pp.values(t)
    return g / l - (v * mdot / m + vdot) / l


def pendulum_effective_phase(pp: PendulumParams, t0: float, t1: float) -> float:
    """Integral of sqrt(omega_pend^2) dt."""
    eps = pp.epsilon

    def f(tau):
        return math.sqrt(pendulum_effective_frequency(pp, tau / eps))

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        val = quad(f, eps * t0, eps * t1, epsabs=QUAD_TOL * eps, epsrel=1e-14, limit=500)[0]
    return val / eps
