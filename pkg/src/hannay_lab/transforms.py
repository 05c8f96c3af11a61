"""Canonical equivalences between the oscillator models.

Three charts are connected here:

* pendulum (phi, p)  ->  damped oscillator q = phi * exp(-Lambda)
* Caldirola-Kanai (q, p)  ->  GHO (Q, P) = (q e^Lambda, p e^-Lambda),
  generated by F(q, P, t) = q P exp(Lambda(t))
* GHO (Q, P)  ->  complex amplitude z with zz* = I

Each map comes with a finite-difference canonicity check.  The complex
chart uses z = sqrt(omega / 2 gamma) (Q - i w), w = (gamma P + beta Q)/omega,
so Q = sqrt(gamma/2 omega)(z + z*) and z rotates as exp(+i Theta).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.integrate import quad

from .dynamics import (
    DhoParams,
    DhoValues,
    PendulumParams,
    ck_flow,
    ck_hamiltonian,
    dho_flow,
    gho_energy,
    gho_flow,
    integrate,
    pendulum_flow,
)
from .errors import MapOverflow
from .schedules import GhoParams, ParamRates, ParamSchedule, gho_frequency

LAMBDA_LIMIT = 700.0
SYMPLECTIC_TOL = 1e-8

# symplectic unit J in (coordinate, momentum) order
J2 = np.array([[0.0, 1.0], [-1.0, 0.0]])


# ---------------------------------------------------------------------------
# parameter-level correspondences
# ---------------------------------------------------------------------------


def dho_to_gho_params(dp, t=None) -> GhoParams:
    """(alpha, beta, gamma) = (M Omega^2, lambda, 1/M).

    ``dp`` is either instantaneous ``DhoValues`` or a schedule-like object
    with ``values(t)``, in which case ``t`` is required.
    """
    v = dp if t is None else dp.values(t)
    return GhoParams(v.M * v.Omega2, v.lam, 1.0 / v.M)


def pendulum_to_dho_params(pp: PendulumParams, t) -> DhoValues:
    """M = m l^2, lambda = v/l, Omega^2 = (g l + v^2 + v ldot)/l^2."""
    m, mdot, l, ldot, v, _, g = pp.values(t)
    return DhoValues(
        m * l * l,
        mdot * l * l + 2.0 * m * l * ldot,
        v / l,
        (g * l + v * v + v * ldot) / (l * l),
    )


class PendulumDho:
    """Time-dependent damped oscillator induced by a pendulum schedule.

    Quacks like ``DhoParams`` (``values(t)``, ``epsilon``) so it can be fed
    to ``dho_rhs``/``ck_rhs`` unchanged.
    """

    def __init__(self, pp: PendulumParams):
        self.pp = pp

    @property
    def epsilon(self) -> float:
        return self.pp.epsilon

    @property
    def slowness(self):
        return self.pp.slowness

    def values(self, t) -> DhoValues:
        return pendulum_to_dho_params(self.pp, t)

    def damping_integral(self, t0: float, t1: float) -> float:
        return accumulated_damping(self, t0, t1)


def accumulated_damping(dp, t0: float, t1: float) -> float:
    """Lambda(t1) - Lambda(t0) = int lambda dt by adaptive quadrature."""
    val, _ = quad(lambda s: dp.values(s).lam, t0, t1, epsabs=1e-13, epsrel=1e-13, limit=500)
    return val


def dho_gho_params(dp) -> Callable[[float], GhoParams]:
    """t -> GhoParams for a damped oscillator (usable with ``gho_flow``)."""
    return lambda t: dho_to_gho_params(dp, t)


# ---------------------------------------------------------------------------
# point maps
# ---------------------------------------------------------------------------


def _check_lambda(Lam):
    if np.any(np.abs(Lam) > LAMBDA_LIMIT):
        raise MapOverflow(f"|Lambda| = {np.max(np.abs(Lam))!r} exceeds {LAMBDA_LIMIT}")


def ck_map(state, Lam):
    """(q, p) -> (Q, P) = (q e^Lambda, p e^-Lambda).  Inverse: ``ck_map(., -Lambda)``."""
    _check_lambda(Lam)
    q, p = state[0], state[1]
    e = np.exp(Lam)
    return q * e, p / e


def ck_generating_function(q, P, Lam):
    """F(q, P, t) = q P exp(Lambda(t))."""
    _check_lambda(Lam)
    return q * P * np.exp(Lam)


def ck_generating_dt(q, P, Lam, lam):
    """Partial t of F at fixed (q, P): q P lambda exp(Lambda)."""
    _check_lambda(Lam)
    return q * P * lam * np.exp(Lam)


def pendulum_dho_substitution(phi, Lam):
    """q(t) = phi(t) exp(-Lambda(t)) on a shared time grid."""
    phi = np.asarray(phi, dtype=float)
    Lam = np.asarray(Lam, dtype=float)
    if phi.shape != Lam.shape:
        raise ValueError("phi and Lambda must share the time grid")
    _check_lambda(Lam)
    return phi * np.exp(-Lam)


@dataclass(frozen=True)
class CanonicalMap:
    """Forward/inverse point maps between two (coordinate, momentum) charts.

    ``forward(state, Lam)`` and ``inverse(state, Lam)`` take the damping
    integral as the only time dependence.
    """

    name: str
    source: str
    target: str
    forward: Callable
    inverse: Callable
    generating_function: Callable | None = None

    def jacobian(self, state, Lam, h: float = 1e-6) -> np.ndarray:
        return fd_jacobian(lambda s: np.array(self.forward(s, Lam)), state, h)

    def symplectic_residual(self, state, Lam, h: float = 1e-6) -> float:
        return symplectic_residual(self.jacobian(state, Lam, h))


CK_MAP = CanonicalMap(
    name="caldirola-kanai->gho",
    source="ck",
    target="gho",
    forward=ck_map,
    inverse=lambda s, Lam: ck_map(s, -Lam),
    generating_function=ck_generating_function,
)


def fd_jacobian(f, x, h: float = 1e-6) -> np.ndarray:
    """Central-difference Jacobian with relative step ``h``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        dx = h * max(1.0, abs(x[k]))
        e = np.zeros_like(x)
        e[k] = dx
        cols.append((np.asarray(f(x + e)) - np.asarray(f(x - e))) / (2 * dx))
    return np.column_stack(cols)


def symplectic_residual(J) -> float:
    """max |J^T Omega J - Omega| for a 2x2 Jacobian."""
    return float(np.max(np.abs(J.T @ J2 @ J - J2)))


def generating_function_residual(q, P, Lam, h: float = 1e-6) -> float:
    """Max deviation of (dF/dq, dF/dP) from the ck_map image (p, Q)."""
    dq = h * max(1.0, abs(q))
    dP = h * max(1.0, abs(P))
    F = ck_generating_function
    p_fd = (F(q + dq, P, Lam) - F(q - dq, P, Lam)) / (2 * dq)
    Q_fd = (F(q, P + dP, Lam) - F(q, P - dP, Lam)) / (2 * dP)
    Q, _ = ck_map((q, 0.0), Lam)
    p = P * math.exp(Lam)
    return max(abs(p_fd - p), abs(Q_fd - Q))


# ---------------------------------------------------------------------------
# complex chart
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ComplexChart:
    """Complex amplitude with conjugate pair (z, -i z*)."""

    z: complex
    zbar: complex
    params: GhoParams
    omega: float

    @property
    def momentum(self) -> complex:
        return -1j * self.zbar


def to_complex(state, p: GhoParams) -> ComplexChart:
    Q, P = state[0], state[1]
    w = gho_frequency(p)
    s = math.sqrt(w / (2.0 * p.gamma))
    z = s * (Q - 1j * (p.gamma * P + p.beta * Q) / w)
    return ComplexChart(z, z.conjugate(), p, w)


def from_complex(chart: ComplexChart | complex, p: GhoParams | None = None, zbar=None):
    """Inverse of ``to_complex``.

    ``zbar`` may be supplied independently of ``z`` (used when
    differentiating in the complex chart); the map is linear in both.
    """
    if isinstance(chart, ComplexChart):
        z, zb, p = chart.z, chart.zbar, chart.params
    else:
        z = chart
        zb = np.conj(z) if zbar is None else zbar
    w = gho_frequency(p)
    Q = np.sqrt(p.gamma / (2.0 * w)) * (z + zb)
    P = ((1j * w - p.beta) * z - (1j * w + p.beta) * zb) / np.sqrt(2.0 * w * p.gamma)
    return Q, P


def real_from_complex(z, p: GhoParams):
    Q, P = from_complex(z, p)
    return float(np.real(Q)), float(np.real(P))


class ComplexHamiltonian(NamedTuple):
    """H^z = A z z* + B z^2 + C z*^2."""

    A: complex
    B: complex
    C: complex

    def value(self, z, zbar=None):
        zb = np.conj(z) if zbar is None else zbar
        return self.A * z * zb + self.B * z * z + self.C * zb * zb

    def dz_dt(self, z, zbar=None):
        """Hamilton flow in the (z, -i z*) chart: zdot = i dH/dz*."""
        zb = np.conj(z) if zbar is None else zbar
        return 1j * (self.A * z + 2.0 * self.C * zb)


def complex_hamiltonian(p: GhoParams, rates: ParamRates) -> ComplexHamiltonian:
    """Quadratic form of the complex-chart Hamiltonian.

    Collected from
        omega zz* + (i omegadot / 4 omega)(z^2 - z*^2) - (betadot / 4 omega)(z + z*)^2
        + (gammadot / 4 omega gamma)[-i omega (z^2 - z*^2) + beta (z + z*)^2].
    """
    a, b, g = p
    ad, bd, gd = rates
    w = gho_frequency(p)
    wd = (ad * g + a * gd - 2.0 * b * bd) / (2.0 * w)
    k = gd / (4.0 * w * g)
    sym = -bd / (4.0 * w) + k * b
    A = w + 2.0 * sym
    B = 1j * wd / (4.0 * w) - 1j * w * k + sym
    C = -1j * wd / (4.0 * w) + 1j * w * k + sym
    return ComplexHamiltonian(complex(A), complex(B), complex(C))


def zz_coefficient(p: GhoParams, rates: ParamRates) -> float:
    """Real zz* coefficient omega - betadot/2 omega + beta gammadot / 2 omega gamma."""
    return complex_hamiltonian(p, rates).A.real


def wirtinger_flow_fd(H: ComplexHamiltonian, z: complex, h: float = 1e-6) -> complex:
    """i dH/dz* by finite differences on the real value of H.

    dH/dz* = (dH/dx + i dH/dy) / 2 with z = x + i y.  Only the Hermitian
    (real) part of H is differentiated, which is what drives a real flow.
    """

    def f(zz):
        return H.value(zz).real

    dx = (f(z + h) - f(z - h)) / (2 * h)
    dy = (f(z + 1j * h) - f(z - 1j * h)) / (2 * h)
    return 1j * 0.5 * (dx + 1j * dy)


def complex_poisson_bracket(chart: ComplexChart, h: float = 0.5) -> complex:
    """{Q, P} computed in the chart (z, zeta = -i z*) by central differences.

    Q and P are linear (hence holomorphic) in z and zeta, so the stencil is
    exact up to rounding; a large ``h`` keeps the rounding small.
    """
    p = chart.params
    z0, zeta0 = chart.z, -1j * chart.zbar

    def QP(z, zeta):
        return from_complex(z, p, zbar=1j * zeta)

    Qz = (QP(z0 + h, zeta0)[0] - QP(z0 - h, zeta0)[0]) / (2 * h)
    Pz = (QP(z0 + h, zeta0)[1] - QP(z0 - h, zeta0)[1]) / (2 * h)
    Qzeta = (QP(z0, zeta0 + h)[0] - QP(z0, zeta0 - h)[0]) / (2 * h)
    Pzeta = (QP(z0, zeta0 + h)[1] - QP(z0, zeta0 - h)[1]) / (2 * h)
    return Qz * Pzeta - Qzeta * Pz


def complex_flow(schedule: ParamSchedule):
    """Real 2-vector form (Re z, Im z) of the complex-chart flow."""

    def rhs(t, y):
        p, r = schedule.evaluate(t, check=False)
        zd = complex_hamiltonian(p, r).dz_dt(complex(y[0], y[1]))
        return np.array([zd.real, zd.imag])

    return rhs


# ---------------------------------------------------------------------------
# dual-integration experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EquivalenceReport:
    map_name: str
    max_state_deviation: float
    hamiltonian_identity_residual: float
    symplectic_residual: float

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _probe_states(rng, n):
    return rng.uniform(-2.0, 2.0, size=(n, 2))


def pendulum_dho_equivalence(pp: PendulumParams, y0, t_span, tol: float = 1e-12) -> EquivalenceReport:
    """Integrate the pendulum and the induced damped oscillator separately.

    Initial data are matched through q = phi, qdot = p/(m l^2) at Lambda = 0;
    the deviation is max |phi - q e^Lambda| on the shared grid.
    """
    t0, t1 = t_span
    dp = PendulumDho(pp)
    phi0, p0 = y0
    m, _, l, *_ = pp.values(t0)
    om = pp.omega_max(t_span)
    pend = integrate(pendulum_flow(pp), [phi0, p0], t_span, tol, omega_max=om, columns=["phi", "p"])
    dho = integrate(
        dho_flow(dp),
        [phi0, p0 / (m * l * l), 0.0],
        t_span,
        tol,
        t_eval=pend.t,
        columns=["q", "qdot", "Lambda"],
        atol=tol * 1e-6,
    )
    phi_back = dho["q"] * np.exp(dho["Lambda"])
    dev = float(np.max(np.abs(pend["phi"] - phi_back)))
    # parameter level: pendulum -> DHO -> GHO equals pendulum -> GHO
    ts = np.linspace(t0, t1, 101)
    direct = pp.to_gho(ts)
    composed = dho_to_gho_params(pendulum_to_dho_params(pp, ts))
    ham = float(max(np.max(np.abs(np.subtract(a, b))) for a, b in zip(direct, composed)))
    rng = np.random.default_rng(8)
    sym = 0.0
    for s, Lam in zip(_probe_states(rng, 100), dho["Lambda"][:: max(len(dho) // 100, 1)]):
        sym = max(sym, CK_MAP.symplectic_residual(s, Lam))
    return EquivalenceReport("pendulum->dho", dev, ham, sym)


def gho_ck_equivalence(dp: DhoParams, y0, t_span, tol: float = 1e-12, n_probes: int = 100) -> EquivalenceReport:
    """Caldirola-Kanai flow pushed through ``ck_map`` versus the GHO flow.

    ``y0`` is the CK state (q, p) at t0 where Lambda = 0.  The Hamiltonian
    identity H_GHO(ck_map(q, p)) = H_CK(q, p) + dF/dt is probed at random
    (q, p, t), with Lambda(t) from quadrature of lambda.
    """
    t0, t1 = t_span
    q0, p0 = y0
    ts = np.linspace(t0, t1, 1000)
    om = float(np.max(gho_frequency(dho_to_gho_params(dp, ts))))
    ck = integrate(ck_flow(dp), [q0, p0, 0.0], t_span, tol, omega_max=om, columns=["q", "p", "Lambda"])
    gho = integrate(gho_flow(dho_gho_params(dp)), [q0, p0], t_span, tol, t_eval=ck.t, columns=["Q", "P"])
    Q, P = ck_map((ck["q"], ck["p"]), ck["Lambda"])
    dev = float(max(np.max(np.abs(Q - gho["Q"])), np.max(np.abs(P - gho["P"]))))

    rng = np.random.default_rng(9)
    ham = sym = 0.0
    for (q, p), t in zip(_probe_states(rng, n_probes), rng.uniform(t0, t1, n_probes)):
        Lam = accumulated_damping(dp, t0, t)
        v = dp.values(t)
        Qm, Pm = ck_map((q, p), Lam)
        lhs = gho_energy((Qm, Pm), dho_to_gho_params(v))
        rhs = ck_hamiltonian((q, p, Lam), dp, t) + ck_generating_dt(q, Pm, Lam, v.lam)
        ham = max(ham, abs(lhs - rhs))
        sym = max(sym, CK_MAP.symplectic_residual((q, p), Lam))
    return EquivalenceReport("caldirola-kanai->gho", dev, ham, sym)


def complex_equivalence(schedule: ParamSchedule, y0, t_span, tol: float = 1e-12) -> EquivalenceReport:
    """Complex-chart flow mapped back to (Q, P) versus the real GHO flow.

    The Hamiltonian column holds the worst pointwise gap between the zz*
    coefficient and omega plus the geometric integrand; the symplectic
    column holds |{Q, P} - 1| in the (z, -i z*) chart.
    """
    t0, t1 = t_span
    real = integrate(gho_flow(schedule), y0, t_span, tol, omega_max=schedule.omega_max, columns=["Q", "P"])
    p0, _ = schedule.evaluate(t0)
    c0 = to_complex(y0, p0)
    cpx = integrate(complex_flow(schedule), [c0.z.real, c0.z.imag], t_span, tol, t_eval=real.t, columns=["x", "y"])
    p, r = schedule.evaluate(real.t)
    z = cpx["x"] + 1j * cpx["y"]
    Q, P = from_complex(z, p)
    dev = float(max(np.max(np.abs(Q.real - real["Q"])), np.max(np.abs(P.real - real["P"]))))

    idx = np.linspace(0, len(real) - 1, 100).astype(int)
    gap = bracket = 0.0
    for k in idx:
        pk = GhoParams(*(float(x[k]) for x in p))
        rk = ParamRates(*(float(x[k]) for x in r))
        w = gho_frequency(pk)
        geo = pk.beta * rk.gamma / (2 * w * pk.gamma) - rk.beta / (2 * w)
        gap = max(gap, abs(zz_coefficient(pk, rk) - (w + geo)))
        chart = to_complex((real["Q"][k], real["P"][k]), pk)
        bracket = max(bracket, abs(complex_poisson_bracket(chart) - 1.0))
    return EquivalenceReport("gho->complex", dev, gap, bracket)
