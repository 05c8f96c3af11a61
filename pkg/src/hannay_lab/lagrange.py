"""Jacobi last multipliers and Lagrangians for the one-dimensional examples.

For q'' = F(q, q', t) a multiplier M solves

    dM/dt + q' dM/dq + d(M F)/dq' = 0,

and any Lagrangian with d2L/dq'2 = M has q'' = F as its Euler-Lagrange
equation.  The catalog holds three closed-form cases; everything here
certifies them numerically rather than solving the PDE.

Finite differences: first derivatives use a relative step of 1e-6;
second derivatives (Hessian, mixed partials in the EL expression) use
1e-4, since a 1e-6 second difference loses ~1e-4 to rounding.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from .dynamics import PendulumParams
from .errors import DomainViolation, MissingLagrangian

FD_STEP = 1e-6
FD_STEP2 = 1e-4

Fn = Callable[[float, float, float], float]


@dataclass(frozen=True)
class VariationalSpec:
    """q'' = F(q, qdot, t) with a candidate multiplier and, optionally, L.

    ``partials`` may hold analytic (dM/dt, dM/dq, d(MF)/dqdot); without
    them the multiplier PDE is evaluated by central differences.
    """

    name: str
    F: Fn
    M: Fn
    L: Fn | None = None
    params: dict = field(default_factory=dict)
    partials: tuple[Fn, Fn, Fn] | None = None
    domain: Callable[[float, float, float], bool] | None = None

    def scaled(self, c: float) -> "VariationalSpec":
        """Gauge copy with M -> c M (and L -> c L)."""
        M, L = self.M, self.L
        parts = None
        if self.partials is not None:
            parts = tuple((lambda f: lambda q, qd, t: c * f(q, qd, t))(f) for f in self.partials)
        return replace(
            self,
            M=lambda q, qd, t: c * M(q, qd, t),
            L=None if L is None else (lambda q, qd, t: c * L(q, qd, t)),
            partials=parts,
        )

    def check_domain(self, q, qd, t):
        if self.domain is not None and not self.domain(q, qd, t):
            raise DomainViolation(f"{self.name}: sample (q={q!r}, qdot={qd!r}, t={t!r}) outside validity domain")
        if not self.M(q, qd, t) > 0:
            raise DomainViolation(f"{self.name}: multiplier not positive at (q={q!r}, qdot={qd!r}, t={t!r})")


@dataclass
class ResidualReport:
    label: str
    grid: str
    max_abs: float
    mean_abs: float
    worst: list = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "grid": self.grid,
            "max_abs": self.max_abs,
            "mean_abs": self.mean_abs,
            "worst": self.worst,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _report(label, grid, pts, res, n_worst=5) -> ResidualReport:
    res = np.asarray(res, dtype=float)
    if not np.all(np.isfinite(res)):
        raise FloatingPointError(f"{label}: non-finite residual")
    a = np.abs(res)
    order = np.argsort(-a, kind="stable")[:n_worst]
    worst = [{"q": float(pts[k][0]), "qdot": float(pts[k][1]), "t": float(pts[k][2]), "residual": float(res[k])} for k in order]
    return ResidualReport(label, grid, float(a.max()), float(a.mean()), worst)


def sample_grid(q_range, qd_range, t_range, n: int = 10) -> list[tuple[float, float, float]]:
    """n x n x n tensor grid over (q, qdot, t), endpoints included."""
    qs, qds, ts = (np.linspace(lo, hi, n) for lo, hi in (q_range, qd_range, t_range))
    return [(float(q), float(qd), float(t)) for q in qs for qd in qds for t in ts]


def _step(x, h):
    return h * max(1.0, abs(x))


# ---------------------------------------------------------------------------
# catalog
# ---------------------------------------------------------------------------


def caldirola_kanai(M0: float = 1.0, lam: float = 0.1, Omega: float = 1.0) -> VariationalSpec:
    """q'' = -2 lam q' - Omega^2 q, M = M0 e^{2 lam t}, constant coefficients."""
    w2 = Omega * Omega

    def F(q, qd, t):
        return -2.0 * lam * qd - w2 * q

    def M(q, qd, t):
        return M0 * math.exp(2.0 * lam * t)

    def L(q, qd, t):
        return 0.5 * M0 * math.exp(2.0 * lam * t) * (qd * qd - w2 * q * q)

    partials = (
        lambda q, qd, t: 2.0 * lam * M(q, qd, t),
        lambda q, qd, t: 0.0,
        lambda q, qd, t: -2.0 * lam * M(q, qd, t),
    )
    return VariationalSpec("caldirola-kanai", F, M, L, {"M0": M0, "lam": lam, "Omega": Omega}, partials)


def quadratic_friction(m: float = 1.0, b: float = 0.5, omega0: float = 1.0, sign: int = +1) -> VariationalSpec:
    """q'' = -b q'^2 - omega0^2 q with M = m e^{2 sign b q}.

    ``sign=+1`` is the multiplier that matches the Lagrangian below and
    annuls the PDE; ``sign=-1`` is the e^{-2bq} form, which leaves the
    residual -4 b q' M.  Only ``sign=+1`` carries a Lagrangian.
    """
    if b == 0:
        raise ValueError("b = 0")
    w2 = omega0 * omega0
    k = 2.0 * sign * b

    def F(q, qd, t):
        return -b * qd * qd - w2 * q

    def M(q, qd, t):
        return m * math.exp(k * q)

    def L(q, qd, t):
        return 0.5 * m * ((qd * qd - (w2 / b) * q + w2 / (2 * b * b)) * math.exp(2 * b * q) - w2 / (2 * b * b))

    partials = (
        lambda q, qd, t: 0.0,
        lambda q, qd, t: k * M(q, qd, t),
        lambda q, qd, t: -2.0 * b * qd * M(q, qd, t),
    )
    name = "quadratic-friction" if sign > 0 else "quadratic-friction-printed"
    return VariationalSpec(name, F, M, L if sign > 0 else None, {"m": m, "b": b, "omega0": omega0}, partials)


def hirota() -> VariationalSpec:
    """q'' = -(1 + q'^2) tan q, M = 1/(1 + q'^2); valid for |q| < pi/2."""

    def F(q, qd, t):
        return -(1.0 + qd * qd) * math.tan(q)

    def M(q, qd, t):
        return 1.0 / (1.0 + qd * qd)

    def L(q, qd, t):
        return qd * math.atan(qd) - 0.5 * math.log1p(qd * qd) + 0.5 * math.log(math.cos(q) ** 2)

    partials = (
        lambda q, qd, t: 0.0,
        lambda q, qd, t: 0.0,
        lambda q, qd, t: 0.0,  # M F = -tan q
    )
    return VariationalSpec("hirota", F, M, L, {}, partials, domain=lambda q, qd, t: abs(q) < math.pi / 2)


CATALOG = {
    "caldirola-kanai": caldirola_kanai,
    "quadratic-friction": quadratic_friction,
    "hirota": hirota,
}


def catalog(name: str, **params) -> VariationalSpec:
    try:
        return CATALOG[name](**params)
    except KeyError:
        raise KeyError(f"unknown catalog entry {name!r}; choose from {sorted(CATALOG)}") from None


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def multiplier_pde(spec: VariationalSpec, q, qd, t, analytic: bool = True) -> float:
    """dM/dt + qdot dM/dq + d(M F)/dqdot at one point."""
    if analytic and spec.partials is not None:
        Mt, Mq, MFqd = (f(q, qd, t) for f in spec.partials)
        return Mt + qd * Mq + MFqd
    M, F = spec.M, spec.F
    ht, hq, hv = _step(t, FD_STEP), _step(q, FD_STEP), _step(qd, FD_STEP)
    Mt = (M(q, qd, t + ht) - M(q, qd, t - ht)) / (2 * ht)
    Mq = (M(q + hq, qd, t) - M(q - hq, qd, t)) / (2 * hq)
    MFqd = (M(q, qd + hv, t) * F(q, qd + hv, t) - M(q, qd - hv, t) * F(q, qd - hv, t)) / (2 * hv)
    return Mt + qd * Mq + MFqd


def multiplier_residual(spec: VariationalSpec, samples, analytic: bool = True, grid: str = "") -> ResidualReport:
    samples = list(samples)
    for s in samples:
        spec.check_domain(*s)
    res = [multiplier_pde(spec, *s, analytic=analytic) for s in samples]
    how = "analytic" if analytic and spec.partials is not None else "central differences"
    return _report(f"{spec.name}: multiplier PDE ({how})", grid or f"{len(samples)} points", samples, res)


def _need_L(spec):
    if spec.L is None:
        raise MissingLagrangian(f"{spec.name} has no Lagrangian")
    return spec.L


def lagrangian_hessian(L: Fn, q, qd, t, h: float = FD_STEP2) -> float:
    """Second central difference of L in qdot."""
    d = _step(qd, h)
    return (L(q, qd + d, t) - 2.0 * L(q, qd, t) + L(q, qd - d, t)) / (d * d)


def hessian_matches_multiplier(spec: VariationalSpec, samples, grid: str = "") -> ResidualReport:
    L = _need_L(spec)
    samples = list(samples)
    res = []
    for q, qd, t in samples:
        spec.check_domain(q, qd, t)
        res.append(lagrangian_hessian(L, q, qd, t) - spec.M(q, qd, t))
    return _report(f"{spec.name}: d2L/dqdot2 - M", grid or f"{len(samples)} points", samples, res)


def euler_lagrange_expression(L: Fn, q, qd, qdd, t, h: float = FD_STEP2) -> float:
    """d/dt dL/dqdot - dL/dq expanded along a curve with given (q, qdot, qddot).

    = L_vv qddot + qdot L_vq + L_vt - L_q, all partials by central differences.
    """
    hq, hv, ht = _step(q, h), _step(qd, h), _step(t, h)
    L_vv = lagrangian_hessian(L, q, qd, t, h)
    L_vq = (
        L(q + hq, qd + hv, t) - L(q + hq, qd - hv, t) - L(q - hq, qd + hv, t) + L(q - hq, qd - hv, t)
    ) / (4 * hq * hv)
    L_vt = (
        L(q, qd + hv, t + ht) - L(q, qd - hv, t + ht) - L(q, qd + hv, t - ht) + L(q, qd - hv, t - ht)
    ) / (4 * hv * ht)
    hq1 = _step(q, FD_STEP)
    L_q = (L(q + hq1, qd, t) - L(q - hq1, qd, t)) / (2 * hq1)
    return L_vv * qdd + qd * L_vq + L_vt - L_q


def euler_lagrange_residual(spec: VariationalSpec, t, q, qd, qdd=None) -> ResidualReport:
    """EL expression divided by M along sampled (t, q, qdot[, qddot]).

    Without ``qdd`` the acceleration is taken as F on the samples, which is
    what it is on an integrated solution.  Pass the solution's qddot
    explicitly when probing a perturbed (non-solution) curve.
    """
    L = _need_L(spec)
    t, q, qd = (np.asarray(x, dtype=float) for x in (t, q, qd))
    if qdd is None:
        qdd = np.array([spec.F(a, b, c) for a, b, c in zip(q, qd, t)])
    qdd = np.asarray(qdd, dtype=float)
    pts, res = [], []
    for tk, qk, vk, ak in zip(t, q, qd, qdd):
        spec.check_domain(qk, vk, tk)
        pts.append((qk, vk, tk))
        res.append(euler_lagrange_expression(L, qk, vk, ak, tk) / spec.M(qk, vk, tk))
    return _report(f"{spec.name}: Euler-Lagrange / M", f"{len(t)} trajectory samples", pts, res)


# ---------------------------------------------------------------------------
# pendulum with the cross term traded for a total derivative
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ReducedLagrangian:
    """L = kinetic * phidot^2 - potential * phi^2."""

    kinetic: float
    potential: float

    @property
    def omega2(self) -> float:
        return self.potential / self.kinetic


def averaged_pendulum_lagrangian(pp: PendulumParams, t) -> ReducedLagrangian:
    """Kinetic m l^2/2 and potential (m g l - l (v mdot + m vdot))/2.

    The latter is m g l [1 - (v/g)(mdot/m + vdot/v)] / 2 written without
    the 1/v.
    """
    m, mdot, l, _, v, vdot, g = pp.values(t)
    return ReducedLagrangian(0.5 * m * l * l, 0.5 * (m * g * l - l * (v * mdot + m * vdot)))


def reduced_pendulum_rhs(state, pp: PendulumParams, t) -> np.ndarray:
    """Flow of the reduced Lagrangian in (phi, p = m l^2 phidot)."""
    phi, p = state[0], state[1]
    red = averaged_pendulum_lagrangian(pp, t)
    return np.array([p / (2.0 * red.kinetic), -2.0 * red.potential * phi])


def reduced_pendulum_flow(pp: PendulumParams):
    return lambda t, y: reduced_pendulum_rhs(y, pp, t)
