"""Acceptance checks shared by ``hannay-lab verify`` and the test suite.

Every criterion is a cached function returning a list of ``Check`` rows,
so the CLI and pytest run the identical computation once per process.
"""

from __future__ import annotations

import functools
import math
import tempfile
from pathlib import Path
from typing import Callable, NamedTuple

import numpy as np

from . import lagrange as lg
from .dynamics import (
    DhoParams,
    PendulumParams,
    gho_closed_form,
    gho_energy,
    gho_flow,
    hirota_invariant,
    hirota_rhs,
    integrate,
    quadratic_friction_energy,
    quadratic_friction_rhs,
    PendulumSchedule,
)
from .phases import (
    decompose,
    dynamical_phase,
    filter_padding,
    geometric_phase_line,
    geometric_phase_surface,
    integrate_window,
    pendulum_effective_phase,
    pendulum_phases,
)
from .schedules import ConstantSchedule, GhoParams, Harmonic, LoopSpec, SlownessSpec, TrigLoop
from .transforms import (
    complex_equivalence,
    complex_poisson_bracket,
    from_complex,
    gho_ck_equivalence,
    pendulum_dho_equivalence,
    to_complex,
)


class Check(NamedTuple):
    criterion: int
    name: str
    measured: float
    tolerance: float
    passed: bool
    relation: str = "<"

    def line(self) -> str:
        mark = "PASS" if self.passed else "FAIL"
        return f"[{mark}] {self.criterion:2d} {self.name:<48s} {self.measured:.3e} {self.relation} {self.tolerance:.1e}"


def _lt(c, name, measured, tol):
    return Check(c, name, float(measured), tol, bool(measured < tol), "<")


def _ge(c, name, measured, tol):
    return Check(c, name, float(measured), tol, bool(measured >= tol), ">=")


# ---------------------------------------------------------------------------
# shared scenarios
# ---------------------------------------------------------------------------


def hannay_loop(epsilon: float, beta: bool = True, loops: int = 1) -> TrigLoop:
    """alpha = 2, beta = 0.4 cos 2 pi tau, gamma = 1 + 0.4 sin 2 pi tau, padded for filtering.

    With ``beta=False`` the loop moves in the (alpha, gamma) plane instead:
    alpha = 2 + 0.4 cos 2 pi tau.
    """
    a = 2.0 if beta else Harmonic(2.0, cos=0.4)
    b = Harmonic(cos=0.4) if beta else 0.0
    g = Harmonic(1.0, sin=0.4)
    base = TrigLoop(a, b, g, SlownessSpec(epsilon, (0.0, loops / epsilon)))
    pad = filter_padding(base.omega_min)
    return base.with_slowness(SlownessSpec(epsilon, (-pad, loops / epsilon + pad)))


@functools.cache
def loop_decomposition(epsilon: float, tol: float = 1e-12, beta: bool = True):
    sch = hannay_loop(epsilon, beta)
    p, _ = sch.evaluate(0.0)
    tr = integrate_window(sch, [1.0, -p.beta / p.gamma], (0.0, 1.0 / epsilon), tol)
    return decompose(tr, sch, window=(0.0, 1.0 / epsilon))


def pendulum_scenario(epsilon: float = 1e-3, moving_length: bool = True) -> PendulumParams:
    """m, v (and optionally l) vary harmonically over one slow period."""
    l = Harmonic(1.0, sin=0.1) if moving_length else 1.0
    return PendulumParams(
        m=Harmonic(1.0, cos=0.1),
        l=l,
        v=Harmonic(0.0, cos=0.05, sin=0.05),
        g=9.81,
        slowness=SlownessSpec(epsilon, (0.0, 1.0 / epsilon)),
    )


def damped_scenario() -> DhoParams:
    return DhoParams(
        M=Harmonic(1.5, cos=0.2),
        lam=Harmonic(0.05, sin=0.03),
        Omega=Harmonic(1.2, cos=0.1),
        slowness=SlownessSpec(1e-2, (0.0, 100.0)),
    )


# ---------------------------------------------------------------------------
# criteria
# ---------------------------------------------------------------------------


@functools.cache
def criterion_1():
    p = GhoParams(2.0, 1.0, 2.0)
    w = math.sqrt(3.0)
    T = 10 * 2 * math.pi / w
    sch = ConstantSchedule(*p, slowness=SlownessSpec(1.0, (0.0, T)))
    y0 = gho_closed_form(p, 1.0, 0.0).as_array()
    tr = integrate(gho_flow(sch), y0, (0.0, T), 1e-12, omega_max=w)
    exact = np.array([gho_closed_form(p, 1.0, t).as_array() for t in tr.t])
    dev = np.max(np.abs(tr.y - exact))
    E = gho_energy(tr.y.T, p)
    drift = np.max(np.abs(E - E[0])) / E[0]
    return [
        _lt(1, "closed-form max deviation", dev, 1e-9),
        _lt(1, "closed-form relative energy drift", drift, 1e-10),
    ]


@functools.cache
def criterion_2():
    a, b = loop_decomposition(1e-3), loop_decomposition(5e-4)
    return [
        _lt(2, "loop residual, eps=1e-3 [rad]", abs(a.residual), 0.05),
        _ge(2, "residual ratio eps=1e-3 / eps=5e-4", abs(a.residual) / abs(b.residual), 1.4),
    ]


@functools.cache
def criterion_3():
    d = loop_decomposition(1e-3)
    return [_lt(3, "|theta_g_line - theta_g_surface|", abs(d.theta_g_line - d.theta_g_surface), 1e-6)]


@functools.cache
def criterion_4():
    eps = 1e-3
    sch = hannay_loop(eps)
    rev = sch.reversed()
    one = geometric_phase_line(sch, 0.0, 1 / eps)
    back = geometric_phase_line(rev, 0.0, 1 / eps)
    double = TrigLoop(*sch.components, slowness=SlownessSpec(eps, (0.0, 2 / eps)))
    twice = geometric_phase_line(double, 0.0, 2 / eps)
    s_fwd = geometric_phase_surface(LoopSpec(sch))
    s_rev = geometric_phase_surface(LoopSpec(sch).reversed())
    return [
        _lt(4, "line: theta_g(reversed) + theta_g", abs(back + one), 1e-12),
        _lt(4, "line: double traversal - 2 theta_g", abs(twice - 2 * one), 1e-12),
        _lt(4, "surface: theta_g(reversed) + theta_g", abs(s_rev + s_fwd), 1e-12),
    ]


@functools.cache
def criterion_5():
    d = loop_decomposition(1e-3, beta=False)
    return [
        Check(5, "beta=0 loop: theta_g_line (must be exactly 0)", abs(d.theta_g_line), 0.0, d.theta_g_line == 0.0, "=="),
        _lt(5, "beta=0 loop: |residual| [rad]", abs(d.residual), 1e-3),
    ]


FLOOR = 1e-12


@functools.cache
def criterion_6():
    """Drift ratio at tol 1e-14; a pair already at the floor passes."""
    rows = []
    for e1, e2 in ((1e-2, 5e-3), (0.1, 0.05)):
        d1 = loop_decomposition(e1, 1e-14).invariant_drift
        d2 = loop_decomposition(e2, 1e-14).invariant_drift
        floor = max(d1, d2) <= FLOOR
        ratio = d1 / d2 if d2 > 0 else math.inf
        name = f"drift ratio eps={e1:g}/{e2:g} ({d1:.1e}/{d2:.1e}{', floor' if floor else ''})"
        rows.append(Check(6, name, ratio, 4.0, bool(floor or ratio > 4.0), ">"))
    return rows


@functools.cache
def criterion_7():
    a, b = loop_decomposition(1e-3), loop_decomposition(5e-4)
    return [_lt(7, "theta_g_line(eps=1e-3) - theta_g_line(eps=5e-4)", abs(a.theta_g_line - b.theta_g_line), 1e-12)]


@functools.cache
def criterion_8():
    pp = pendulum_scenario(1e-3)
    rep = pendulum_dho_equivalence(pp, (0.1, 0.0), (0.0, 1000.0))
    return [_lt(8, "max |phi - q e^Lambda|", rep.max_state_deviation, 1e-8)]


@functools.cache
def criterion_9():
    rep = gho_ck_equivalence(damped_scenario(), (1.0, 0.0), (0.0, 100.0))
    return [
        _lt(9, "GHO vs mapped CK trajectory", rep.max_state_deviation, 1e-8),
        _lt(9, "H_GHO - H_CK - dF/dt (100 probes)", rep.hamiltonian_identity_residual, 1e-10),
        _lt(9, "symplectic residual of ck_map", rep.symplectic_residual, 1e-8),
    ]


@functools.cache
def criterion_10():
    rng = np.random.default_rng(10)
    trip = bracket = 0.0
    for _ in range(1000):
        a, g = rng.uniform(0.5, 3.0, 2)
        b = rng.uniform(-0.9, 0.9) * math.sqrt(a * g)
        p = GhoParams(a, b, g)
        Q, P = rng.uniform(-2.0, 2.0, 2)
        c = to_complex((Q, P), p)
        Qb, Pb = from_complex(c)
        trip = max(trip, abs(Qb - Q), abs(Pb - P))
        bracket = max(bracket, abs(complex_poisson_bracket(c) - 1.0))
    sch = hannay_loop(1e-2)
    rep = complex_equivalence(sch, (1.0, -0.4), (0.0, 100.0))
    return [
        _lt(10, "to_complex/from_complex round trip", trip, 1e-12),
        _lt(10, "|{Q,P} - 1| in (z, -i z*)", bracket, 1e-12),
        _lt(10, "zz* coefficient - (omega + geometric integrand)", rep.hamiltonian_identity_residual, 1e-12),
        _lt(10, "complex flow vs real flow", rep.max_state_deviation, 1e-8),
    ]


def _el_along(spec, rhs, y0, periods=10, omega=1.0):
    T = periods * 2 * math.pi / omega
    tr = integrate(rhs, y0, (0.0, T), 1e-12, omega_max=1.5 * omega)
    return tr, lg.euler_lagrange_residual(spec, tr.t, tr.y[:, 0], tr.y[:, 1]).max_abs


@functools.cache
def criterion_11():
    rows = []
    ck, qf, hi = lg.caldirola_kanai(M0=1.0, lam=0.1, Omega=1.0), lg.quadratic_friction(), lg.hirota()
    grid = lg.sample_grid((-1.0, 1.0), (-1.0, 1.0), (0.0, 5.0))
    grid_h = lg.sample_grid((-1.2, 1.2), (-2.0, 2.0), (0.0, 5.0))
    for spec, g in ((ck, grid), (hi, grid_h), (qf, grid)):
        rows.append(_lt(11, f"{spec.name}: multiplier PDE", lg.multiplier_residual(spec, g).max_abs, 1e-10))
    printed = lg.quadratic_friction(sign=-1)
    b = printed.params["b"]
    gap = max(abs(lg.multiplier_pde(printed, *s) + 4 * b * s[1] * printed.M(*s)) for s in grid)
    rows.append(_lt(11, "printed e^{-2bq}: PDE - (-4 b qdot M)", gap, 1e-10))
    for spec, g in ((ck, grid), (hi, grid_h), (qf, grid)):
        rows.append(_lt(11, f"{spec.name}: d2L/dqdot2 - M", lg.hessian_matches_multiplier(spec, g).max_abs, 1e-6))
    sho = lg.caldirola_kanai(M0=1.0, lam=0.0, Omega=1.0)
    _, r = _el_along(sho, lambda t, y: np.array([y[1], -y[0]]), [1.0, 0.0])
    rows.append(_lt(11, "caldirola-kanai (lam=0): EL residual", r, 1e-6))
    _, r = _el_along(qf, lambda t, y: quadratic_friction_rhs(y, 0.5, 1.0), [0.5, 0.0])
    rows.append(_lt(11, "quadratic-friction: EL residual", r, 1e-6))
    _, r = _el_along(hi, lambda t, y: hirota_rhs(y), [0.3, 0.0])
    rows.append(_lt(11, "hirota: EL residual", r, 1e-6))
    return rows


@functools.cache
def criterion_12():
    T = 10 * 2 * math.pi
    tr = integrate(lambda t, y: hirota_rhs(y), [0.3, 0.0], (0.0, T), 1e-12, omega_max=1.5)
    C = np.array([hirota_invariant(s) for s in tr.y])
    tr2 = integrate(lambda t, y: quadratic_friction_rhs(y, 0.5, 1.0), [0.5, 0.0], (0.0, T), 1e-12, omega_max=1.5)
    E = np.array([quadratic_friction_energy(s, 0.5, 1.0) for s in tr2.y])
    return [
        _lt(12, "hirota (1+phidot^2)/cos^2 phi drift", np.max(np.abs(C - C[0])) / abs(C[0]), 1e-9),
        _lt(12, "quadratic-friction energy drift", np.max(np.abs(E - E[0])) / abs(E[0]), 1e-9),
    ]


@functools.cache
def criterion_13():
    pp = pendulum_scenario(1e-3, moving_length=False)
    t0, t1 = pp.slowness.t_span
    th_d, th_g = pendulum_phases(pp, t0, t1)
    eff = pendulum_effective_phase(pp, t0, t1)
    sch = PendulumSchedule(pp)
    gd, gg = dynamical_phase(sch, t0, t1), geometric_phase_line(sch, t0, t1)
    return [
        _lt(13, "int omega_pend dt - (theta_d + theta_g) [rad]", abs(eff - th_d - th_g), 1e-3),
        _lt(13, "pendulum theta_d vs GHO route", abs(th_d - gd), 1e-9),
        _lt(13, "pendulum theta_g vs GHO route", abs(th_g - gg), 1e-9),
    ]


@functools.cache
def criterion_14():
    from . import cli

    with tempfile.TemporaryDirectory() as tmp:
        outs = []
        for k in range(2):
            out = Path(tmp) / f"run{k}"
            code = cli.main(["run", str(cli.example_path("constant_gho")), "--out", str(out), "--plots", "on"])
            outs.append((code, {p.name: p.read_bytes() for p in sorted(out.iterdir()) if p.suffix in (".csv", ".json", ".svg")}))
        (c0, f0), (c1, f1) = outs
        stripped = [cli.strip_metadata(f["summary.json"]) for f in (f0, f1)]
        same = c0 == c1 == 0 and f0.keys() == f1.keys()
        same = same and all(f0[n] == f1[n] for n in f0 if n != "summary.json") and stripped[0] == stripped[1]
    return [Check(14, "two runs byte-identical (metadata excluded)", float(not same), 0.0, bool(same), "==")]


CRITERIA: dict[int, Callable[[], list[Check]]] = {
    1: criterion_1,
    2: criterion_2,
    3: criterion_3,
    4: criterion_4,
    5: criterion_5,
    6: criterion_6,
    7: criterion_7,
    8: criterion_8,
    9: criterion_9,
    10: criterion_10,
    11: criterion_11,
    12: criterion_12,
    13: criterion_13,
    14: criterion_14,
}

SUITES = {
    "phases": (1, 2, 3, 4, 5, 6, 7, 13),
    "equivalence": (8, 9, 10),
    "multipliers": (11, 12),
}
SUITES["all"] = tuple(range(1, 15))


def run_suite(name: str) -> list[Check]:
    if name not in SUITES:
        raise KeyError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
    rows = []
    for c in SUITES[name]:
        rows.extend(CRITERIA[c]())
    return rows
