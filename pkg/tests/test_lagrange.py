import json
import math

import numpy as np
import pytest

from hannay_lab import lagrange as lg
from hannay_lab import verification as vf
from hannay_lab.dynamics import PendulumParams, integrate, pendulum_flow
from hannay_lab.errors import DomainViolation, MissingLagrangian
from hannay_lab.phases import amplitude_phase, pendulum_effective_frequency, unwrap_phases
from hannay_lab.schedules import GhoParams, Harmonic, SlownessSpec

GRID_CK = lg.sample_grid((-2, 2), (-2, 2), (0, 10))
GRID_QF = lg.sample_grid((-1, 1), (-1, 1), (0, 1))
GRID_HIROTA = lg.sample_grid((-1.4, 1.4), (-2, 2), (0, 1))


class TestCatalog:
    def test_entries(self):
        assert set(lg.CATALOG) == {"caldirola-kanai", "quadratic-friction", "hirota"}
        spec = lg.catalog("caldirola-kanai", lam=0.2)
        assert spec.params["lam"] == 0.2

    def test_unknown(self):
        with pytest.raises(KeyError, match="unknown"):
            lg.catalog("rayleigh")

    def test_printed_variant_has_no_lagrangian(self):
        spec = lg.quadratic_friction(sign=-1)
        assert spec.name == "quadratic-friction-printed"
        assert spec.L is None

    def test_grid_shape(self):
        assert len(GRID_CK) == 1000
        assert GRID_CK[0] == (-2.0, -2.0, 0.0) and GRID_CK[-1] == (2.0, 2.0, 10.0)


class TestMultiplierPde:
    @pytest.mark.parametrize(
        "spec, grid, tol",
        [
            (lg.caldirola_kanai(), GRID_CK, 1e-10),
            (lg.quadratic_friction(), GRID_QF, 1e-10),
            (lg.hirota(), GRID_HIROTA, 1e-12),
        ],
        ids=["ck", "quadratic", "hirota"],
    )
    def test_annulled(self, spec, grid, tol):
        assert lg.multiplier_residual(spec, grid).max_abs < tol

    @pytest.mark.parametrize("spec", [lg.caldirola_kanai(), lg.quadratic_friction(), lg.hirota()])
    def test_differences_agree_with_closed_form(self, spec):
        grid = lg.sample_grid((-1, 1), (-1, 1), (0, 1), n=5)
        assert lg.multiplier_residual(spec, grid, analytic=False).max_abs < 1e-6

    def test_printed_sign_leaves_residual(self):
        spec = lg.quadratic_friction(sign=-1)
        for q, qd, t in GRID_QF[::37]:
            expect = -4 * 0.5 * qd * spec.M(q, qd, t)
            assert lg.multiplier_pde(spec, q, qd, t) == pytest.approx(expect, abs=1e-14)
            assert lg.multiplier_pde(spec, q, qd, t, analytic=False) == pytest.approx(expect, abs=1e-7)

    @pytest.mark.parametrize("c", [0.5, 2.0])
    def test_gauge_scaling(self, c):
        base = lg.quadratic_friction(sign=-1)
        r0 = lg.multiplier_residual(base, GRID_QF).max_abs
        rc = lg.multiplier_residual(base.scaled(c), GRID_QF).max_abs
        assert rc == pytest.approx(c * r0, rel=1e-12)
        # a solution stays a solution
        assert lg.multiplier_residual(lg.hirota().scaled(c), GRID_HIROTA).max_abs < 1e-12

    def test_domain(self):
        with pytest.raises(DomainViolation):
            lg.multiplier_residual(lg.hirota(), [(1.6, 0.0, 0.0)])

    def test_report_json(self):
        rep = lg.multiplier_residual(lg.quadratic_friction(sign=-1), GRID_QF, grid="10^3")
        d = json.loads(rep.to_json())
        assert d["grid"] == "10^3"
        assert len(d["worst"]) == 5
        assert abs(d["worst"][0]["residual"]) == pytest.approx(d["max_abs"])


class TestHessian:
    @pytest.mark.parametrize(
        "spec, grid",
        [(lg.caldirola_kanai(), GRID_CK), (lg.quadratic_friction(), GRID_QF), (lg.hirota(), GRID_HIROTA)],
        ids=["ck", "quadratic", "hirota"],
    )
    def test_matches_multiplier(self, spec, grid):
        rep = lg.hessian_matches_multiplier(spec, grid)
        assert rep.max_abs < 1e-6

    def test_missing(self):
        with pytest.raises(MissingLagrangian):
            lg.hessian_matches_multiplier(lg.quadratic_friction(sign=-1), GRID_QF)


class TestEulerLagrange:
    @staticmethod
    def solve(spec, y0, T=20.0):
        tr = integrate(lambda t, y: np.array([y[1], spec.F(y[0], y[1], t)]), y0, (0.0, T), 1e-12, omega_max=1.5)
        return tr.t, tr.y[:, 0], tr.y[:, 1]

    def test_oscillator(self):
        spec = lg.caldirola_kanai(lam=0.0)
        t, q, qd = self.solve(spec, [1.0, 0.0])
        assert lg.euler_lagrange_residual(spec, t, q, qd).max_abs < 1e-6

    @pytest.mark.parametrize("spec, y0", [(lg.quadratic_friction(), [0.5, 0.0]), (lg.hirota(), [0.3, 0.0])])
    def test_solutions(self, spec, y0):
        t, q, qd = self.solve(spec, y0)
        assert lg.euler_lagrange_residual(spec, t, q, qd).max_abs < 1e-6

    def test_perturbed_curve_detected(self):
        spec = lg.quadratic_friction()
        t, q, qd = self.solve(spec, [0.5, 0.0])
        qdd = np.array([spec.F(a, b, c) for a, b, c in zip(q, qd, t)])
        bump = 1e-3 * np.sin(t)
        # perturb q and its derivatives consistently
        rep = lg.euler_lagrange_residual(spec, t, q + bump, qd + 1e-3 * np.cos(t), qdd - bump)
        assert rep.max_abs > 1e-4

    def test_missing(self):
        with pytest.raises(MissingLagrangian):
            lg.euler_lagrange_residual(lg.quadratic_friction(sign=-1), [0.0], [0.1], [0.0])


class TestReducedPendulum:
    def test_static_suspension(self):
        pp = PendulumParams(m=2.0, l=1.5, v=0.0, g=9.81, slowness=SlownessSpec(1e-3, (0.0, 10.0)))
        red = lg.averaged_pendulum_lagrangian(pp, 3.0)
        assert red.kinetic == pytest.approx(0.5 * 2.0 * 1.5**2)
        assert red.potential == pytest.approx(0.5 * 2.0 * 9.81 * 1.5)
        assert red.omega2 == pytest.approx(9.81 / 1.5)

    def test_frequency_matches_effective_frequency(self):
        pp = vf.pendulum_scenario(1e-3)
        for t in np.linspace(0, 1e3, 11):
            assert lg.averaged_pendulum_lagrangian(pp, t).omega2 == pytest.approx(
                pendulum_effective_frequency(pp, t), rel=1e-13
            )

    def test_reduced_flow_tracks_full_flow(self):
        eps = 1e-2
        pp = PendulumParams(
            m=Harmonic(1.0, cos=0.1),
            l=Harmonic(1.0, sin=0.1),
            v=Harmonic(0.0, cos=0.05, sin=0.05),
            g=9.81,
            slowness=SlownessSpec(eps, (0.0, 1.0 / eps)),
        )
        span = pp.slowness.t_span
        om = pp.omega_max(span)
        full = integrate(pendulum_flow(pp), [0.1, 0.0], span, 1e-12, omega_max=om)
        red = integrate(lg.reduced_pendulum_flow(pp), [0.1, 0.0], span, 1e-12, t_eval=full.t)

        g_full = pp.to_gho(full.t)
        parts = [lg.averaged_pendulum_lagrangian(pp, t) for t in full.t]
        g_red = GhoParams(
            np.array([2 * r.potential for r in parts]),
            np.zeros(len(parts)),
            np.array([1 / (2 * r.kinetic) for r in parts]),
        )
        th_full = unwrap_phases(amplitude_phase(full.y[:, 0], full.y[:, 1], g_full)[1])
        th_red = unwrap_phases(amplitude_phase(red.y[:, 0], red.y[:, 1], g_red)[1])
        total_full = th_full[-1] - th_full[0]
        assert abs(total_full) > 100
        assert abs((th_red[-1] - th_red[0]) - total_full) < 0.05
