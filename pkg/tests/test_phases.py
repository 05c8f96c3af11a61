import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hannay_lab import verification as vf
from hannay_lab.dynamics import (
    PendulumParams,
    PendulumSchedule,
    PhaseSpaceState,
    gho_closed_form,
    gho_energy,
    gho_flow,
    integrate,
)
from hannay_lab.errors import NonOscillatory, NonOscillatoryOnSurface, UndersampledTrajectory, ZeroAmplitude
from hannay_lab.phases import (
    PhaseDecomposition,
    PhaseState,
    adiabatic_invariant,
    adiabatic_report,
    curvature_density,
    decompose,
    dynamical_phase,
    extract_phase,
    geometric_phase_line,
    geometric_phase_surface,
    integrate_window,
    pendulum_effective_frequency,
    pendulum_effective_phase,
    pendulum_phases,
    total_phase,
    unwrap_phases,
)
from hannay_lab.schedules import ConstantSchedule, GhoParams, Harmonic, LoopSpec, SlownessSpec, TrigLoop

# 30-digit mpmath quadrature of the loop alpha=2, beta=0.4 cos 2pi tau,
# gamma=1+0.4 sin 2pi tau over one period (frozen).
LOOP_THETA_G = 0.099506464497193475159
LOOP_OMEGA_TAU = 1.3703011356350251582

P212 = GhoParams(2.0, 1.0, 2.0)


def loop(eps=1e-3, **kw):
    return TrigLoop(2.0, Harmonic(cos=0.4), Harmonic(1.0, sin=0.4), SlownessSpec(eps, (0.0, 1.0 / eps)), **kw)


class TestExtraction:
    def test_origin_of_phase(self):
        ps = extract_phase((1.0, 0.0), GhoParams(1, 0, 1))
        assert (ps.r, ps.theta) == (1.0, 0.0)

    def test_quarter_turn(self):
        # (Q, P) = (0, -1) is a quarter period later for the unit oscillator
        ps = extract_phase((0.0, -1.0), GhoParams(1, 0, 1))
        assert ps.theta == pytest.approx(math.pi / 2, abs=1e-15)

    def test_round_trip_through_closed_form(self):
        w = math.sqrt(3.0)
        rng = np.random.default_rng(5)
        ref = extract_phase(gho_closed_form(P212, 1.0, 0.0), P212)
        for t in rng.uniform(0, 50, 100):
            ps = extract_phase(gho_closed_form(P212, 1.0, t), P212)
            d = (ps.theta - ref.theta - w * t + math.pi) % (2 * math.pi) - math.pi
            assert abs(d) < 1e-12
            assert ps.r == pytest.approx(ref.r, rel=1e-13)

    def test_zero_amplitude(self):
        with pytest.raises(ZeroAmplitude):
            extract_phase(PhaseSpaceState(0.0, 0.0), P212)

    def test_nonoscillatory(self):
        with pytest.raises(NonOscillatory):
            extract_phase((1.0, 0.0), GhoParams(1.0, 2.0, 1.0))

    def test_slow_loop_invariant_stays_close(self):
        # raw pointwise invariant carries an O(eps) ripple; 2e-3 bounds it at eps=1e-3
        eps = 1e-3
        sch = vf.hannay_loop(eps)
        p0, _ = sch.evaluate(0.0)
        tr = integrate_window(sch, [1.0, -p0.beta / p0.gamma], (0.0, 1.0 / eps), 1e-12, pad=0.0)
        rep = adiabatic_report(tr, sch)
        assert rep.drift_max < 2e-3
        assert rep.drift_max > 1e-5  # the ripple is real, not a tolerance artefact


class TestUnwrap:
    def test_three_periods(self):
        T = 3 * 2 * math.pi
        tr = integrate(gho_flow(lambda t: GhoParams(1, 0, 1)), [1.0, 0.0], (0.0, T), 1e-12)
        series = [extract_phase(PhaseSpaceState(q, p, t), GhoParams(1, 0, 1)) for t, (q, p) in zip(tr.t, tr.y)]
        assert total_phase(series) == pytest.approx(6 * math.pi, abs=1e-9)

    def test_single_sample(self):
        assert total_phase([PhaseState(1.0, 0.3)]) == 0.0
        np.testing.assert_array_equal(unwrap_phases([0.3]), [0.3])

    def test_undersampled(self):
        t = np.array([0.0, 1.0, 2.0])
        with pytest.raises(UndersampledTrajectory):
            unwrap_phases([0.0, 3.0, -0.3], t, omega=4.0)

    @settings(deadline=None, max_examples=100)
    @given(st.lists(st.floats(-3.0, 3.0), min_size=2, max_size=60))
    def test_steps_land_in_half_open_interval(self, steps):
        raw = np.cumsum(steps)
        wrapped = np.angle(np.exp(1j * raw))
        un = unwrap_phases(wrapped)
        np.testing.assert_allclose(np.cos(un), np.cos(raw), atol=1e-9)
        d = np.diff(un)
        assert np.all(d > -math.pi - 1e-12) and np.all(d <= math.pi + 1e-12)


class TestInvariant:
    def test_unit_oscillator(self):
        assert adiabatic_invariant(PhaseState(1.0, 0.0), GhoParams(1, 0, 1)) == 0.5

    def test_static_pendulum(self):
        m, l, g, r = 1.3, 0.8, 9.81, 0.7
        pp = PendulumParams(m=m, l=l, v=0.0, g=g, slowness=SlownessSpec(1e-3, (0.0, 10.0)))
        got = adiabatic_invariant(r, pp.to_gho(0.0))
        assert got == pytest.approx(0.5 * m * math.sqrt(g) * l**1.5 * r * r, rel=1e-14)

    @settings(deadline=None, max_examples=200)
    @given(
        a=st.floats(0.1, 5.0),
        g=st.floats(0.1, 5.0),
        frac=st.floats(-0.99, 0.99),
        Q=st.floats(-3, 3),
        P=st.floats(-3, 3),
    )
    def test_energy_over_frequency(self, a, g, frac, Q, P):
        p = GhoParams(a, frac * math.sqrt(a * g), g)
        if math.hypot(Q, P) < 1e-6:
            return
        I = adiabatic_invariant(extract_phase((Q, P), p), p)
        w = math.sqrt(a * g - p.beta**2)
        assert I == pytest.approx(gho_energy((Q, P), p) / w, rel=1e-12)


class TestDynamicalPhase:
    def test_unit_oscillator(self):
        sch = ConstantSchedule(1.0, 0.0, 1.0, SlownessSpec(1.0, (0.0, 10.0)))
        assert dynamical_phase(sch, 0.0, 2 * math.pi) == pytest.approx(2 * math.pi, abs=1e-12)

    def test_cross_term(self):
        sch = ConstantSchedule(2.0, 1.0, 2.0, SlownessSpec(1.0, (0.0, 1.0)))
        assert dynamical_phase(sch, 0.0, 1.0) == pytest.approx(math.sqrt(3.0), abs=1e-12)

    def test_loop_matches_oracle(self):
        assert dynamical_phase(loop(1e-3), 0.0, 1e3) == pytest.approx(LOOP_OMEGA_TAU / 1e-3, rel=1e-13)

    def test_halving_epsilon_doubles(self):
        a = dynamical_phase(loop(1e-3), 0.0, 1e3)
        b = dynamical_phase(loop(5e-4), 0.0, 2e3)
        assert b == pytest.approx(2 * a, rel=1e-9)


class TestGeometricPhase:
    def test_matches_oracle(self):
        assert geometric_phase_line(loop(), 0.0, 1e3) == pytest.approx(LOOP_THETA_G, abs=1e-12)

    def test_epsilon_independent(self):
        a = geometric_phase_line(loop(1e-3), 0.0, 1e3)
        b = geometric_phase_line(loop(1e-2), 0.0, 1e2)
        assert a == pytest.approx(b, abs=1e-12)

    def test_no_cross_term_no_phase(self):
        sch = TrigLoop(Harmonic(2.0, cos=0.4), 0.0, Harmonic(1.0, sin=0.4), SlownessSpec(1e-3, (0.0, 1e3)))
        assert geometric_phase_line(sch, 0.0, 1e3) == 0.0

    def test_reversal_negates(self):
        fwd = geometric_phase_line(loop(), 0.0, 1e3)
        rev = geometric_phase_line(loop(orientation=-1), 0.0, 1e3)
        assert rev == pytest.approx(-fwd, abs=1e-12)

    def test_surface_matches_line(self):
        assert geometric_phase_surface(LoopSpec(loop())) == pytest.approx(LOOP_THETA_G, abs=1e-6)

    def test_surface_reversal(self):
        s = LoopSpec(loop())
        assert geometric_phase_surface(s.reversed()) == pytest.approx(-geometric_phase_surface(s), abs=1e-9)

    def test_zero_area_loop(self):
        sch = TrigLoop(Harmonic(2.0), Harmonic(0.3), Harmonic(1.0), SlownessSpec(1e-3, (0.0, 1e3)))
        assert geometric_phase_surface(LoopSpec(sch)) == 0.0

    def test_planar_beta_free_loop(self):
        sch = TrigLoop(Harmonic(2.0, cos=0.4), 0.0, Harmonic(1.0, sin=0.4), SlownessSpec(1e-3, (0.0, 1e3)))
        assert geometric_phase_surface(LoopSpec(sch)) == pytest.approx(0.0, abs=1e-12)

    def test_curvature_guard(self):
        x = np.array([[1.0], [2.0], [1.0]])
        with pytest.raises(NonOscillatoryOnSurface):
            curvature_density(x, np.ones((3, 1)), np.ones((3, 1)))

    def test_connection_is_not_exact(self):
        # with alpha fixed the 1-form is A_beta dbeta + A_gamma dgamma with
        # A_beta = -1/(2 omega), A_gamma = beta/(2 gamma omega)
        rng = np.random.default_rng(11)
        alpha, h = 2.0, 1e-6

        def A(b, g):
            w = math.sqrt(alpha * g - b * b)
            return -1.0 / (2 * w), b / (2 * g * w)

        hits = 0
        for _ in range(100):
            g = rng.uniform(0.5, 2.0)
            b = rng.uniform(-0.9, 0.9) * math.sqrt(alpha * g)
            dAb_dg = (A(b, g + h)[0] - A(b, g - h)[0]) / (2 * h)
            dAg_db = (A(b + h, g)[1] - A(b - h, g)[1]) / (2 * h)
            hits += abs(dAb_dg - dAg_db) > 1e-6
        assert hits >= 95


class TestDecompose:
    def test_constant_parameters(self):
        sch = ConstantSchedule(2.0, 1.0, 2.0, SlownessSpec(1e-2, (-200.0, 300.0)))
        tr = integrate_window(sch, [1.0, -0.5], (0.0, 100.0))
        d = decompose(tr, sch, window=(0.0, 100.0))
        assert d.theta_g_line == 0.0
        assert d.theta_g_surface is None
        assert d.theta_d == pytest.approx(100 * math.sqrt(3.0), rel=1e-13)
        assert abs(d.residual) < 1e-8
        assert d.invariant_drift < 1e-10

    def test_slow_loop(self):
        d = vf.loop_decomposition(1e-3)
        assert d.theta_g_line == pytest.approx(LOOP_THETA_G, abs=1e-12)
        assert d.theta_g_surface == pytest.approx(LOOP_THETA_G, abs=1e-6)
        assert abs(d.residual) < 0.05 * abs(d.theta_g_line)
        assert d.invariant_drift < 1e-9

    def test_residual_shrinks_with_epsilon(self):
        r1 = abs(vf.loop_decomposition(2e-3).residual)
        r2 = abs(vf.loop_decomposition(1e-3).residual)
        assert r1 / r2 >= 1.4

    def test_json_record(self):
        d = vf.loop_decomposition(1e-3)
        rec = d.to_dict()
        assert tuple(rec) == PhaseDecomposition.JSON_KEYS
        assert "theta_total_raw" not in d.to_json()

    def test_window_end_must_be_sample(self):
        sch = ConstantSchedule(1.0, 0.0, 1.0, SlownessSpec(1e-2, (0.0, 100.0)))
        tr = integrate(gho_flow(sch), [1.0, 0.0], (0.0, 100.0), 1e-10)
        with pytest.raises(ValueError):
            decompose(tr, sch, window=(0.0, 50.0 + 1e-3))

    def test_too_fast(self):
        sch = ConstantSchedule(1.0, 0.0, 1.0, SlownessSpec(0.5, (0.0, 10.0)))
        tr = integrate(gho_flow(sch), [1.0, 0.0], (0.0, 10.0), 1e-10)
        with pytest.raises(ValueError, match="too fast"):
            decompose(tr, sch)


class TestPendulumPhases:
    @staticmethod
    def pp(m=1.0, l=1.0, v=0.0):
        return PendulumParams(m=m, l=l, v=v, g=9.81, slowness=SlownessSpec(1e-3, (0.0, 1e3)))

    def test_static_suspension(self):
        d, g = pendulum_phases(self.pp(l=2.0), 0.0, 1e3)
        assert g == 0.0
        assert d == pytest.approx(1e3 * math.sqrt(9.81 / 2.0), rel=1e-13)

    def test_constant_speed_constant_mass(self):
        assert pendulum_phases(self.pp(v=0.3), 0.0, 1e3)[1] == 0.0

    def test_effective_frequency_without_speed(self):
        pp = self.pp(m=Harmonic(1.0, cos=0.1), l=Harmonic(1.0, sin=0.1))
        t = np.linspace(0, 1e3, 7)
        np.testing.assert_allclose(pendulum_effective_frequency(pp, t), 9.81 / pp.l.value(1e-3 * t), rtol=1e-15)

    def test_agrees_with_gho_route(self):
        pp = vf.pendulum_scenario(1e-3, moving_length=False)
        d, g = pendulum_phases(pp, 0.0, 1e3)
        sch = PendulumSchedule(pp)
        assert abs(g) > 1e-4
        assert d == pytest.approx(dynamical_phase(sch, 0.0, 1e3), abs=1e-9)
        assert g == pytest.approx(geometric_phase_line(sch, 0.0, 1e3), abs=1e-9)

    def test_effective_phase_splits(self):
        pp = vf.pendulum_scenario(1e-3)
        d, g = pendulum_phases(pp, 0.0, 1e3)
        assert abs(pendulum_effective_phase(pp, 0.0, 1e3) - d - g) < 1e-3
