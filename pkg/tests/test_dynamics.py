"""Integrator certification: conservation, reversal, convergence order."""

import math

import numpy as np
import pytest

from cdsim.dynamics import (BASE_DT, CompiledField, EvolutionPlan,
                            compile_field, compile_static_field,
                            convergence_check, default_dt, evolve_ensemble,
                            evolve_point, evolve_points, hold_ensemble,
                            trajectory_samples)
from cdsim.ensemble import sample_harmonic_shell
from cdsim.errors import NonFinite
from cdsim.models import (INTEGRABLE, NONINTEGRABLE, RampSchedule)
from cdsim.polyalg import ANGULAR_MOMENTUM, PhasePoint

TWO_PI = 2.0 * math.pi


def hold_plan(model, beta, tau, dt=None):
    return EvolutionPlan(model, RampSchedule.hold(beta, tau),
                         dt=dt if dt else BASE_DT)


class TestHarmonicMotion:
    def test_full_period_returns(self):
        plan = hold_plan(INTEGRABLE, 0.0, TWO_PI)
        z1 = evolve_point(PhasePoint(1, 0, 0, 0), plan, 0.0, TWO_PI)
        for name in ("x", "y", "px", "py"):
            want = 1.0 if name == "x" else 0.0
            assert getattr(z1, name) == pytest.approx(want, abs=1e-10)

    def test_quarter_period(self):
        plan = hold_plan(INTEGRABLE, 0.0, TWO_PI)
        z = evolve_point(PhasePoint(1, 0, 0, 0), plan, 0.0, math.pi / 2)
        # x(t) = cos t, px(t) = -sin t
        assert z.x == pytest.approx(0.0, abs=1e-10)
        assert z.px == pytest.approx(-1.0, abs=1e-10)

    def test_whole_ensemble_periodicity(self):
        ens = sample_harmonic_shell(1.0, 64, 5)
        plan = hold_plan(INTEGRABLE, 0.0, TWO_PI)
        out = evolve_ensemble(ens, plan, 0.0, TWO_PI)
        np.testing.assert_allclose(out.points, ens.points, atol=1e-9)


class TestConservation:
    @pytest.mark.parametrize("model,beta", [
        (INTEGRABLE, 0.0), (INTEGRABLE, 0.229),
        (NONINTEGRABLE, 1.0), (NONINTEGRABLE, 5.0), (NONINTEGRABLE, 8.85),
    ])
    def test_energy_drift_all_protocol_betas(self, model, beta):
        h = model.hamiltonian(beta)
        z0 = np.array([[0.31, 0.4, -0.2, 0.5]])
        e0 = h.evaluate_many(z0)[0]
        out = evolve_points(z0, hold_plan(model, beta, 100.0), 0.0, 100.0)
        e1 = h.evaluate_many(out)[0]
        assert abs(e1 - e0) / abs(e0) < 1e-9

    def test_angular_momentum_conserved_radial_model(self):
        z0 = np.array([[0.7, -0.3, 0.2, 0.6]])
        l0 = ANGULAR_MOMENTUM.evaluate_many(z0)[0]
        out = evolve_points(z0, hold_plan(INTEGRABLE, 0.229, 100.0), 0.0, 100.0)
        l1 = ANGULAR_MOMENTUM.evaluate_many(out)[0]
        assert abs(l1 - l0) / abs(l0) < 1e-9

    def test_angular_momentum_drifts_in_coupled_model(self):
        z0 = np.array([[0.7, -0.3, 0.2, 0.6]])
        l0 = ANGULAR_MOMENTUM.evaluate_many(z0)[0]
        out = evolve_points(z0, hold_plan(NONINTEGRABLE, 1.0, 100.0), 0.0, 100.0)
        l1 = ANGULAR_MOMENTUM.evaluate_many(out)[0]
        assert abs(l1 - l0) > 1e-3  # distinguishes the two model families


class TestTimeReversal:
    @pytest.mark.parametrize("model,beta", [(INTEGRABLE, 0.229),
                                            (NONINTEGRABLE, 1.0)])
    def test_momentum_flip_round_trip(self, model, beta):
        plan = hold_plan(model, beta, 50.0)
        z0 = np.array([[0.5, 0.2, -0.4, 0.3]])
        fwd = evolve_points(z0, plan, 0.0, 50.0)
        flipped = fwd * np.array([1.0, 1.0, -1.0, -1.0])
        back = evolve_points(flipped, plan, 0.0, 50.0)
        final = back * np.array([1.0, 1.0, -1.0, -1.0])
        np.testing.assert_allclose(final, z0, atol=1e-8)


class TestEvolveEnsemble:
    def test_zero_duration_identity(self):
        ens = sample_harmonic_shell(1.0, 16, 0)
        plan = EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 0.229, 10.0))
        out = evolve_ensemble(ens, plan, 0.0, 0.0)
        assert np.array_equal(out.points, ens.points)

    def test_final_beta_in_meta(self):
        ens = sample_harmonic_shell(1.0, 8, 0)
        plan = EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 0.229, 1.0))
        out = evolve_ensemble(ens, plan, 0.0, 1.0)
        assert out.meta.beta == pytest.approx(0.229, rel=1e-14)

    def test_nonfinite_carries_point_index(self):
        # a far-out point under a huge quartic with an oversized step blows up
        pts = np.array([[0.1, 0.0, 0.0, 0.0], [50.0, 50.0, 0.0, 0.0]])
        plan = EvolutionPlan(NONINTEGRABLE, RampSchedule.hold(1e6, 10.0), dt=0.5)
        with pytest.raises(NonFinite) as err:
            evolve_points(pts, plan, 0.0, 10.0)
        assert err.value.point_index == 1


class TestConvergence:
    def test_rk4_order_ratio(self):
        sched = RampSchedule.smooth(0.0, 0.229, 10.0)
        z0 = PhasePoint(0.6, 0.1, 0.2, 0.8)
        coarse = convergence_check(z0, EvolutionPlan(INTEGRABLE, sched, dt=2e-3), 10.0)
        fine = convergence_check(z0, EvolutionPlan(INTEGRABLE, sched, dt=1e-3), 10.0)
        ratio = coarse.discrepancy / fine.discrepancy
        assert 12.0 <= ratio <= 20.0

    def test_default_dt_discrepancy_small(self):
        plan = hold_plan(INTEGRABLE, 0.0, 10.0)
        rep = convergence_check(PhasePoint(1, 0, 0, 0), plan, 10.0)
        assert rep.discrepancy < 1e-11

    def test_zero_duration(self):
        plan = hold_plan(INTEGRABLE, 0.229, 1.0)
        rep = convergence_check(PhasePoint(1, 0, 0, 0), plan, 0.0)
        assert rep.discrepancy == 0.0


class TestPlanValidation:
    def test_dt_must_resolve_ramp(self):
        with pytest.raises(ValueError):
            EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 1.0, 0.05), dt=1e-3)

    def test_fast_ramp_gets_fine_dt(self):
        plan = EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 1.0, 1e-4))
        assert plan.dt == pytest.approx(1e-7)

    def test_cd_needs_table(self):
        with pytest.raises(ValueError):
            EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 1.0, 1.0),
                          cd_order=2)


class TestCompiledField:
    def test_gradients_match_symbolic_partials(self):
        fld = compile_field(NONINTEGRABLE)
        beta = 1.7
        h = NONINTEGRABLE.hamiltonian(beta)
        # reconstruct rhs polynomials from the rows and compare against
        # symbolic Hamilton's equations
        want = [h.partial("px"), h.partial("py"),
                -1.0 * h.partial("x"), -1.0 * h.partial("y")]
        got = [dict() for _ in range(4)]
        for r in range(fld.coord.size):
            key = tuple(fld.exps[r])
            got[fld.coord[r]][key] = got[fld.coord[r]].get(key, 0.0) + \
                fld.cconst[r] + beta * fld.cbeta[r]
        for comp in range(4):
            for key, coef in want[comp].terms.items():
                assert got[comp].get(key, 0.0) == pytest.approx(coef, rel=1e-14)

    def test_static_field_energy_is_conserved_object(self):
        h = NONINTEGRABLE.hamiltonian(5.0)
        fld = compile_static_field(h)
        assert isinstance(fld, CompiledField)
        assert fld.offsets[-1] == fld.coord.size


class TestHoldEnsemble:
    def test_per_point_durations(self):
        ens = sample_harmonic_shell(1.0, 4, 9)
        durations = np.array([0.0, TWO_PI, 2 * TWO_PI, 0.5])
        out = hold_ensemble(ens, INTEGRABLE, 0.0, durations)
        # zero-duration and full-period points return to themselves
        np.testing.assert_allclose(out.points[0], ens.points[0], atol=1e-12)
        np.testing.assert_allclose(out.points[1], ens.points[1], atol=1e-9)
        np.testing.assert_allclose(out.points[2], ens.points[2], atol=1e-9)
        assert not np.allclose(out.points[3], ens.points[3], atol=1e-3)


class TestTrajectorySamples:
    def test_rows_and_energy_column(self):
        plan = EvolutionPlan(INTEGRABLE, RampSchedule.smooth(0.0, 0.229, 1.0))
        times = np.linspace(0.0, 1.0, 11)
        rows = trajectory_samples(PhasePoint(1, 0, 0, 0), plan, times)
        assert rows.shape == (11, 6)
        np.testing.assert_allclose(rows[:, 0], times)
        h0 = INTEGRABLE.hamiltonian(0.0)
        assert rows[0, 5] == pytest.approx(h0.evaluate(PhasePoint(1, 0, 0, 0)))
