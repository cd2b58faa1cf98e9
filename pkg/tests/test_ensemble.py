"""Shell samplers (exactness, moments, measure) and energy statistics."""

import math

import numpy as np
import pytest
from scipy.integrate import quad
from scipy.stats import kstest

from cdsim.ensemble import (Ensemble, EnsembleMeta, energy_stats,
                            sample_general_shell, sample_harmonic_shell,
                            sample_shell, stats_from_energies)
from cdsim.errors import RejectionStall
from cdsim.models import HARMONIC_1D, INTEGRABLE, NONINTEGRABLE


class TestHarmonicShell:
    def test_on_shell_exactly(self):
        ens = sample_harmonic_shell(1.0, 500, 1)
        h0 = INTEGRABLE.H0.evaluate_many(ens.points)
        np.testing.assert_allclose(h0, 1.0, rtol=1e-12)
        assert ens.meta.shell_width == 0.0

    def test_first_moment_vanishes(self):
        n = 1_000_000
        ens = sample_harmonic_shell(1.0, n, 12)
        x = ens.points[:, 0]
        se = x.std(ddof=1) / math.sqrt(n)
        assert abs(x.mean()) < 3 * se

    def test_second_moment(self):
        # uniform measure on the radius sqrt(2 E0) 3-sphere: <x^2> = 2 E0 / 4
        n = 1_000_000
        E0 = 1.0
        ens = sample_harmonic_shell(E0, n, 99)
        x2 = ens.points[:, 0] ** 2
        se = x2.std(ddof=1) / math.sqrt(n)
        assert x2.mean() == pytest.approx(2 * E0 / 4, abs=3 * se)

    def test_determinism_bit_for_bit(self):
        a = sample_harmonic_shell(1.0, 300, 42)
        b = sample_harmonic_shell(1.0, 300, 42)
        assert np.array_equal(a.points, b.points)
        c = sample_harmonic_shell(1.0, 300, 43)
        assert not np.array_equal(a.points, c.points)

    def test_oscillator_splitting_is_uniform(self):
        # (x^2+y^2)/(2 E0) should be uniform on [0, 1] (microcanonical split)
        n = 100_000
        ens = sample_harmonic_shell(1.0, n, 5)
        u = (ens.points[:, 0] ** 2 + ens.points[:, 1] ** 2) / 2.0
        stat = kstest(u, "uniform").statistic
        assert stat < 0.01


class TestGeneralShell:
    def test_acceptance_band(self):
        ens = sample_general_shell(NONINTEGRABLE, 5.0, 1.0, 300, 1e-3, 7)
        h = NONINTEGRABLE.hamiltonian(5.0).evaluate_many(ens.points)
        assert np.all(np.abs(h - 1.0) <= 5e-4)
        assert h.mean() == pytest.approx(1.0, abs=5e-4)

    def test_cross_sampler_moments_at_beta_zero(self):
        # rejection at beta = 0 must agree with the exact sphere sampler
        n = 20_000
        rej = sample_general_shell(NONINTEGRABLE, 0.0, 1.0, n, 1e-3, 3)
        exact = sample_harmonic_shell(1.0, n, 3)
        for col in range(4):
            a = rej.points[:, col] ** 2
            b = exact.points[:, col] ** 2
            se = math.hypot(a.std(ddof=1), b.std(ddof=1)) / math.sqrt(n)
            assert a.mean() == pytest.approx(b.mean(), abs=4 * se)

    def test_determinism(self):
        a = sample_general_shell(NONINTEGRABLE, 5.0, 1.0, 64, 1e-3, 21)
        b = sample_general_shell(NONINTEGRABLE, 5.0, 1.0, 64, 1e-3, 21)
        assert np.array_equal(a.points, b.points)

    def test_unreachable_energy(self):
        # H(beta) >= 0 with min 0 at the origin; E0 <= 0 is unreachable
        with pytest.raises(ValueError):
            sample_general_shell(NONINTEGRABLE, 1.0, 0.0, 10, 1e-3, 0)

    def test_stall_raises(self):
        with pytest.raises(RejectionStall):
            sample_general_shell(NONINTEGRABLE, 5.0, 1.0, 2, 1e-12, 0)


class TestSampleShellDispatch:
    def test_exact_sampler_wins(self):
        ens = sample_shell(HARMONIC_1D, 0.7, 1.0, 200, 9)
        assert ens.meta.sampler == "harmonic1d_exact"
        h = HARMONIC_1D.hamiltonian(0.7).evaluate_many(ens.points)
        np.testing.assert_allclose(h, 1.0, rtol=1e-12)
        assert np.all(ens.points[:, 1] == 0.0)
        assert np.all(ens.points[:, 3] == 0.0)

    def test_harmonic_at_beta_zero(self):
        ens = sample_shell(INTEGRABLE, 0.0, 1.0, 100, 4)
        assert ens.meta.sampler == "harmonic_shell"
        assert ens.meta.model == "integrable"

    def test_rejection_otherwise(self):
        ens = sample_shell(NONINTEGRABLE, 5.0, 1.0, 50, 4)
        assert ens.meta.sampler == "box_rejection"
        assert ens.meta.shell_width == pytest.approx(1e-3)


class TestEnsembleType:
    def test_needs_two_points(self):
        with pytest.raises(ValueError):
            Ensemble(points=np.zeros((1, 4)),
                     meta=EnsembleMeta(0, "t", "m", 0.0, 1.0, 0.0))

    def test_points_read_only(self):
        ens = sample_harmonic_shell(1.0, 10, 0)
        with pytest.raises(ValueError):
            ens.points[0, 0] = 5.0

    def test_save_round_trip(self, tmp_path):
        ens = sample_harmonic_shell(1.0, 16, 2)
        path = tmp_path / "ens.csv"
        ens.save(path)
        pts = np.loadtxt(path, delimiter=",", skiprows=1)
        np.testing.assert_allclose(pts, ens.points, rtol=1e-15)
        assert (tmp_path / "ens.csv.meta.json").exists()


class TestEnergyStats:
    def test_exact_shell_zero_variance(self):
        ens = sample_harmonic_shell(1.0, 1000, 8)
        st = energy_stats(ens, INTEGRABLE.H0)
        assert st.variance < 1e-20
        assert st.mean == pytest.approx(1.0, rel=1e-12)

    def test_two_point_hand_case(self):
        st = stats_from_energies(np.array([0.0, 2.0]))
        assert st.mean == 1.0
        assert st.variance == 2.0  # unbiased, n-1 denominator
        assert st.count == 2
        assert st.std_error_of_variance == 0.0

    def test_jackknife_matches_explicit_loop(self):
        rng = np.random.default_rng(17)
        v = rng.exponential(size=40)
        st = stats_from_energies(v)
        n = v.size
        loo = np.array([np.delete(v, i).var(ddof=1) for i in range(n)])
        want = math.sqrt((n - 1) / n * ((loo - loo.mean()) ** 2).sum())
        assert st.std_error_of_variance == pytest.approx(want, rel=1e-10)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(3)
        v = rng.normal(size=100)
        a = stats_from_energies(v)
        b = stats_from_energies(v[::-1].copy())
        assert a.variance == pytest.approx(b.variance, rel=1e-12)
        assert a.std_error_of_variance == pytest.approx(
            b.std_error_of_variance, rel=1e-10)

    def test_constant_shift_moves_mean_only(self):
        rng = np.random.default_rng(3)
        ens = sample_harmonic_shell(1.0, 500, 31)
        h = INTEGRABLE.hamiltonian(0.229)
        shifted = h + 7.5
        a = energy_stats(ens, h)
        b = energy_stats(ens, shifted)
        assert b.mean == pytest.approx(a.mean + 7.5, rel=1e-12)
        assert b.variance == pytest.approx(a.variance, rel=1e-9)

    def test_variance_against_shell_quadrature_oracle(self):
        # On the exact shell, H(beta) - E0 = beta E0^2 u^2 with u = r^2/(2 E0)
        # uniform on [0, 1]; Var = beta^2 E0^4 (E[u^4] - E[u^2]^2) by quadrature.
        beta, E0, n = 0.229, 1.0, 100_000
        m2, _ = quad(lambda u: u ** 2, 0.0, 1.0)
        m4, _ = quad(lambda u: u ** 4, 0.0, 1.0)
        want = beta ** 2 * E0 ** 4 * (m4 - m2 ** 2)
        ens = sample_harmonic_shell(E0, n, 77)
        st = energy_stats(ens, INTEGRABLE.hamiltonian(beta))
        assert st.variance == pytest.approx(want, abs=4 * st.std_error_of_variance)
