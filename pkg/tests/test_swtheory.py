"""Slow-limit variance formulas and the quantum-block convergence oracle."""

import math

import numpy as np
import pytest

from cdsim.swtheory import (QuantumBlockSpec, SW_COEFFICIENTS, block_matrix,
                            quantum_block_moments, quantum_block_variance,
                            sw_variance)


class TestSwVariance:
    def test_zero_beta(self):
        assert sw_variance("integrable", 0.0) == 0.0

    def test_radial_protocol_strength(self):
        assert sw_variance("integrable", 0.229) == pytest.approx(
            0.229 ** 2 / 720.0, rel=1e-12)
        assert sw_variance("integrable", 0.229) == pytest.approx(7.284e-5, rel=1e-3)

    def test_coupled_unit_strength(self):
        assert sw_variance("nonintegrable", 1.0) == pytest.approx(
            7.0 / 2880.0, rel=1e-12)
        assert sw_variance("nonintegrable", 1.0) == pytest.approx(2.431e-3, rel=1e-3)

    def test_unit_scaling(self):
        # coefficient * E0^4 / (m^4 omega^8) * beta^2
        v = sw_variance("integrable", 0.5, E0=2.0, m=3.0, omega=1.5)
        want = (1.0 / 720.0) * 2.0 ** 4 / (3.0 ** 4 * 1.5 ** 8) * 0.25
        assert v == pytest.approx(want, rel=1e-12)

    def test_model_spec_accepted(self):
        from cdsim.models import INTEGRABLE
        assert sw_variance(INTEGRABLE, 0.1) == sw_variance("integrable", 0.1)

    def test_unknown_model(self):
        with pytest.raises(KeyError):
            sw_variance("harmonic1d", 0.1)

    def test_negative_beta_rejected(self):
        with pytest.raises(ValueError):
            sw_variance("integrable", -0.1)


def hand_block_n2_integrable():
    """Independent 3x3 oracle for N = 2, built from explicit ladder rules."""
    hbar = 0.5  # E0 / (omega N)
    pref = hbar ** 2 / 8.0
    diag = []
    for nx in (0, 1, 2):
        ny = 2 - nx
        diag.append(3 * nx ** 2 + 3 * ny ** 2 + 4 * nx * ny
                    + 5 * nx + 5 * ny + 4)
    m = np.diag(np.array(diag, dtype=float))
    # <2,0| (ax^dag)^2 ay^2 |0,2> = sqrt(1*2) * sqrt(2*1) = 2
    m[2, 0] = m[0, 2] = 2.0
    return pref * m


class TestBlockMatrix:
    def test_n2_hand_matrix(self):
        got = block_matrix(QuantumBlockSpec(N=2, model="integrable"))
        np.testing.assert_allclose(got, hand_block_n2_integrable(), rtol=1e-14)

    def test_n2_hand_variance(self):
        # exact rational value for the hand matrix: 1/288
        v = quantum_block_variance(QuantumBlockSpec(N=2, model="integrable"))
        assert v == pytest.approx(1.0 / 288.0, rel=1e-12)

    def test_hermitian(self):
        for model in SW_COEFFICIENTS:
            m = block_matrix(QuantumBlockSpec(N=17, model=model))
            np.testing.assert_array_equal(m, m.T)

    def test_diagonal_symmetric_under_nx_ny_swap(self):
        for model in SW_COEFFICIENTS:
            d = np.diag(block_matrix(QuantumBlockSpec(N=12, model=model)))
            np.testing.assert_allclose(d, d[::-1], rtol=1e-14)

    def test_hbar_convention(self):
        spec = QuantumBlockSpec(N=40, model="integrable", E0=2.0, omega=0.5)
        assert spec.hbar_eff * 40 == pytest.approx(2.0 / 0.5, rel=1e-14)

    def test_n_too_small(self):
        with pytest.raises(ValueError):
            QuantumBlockSpec(N=1, model="integrable")


class TestBlockConservation:
    def full_space_v0(self, model, cutoff, hbar):
        """Independent construction on the truncated two-mode Fock space."""
        a = np.diag(np.sqrt(np.arange(1, cutoff)), 1)
        n_op = a.T @ a
        eye = np.eye(cutoff)
        ax, ay = np.kron(a, eye), np.kron(eye, a)
        nx, ny = np.kron(n_op, eye), np.kron(eye, n_op)
        hop = ax.T @ ax.T @ ay @ ay
        if model == "integrable":
            poly = (3 * nx @ nx + 3 * ny @ ny + 4 * nx @ ny
                    + 5 * nx + 5 * ny + 4 * np.eye(cutoff ** 2))
        else:
            poly = (4 * nx @ ny + 2 * nx + 2 * ny + np.eye(cutoff ** 2))
        return hbar ** 2 / 8.0 * (hop + hop.T + poly), nx + ny

    @pytest.mark.parametrize("model", ["integrable", "nonintegrable"])
    def test_no_matrix_elements_between_blocks(self, model):
        cutoff = 9
        v0, n_tot = self.full_space_v0(model, cutoff, hbar=1.0)
        n_diag = np.rint(np.diag(n_tot)).astype(int)  # exact blocks
        different_block = n_diag[:, None] != n_diag[None, :]
        assert np.abs(v0[different_block]).max() == 0.0

    @pytest.mark.parametrize("model", ["integrable", "nonintegrable"])
    def test_block_agrees_with_block_builder(self, model):
        cutoff = 9
        n_block = 6
        spec = QuantumBlockSpec(N=n_block, model=model,
                                hbar_eff=1.0)  # compare in hbar = 1 units
        v0, n_tot = self.full_space_v0(model, cutoff, hbar=1.0)
        idx = np.nonzero(np.isclose(np.diag(n_tot), n_block))[0]
        # order the block basis by n_x, matching block_matrix
        nx_vals = idx // cutoff
        idx = idx[np.argsort(nx_vals)]
        sub = v0[np.ix_(idx, idx)]
        np.testing.assert_allclose(sub, block_matrix(spec), rtol=1e-12)


class TestClassicalLimit:
    def test_connected_needed_mean_nonzero(self):
        m = quantum_block_moments(QuantumBlockSpec(N=100, model="integrable"))
        assert m.mean > 0.1  # classical <V0> = E0^2/3 for the radial family
        assert m.second_moment > 10 * m.connected

    @pytest.mark.parametrize("model", ["integrable", "nonintegrable"])
    def test_fitted_limit_and_exponent(self, model):
        target = SW_COEFFICIENTS[model]
        v = {n: quantum_block_variance(QuantumBlockSpec(N=n, model=model))
             for n in (25, 50, 100, 200)}
        alpha = math.log2((v[50] - v[100]) / (v[100] - v[200]))
        assert 0.8 <= alpha <= 1.2
        limit = v[200] + (v[200] - v[100]) / (2.0 ** alpha - 1.0)
        assert abs(limit / target - 1.0) <= 0.02

    def test_monotone_convergence(self):
        vals = [quantum_block_variance(QuantumBlockSpec(N=n, model="integrable"))
                for n in (10, 20, 40, 80, 160)]
        assert all(b < a for a, b in zip(vals, vals[1:]))

    def test_mean_matches_classical_third(self):
        # classical block mean of the radial-family V0 is E0^2 / 3
        m = quantum_block_moments(QuantumBlockSpec(N=400, model="integrable"))
        assert m.mean == pytest.approx(1.0 / 3.0, rel=0.02)
