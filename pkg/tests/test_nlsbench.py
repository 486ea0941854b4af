import math

import numpy as np
import pytest

from resonant_breathing.errors import GridMismatch, ZeroBreathing
from resonant_breathing.evolution import energy, number
from resonant_breathing.nlsbench import (FieldState, HermiteGrid, breathing_phase_test,
                                         compare_resonant, cubic_term, hermite_transform,
                                         measure_breathing, mode_mixture, nls_evolve, omegas,
                                         shifted_gaussian, to_resonant_frame)
from resonant_breathing.couplings import nls_overlaps
from resonant_breathing.hermite import hermite_functions


class TestTransform:
    def test_ground_state_samples(self):
        g = HermiteGrid(10)
        c = hermite_transform(hermite_functions(0, g.x)[:, 0], g)
        e = np.zeros(11)
        e[0] = 1
        assert np.max(np.abs(c - e)) < 1e-12

    def test_round_trip(self, rng):
        g = HermiteGrid(24)
        c = rng.normal(size=25) + 1j * rng.normal(size=25)
        back = hermite_transform(hermite_transform(c, g, inverse=True), g)
        assert np.max(np.abs(back - c)) < 1e-12

    def test_orthonormality_to_48(self):
        g = HermiteGrid(48)
        Gm = g.to_coeffs(g.H.T)
        assert np.max(np.abs(Gm - np.eye(49))) < 1e-12

    def test_grid_too_small(self):
        with pytest.raises(GridMismatch):
            HermiteGrid(10, n_nodes=20)

    def test_shape_mismatch(self):
        g = HermiteGrid(4)
        with pytest.raises(GridMismatch):
            g.to_samples(np.ones(3))
        with pytest.raises(GridMismatch):
            g.to_coeffs(np.ones(7))

    def test_cubic_term_exact(self, rng):
        # projection of |Psi|^2 Psi equals the overlap contraction sum W conj(c) c c
        K = 6
        c = (rng.normal(size=K + 1) + 1j * rng.normal(size=K + 1)) / 3
        W = nls_overlaps(K)
        ref = np.einsum("nmkl,m,k,l->n", W, c.conj(), c, c)
        assert np.max(np.abs(cubic_term(c, HermiteGrid(K, scale=math.sqrt(2))) - ref)) < 1e-13


class TestEvolve:
    def test_linear_eigenmode(self):
        tr = nls_evolve(FieldState([1, 0, 0, 0]), 0.0, 7.0, samples=8)
        assert np.max(np.abs(np.abs(tr.coeffs[:, 0]) - 1)) < 1e-10
        assert np.max(np.abs(tr.coeffs[:, 0] - np.exp(-0.5j * tr.t))) < 1e-10

    def test_linear_mixture(self):
        tr = nls_evolve(mode_mixture({0: 0.6, 1: 0.8j}, 5), 0.0, 4.0, samples=5)
        assert np.allclose(np.abs(tr.coeffs[:, :2]), [0.6, 0.8], atol=1e-12)
        rel = np.angle(tr.coeffs[:, 0] / tr.coeffs[:, 1])
        assert np.allclose(np.unwrap(rel) - rel[0], tr.t, atol=1e-10)

    def test_norm_conserved(self):
        tr = nls_evolve(shifted_gaussian(0.5, 24), 0.05, 20.0, tol=1e-11, samples=21)
        n2 = np.sum(np.abs(tr.coeffs) ** 2, axis=1)
        assert np.max(np.abs(n2 - n2[0])) < 1e-9

    def test_negative_g(self):
        with pytest.raises(ValueError):
            nls_evolve(shifted_gaussian(0.5, 4), -1.0, 1.0)

    def test_norm_matches_position_space(self, rng):
        f = FieldState((rng.normal(size=9) + 1j * rng.normal(size=9)) * 0.3)
        g = HermiteGrid(8)
        psi = g.to_samples(f.coeffs)
        assert abs(np.sum(g.w * np.abs(psi) ** 2) - f.norm2()) < 1e-12


class TestBreathing:
    @pytest.mark.parametrize("coeffs", [[1, 0, 0], [0, 1, 0]])
    def test_parity_zero(self, coeffs):
        f = FieldState(coeffs)
        assert abs(measure_breathing(f)) < 1e-14
        assert abs(measure_breathing(f, "bilinear")) < 1e-14

    def test_shifted_gaussian(self):
        f = shifted_gaussian(0.5, 30)
        assert abs(measure_breathing(f) - 0.5) < 1e-12
        assert abs(measure_breathing(f, "bilinear") - 0.5) < 1e-12
        assert abs(f.norm2() - 1) < 1e-14

    def test_shifted_gaussian_samples(self):
        g = HermiteGrid(30)
        psi = g.to_samples(shifted_gaussian(-0.8, 30).coeffs)
        ref = hermite_functions(0, g.x + 0.8)[:, 0]
        assert np.max(np.abs(psi - ref)) < 1e-12

    def test_two_evaluations_agree(self, rng):
        for _ in range(5):
            f = FieldState((rng.normal(size=21) + 1j * rng.normal(size=21)) / 4)
            assert abs(measure_breathing(f) - measure_breathing(f, "bilinear")) < 1e-10

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            measure_breathing(FieldState([1, 0]), "spline")

    def test_linear_phase(self):
        tr = nls_evolve(shifted_gaussian(0.5, 24), 0.0, 20.0, samples=401)
        rep = breathing_phase_test(tr)
        assert rep.max_modulus_drift < 1e-10
        assert abs(abs(rep.phase_slope) - 1) < 1e-8
        assert rep.phase_slope > 0    # documented sign in the textbook frame

    def test_nonlinear_phase(self):
        tr = nls_evolve(shifted_gaussian(0.5, 24), 0.05, 20.0, tol=1e-11, samples=401)
        rep = breathing_phase_test(tr)
        assert rep.max_modulus_drift < 1e-6
        assert abs(abs(rep.phase_slope) - 1) < 1e-6

    def test_zero_breathing(self):
        tr = nls_evolve(FieldState([1, 0, 0, 0]), 0.05, 1.0, samples=3)
        with pytest.raises(ZeroBreathing):
            breathing_phase_test(tr)


class TestResonantComparison:
    def test_frame_map(self):
        c = np.array([1.0, 1j, 0.5])
        a = to_resonant_frame(c, 2.0)
        assert np.allclose(a, c.conj() * np.exp(-1j * omegas(2) * 2.0))

    def test_linear_stripped_frame_constant(self):
        f0 = mode_mixture({0: 0.5, 2: 0.3 - 0.1j, 3: 0.2j}, 8)
        tr = nls_evolve(f0, 0.0, 13.0, samples=27)
        a = to_resonant_frame(tr.coeffs, tr.t)
        assert np.max(np.abs(a - a[0])) < 1e-12

    def test_zero_coupling_metric(self):
        assert compare_resonant(mode_mixture({0: 0.8, 1: 0.5}, 6), 0.0, 1.0).metric == 0.0

    def test_small_coupling_metric(self):
        f0 = mode_mixture({0: 0.8, 1: 0.5, 2: 0.3}, 20)
        r = compare_resonant(f0, 0.02, 1.0)
        assert 0 < r.metric < 0.01
        assert r.drift_N < 1e-9
        # resonant flow conserves E exactly; the full flow only to O(g)
        res_E = np.abs(r.resonant) ** 2 @ np.arange(21)
        assert np.max(np.abs(res_E - res_E[0])) < 1e-9
        assert r.drift_E < 0.05 * 0.02     # O(g^2 t) = O(g * tau) at fixed slow time

    def test_energy_drift_is_order_g_squared_t(self):
        # at fixed slow time tau = g t, g^2 t = g tau, so halving g halves the drift
        f0 = mode_mixture({0: 0.8, 1: 0.5, 2: 0.3}, 20)
        d = [compare_resonant(f0, g, 1.0).drift_E for g in (0.02, 0.01)]
        assert 1.5 < d[0] / d[1] < 2.7
