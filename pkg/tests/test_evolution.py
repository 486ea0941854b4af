import math
import time

import numpy as np
import pytest

from resonant_breathing.ansatz import AnsatzParams, ansatz_state
from resonant_breathing.couplings import BreathingVector, CouplingTensor, gen_conformal, gen_nls1d
from resonant_breathing.evolution import (ModeState, breathing_transform, breathing_value,
                                          conserved_report, energy, evolve, hamiltonian, number,
                                          rhs)
from resonant_breathing.polyspace import evaluate, gradient_abar, poisson_bracket

from conftest import random_state


@pytest.fixture(scope="module")
def nls8():
    return gen_nls1d(8)


@pytest.fixture(scope="module")
def conf16():
    return gen_conformal(16)


class TestRhs:
    def test_zero_state(self, nls8):
        assert np.all(rhs(nls8, np.zeros(9)) == 0)

    def test_single_mode(self, nls8):
        A = 0.7 - 0.2j
        s = np.zeros(9, complex)
        s[0] = A
        r = rhs(nls8, ModeState(s))
        assert abs(r[0] - 1j * nls8.get(0, 0, 0, 0) * abs(A) ** 2 * A) < 1e-15
        assert np.all(r[1:] == 0)

    def test_explicit_loop(self, rng):
        C = gen_conformal(5)
        a = random_state(rng, 5)
        ref = np.zeros(6, complex)
        for n in range(6):
            for m in range(6):
                for k in range(n + m + 1):
                    l = n + m - k
                    if k <= 5 and l <= 5:
                        ref[n] += 1j * C.get(n, m, k, l) * a[m].conj() * a[k] * a[l]
        assert np.max(np.abs(rhs(C, a) - ref)) < 1e-14

    @pytest.mark.parametrize("gen", [gen_nls1d, gen_conformal])
    def test_polynomial_gradient(self, gen, rng):
        # the equations of motion equal (i/2) dH_res/dabar with H_res over ordered quartets
        C = gen(8)
        a = random_state(rng, 8)
        g = gradient_abar(C.hamiltonian_poly(), a)
        assert np.max(np.abs(rhs(C, a) - 0.5j * g)) < 1e-12

    def test_finite_difference_gradient(self, nls8, rng):
        a = random_state(rng, 8)
        H = nls8.hamiltonian_poly()
        h = 1e-6
        fd = np.empty(9, complex)
        for n in range(9):
            e = np.zeros(9)
            e[n] = h
            # d/dabar = (d/dx + i d/dy)/2 for a = x + i y
            dx = (evaluate(H, a + e) - evaluate(H, a - e)) / (2 * h)
            dy = (evaluate(H, a + 1j * e) - evaluate(H, a - 1j * e)) / (2 * h)
            fd[n] = 0.5 * (dx + 1j * dy)
        assert np.max(np.abs(rhs(nls8, a) - 0.5j * fd)) < 1e-6

    def test_hamiltonian_matches_polynomial(self, conf16, rng):
        s = ansatz_state(AnsatzParams(1, 0.4j, 0.3, 0.5), 16)
        assert abs(hamiltonian(conf16, s) - evaluate(conf16.hamiltonian_poly(), s.amps)) < 1e-12

    def test_mismatched_state(self, nls8):
        with pytest.raises(ValueError):
            rhs(nls8, np.zeros(5))

    def test_cubic_scaling(self, rng):
        def best_time(C, a, reps=10):
            t = []
            for _ in range(reps):
                t0 = time.perf_counter()
                for _ in range(10):
                    rhs(C, a)
                t.append(time.perf_counter() - t0)
            return min(t)
        C32, C64 = gen_nls1d(32), gen_nls1d(64)
        a32, a64 = random_state(rng, 32), random_state(rng, 64)
        rhs(C32, a32), rhs(C64, a64)
        # interleaved rounds, median ratio: robust to load spikes on either size
        ratios = [best_time(C64, a64) / best_time(C32, a32) for _ in range(7)]
        assert 6.0 <= float(np.median(ratios)) <= 10.0


class TestEvolve:
    def test_single_mode_phase(self, nls8):
        A = 0.9 + 0.3j
        s = np.zeros(9, complex)
        s[0] = A
        tr = evolve(nls8, ModeState(s), 10.0, tol=1e-12)
        exact = np.exp(1j * nls8.get(0, 0, 0, 0) * abs(A) ** 2 * 10) * A
        assert abs(tr.amps[-1, 0] - exact) < 1e-10
        assert np.all(tr.amps[-1, 1:] == 0)

    def test_time_reversal(self, conf16, rng):
        s0 = ModeState(random_state(rng, 16, decay=0.3))
        fwd = evolve(conf16, s0, 5.0, tol=1e-12)
        back = evolve(conf16, ModeState(fwd.amps[-1].conj()), 5.0, tol=1e-12)
        assert np.max(np.abs(back.amps[-1].conj() - s0.amps)) < 1e-8

    def test_self_convergence(self, conf16, rng):
        s0 = ModeState(random_state(rng, 16, decay=0.3))
        ref = evolve(conf16, s0, 3.0, tol=1e-13).amps[-1]
        errs = [np.max(np.abs(evolve(conf16, s0, 3.0, tol=t).amps[-1] - ref))
                for t in (1e-7, 1e-9, 1e-11)]
        assert errs[0] > errs[1] > errs[2]

    def test_samples(self, nls8, rng):
        tr = evolve(nls8, ModeState(random_state(rng, 8, decay=0.5)), 2.0, samples=11)
        assert len(tr) == 11 and tr.tau[0] == 0 and tr.tau[-1] == 2.0
        assert tr.state(3).tau == pytest.approx(0.6)

    def test_tol_range(self, nls8):
        with pytest.raises(ValueError):
            evolve(nls8, ModeState(np.ones(9)), 1.0, tol=1e-3)

    def test_deterministic(self, conf16, rng):
        s0 = ModeState(random_state(rng, 16, decay=0.3))
        a = evolve(conf16, s0, 2.0, samples=5).amps
        b = evolve(conf16, s0, 2.0, samples=5).amps
        assert np.array_equal(a, b)


class TestConserved:
    def test_random_state_drifts(self, rng):
        C = gen_nls1d(16)
        tr = evolve(C, ModeState(random_state(rng, 16, decay=0.2)), 20.0, tol=1e-10, samples=41)
        rep = conserved_report(tr, C, BreathingVector(0.0))
        assert rep.drifts["N"] < 1e-8 and rep.drifts["E"] < 1e-8 and rep.drifts["H_res"] < 1e-8
        assert rep.cauchy_schwarz_ok and np.all(rep.N >= 0) and np.all(rep.E >= 0)

    def test_closure_identity_on_ansatz(self, conf16):
        s = ansatz_state(AnsatzParams(1, 0.2, 0.2, 0.5), 16)
        tr = evolve(conf16, s, 5.0, samples=11)
        rep = conserved_report(tr, conf16, BreathingVector(0.5))
        expected = 1j * (rep.N + 2 * rep.E * 0.5)
        assert np.max(np.abs(rep.closure - expected)) < 1e-10

    def test_closure_matches_bracket(self, rng):
        K = 5
        bv = BreathingVector(0.5)
        B0 = bv.b0_poly(K)
        a = random_state(rng, K)
        direct = evaluate(poisson_bracket(B0.conjugate(), B0), a)
        tr = evolve(gen_conformal(K), ModeState(a), 0.0)
        rep = conserved_report(tr, gen_conformal(K), bv)
        assert abs(rep.closure[0] - direct) < 1e-12
        assert abs(rep.B0[0] - breathing_value(a, bv)) < 1e-15

    def test_b0_drifts_when_identity_broken(self):
        C = gen_conformal(24)
        s = ansatz_state(AnsatzParams(1, 0.4j, 0.3, 0.5), 24)
        good = conserved_report(evolve(C, s, 10.0, samples=21), C, BreathingVector(0.5))
        bad_C = C.perturbed((0, 0, 0, 0), 1e-2, relative=True)
        bad = conserved_report(evolve(bad_C, s, 10.0, samples=21), bad_C, BreathingVector(0.5))
        assert good.drifts["B0_abs"] < 1e-8
        assert bad.drifts["B0_abs"] > 1e-4
        assert bad.drifts["N"] < 1e-8 and bad.drifts["E"] < 1e-8

    def test_summary_is_json_ready(self, nls8, rng):
        import json
        tr = evolve(nls8, ModeState(random_state(rng, 8, decay=0.5)), 1.0, samples=3)
        json.dumps(conserved_report(tr, nls8, BreathingVector(0.0)).summary())


class TestBreathingTransform:
    def test_identity(self, nls8, rng):
        s = ModeState(random_state(rng, 8))
        assert np.array_equal(breathing_transform(s, 0, BreathingVector(0)).amps, s.amps)

    def test_explicit_form(self):
        bv = BreathingVector(0.5)
        s = ModeState(np.array([1.0, 2.0, 3.0]))
        eta = 0.05 + 0.02j
        out = breathing_transform(s, eta, bv).amps
        b = bv.array(2)
        assert out[0] == pytest.approx(1 + 1j * eta * b[0] * 2)
        assert out[1] == pytest.approx(2 + 1j * eta * b[1] * 3 + 1j * np.conj(eta) * b[0] * 1)
        assert out[2] == pytest.approx(3 + 1j * np.conj(eta) * b[1] * 2)

    def test_first_order_regime_enforced(self):
        with pytest.raises(ValueError):
            breathing_transform(ModeState(np.ones(3)), 0.2, BreathingVector(0))

    @pytest.mark.parametrize("system,lam", [("nls", 0.0), ("conformal", 0.5)])
    def test_quadratic_change(self, system, lam):
        K = 24
        C = gen_nls1d(K) if system == "nls" else gen_conformal(K)
        s = ansatz_state(AnsatzParams(0.8, 0.3 - 0.2j, 0.25 + 0.1j, lam), K)
        bv = BreathingVector(lam)
        H0, N0 = hamiltonian(C, s), number(s)
        dH = [abs(hamiltonian(C, breathing_transform(s, e, bv)) - H0) for e in (0.04j, 0.02j)]
        dN = [abs(number(breathing_transform(s, e, bv)) - N0) for e in (0.04j, 0.02j)]
        assert dH[0] / dH[1] == pytest.approx(4, abs=1.5)
        assert dN[0] / dN[1] == pytest.approx(4, abs=1.5)
