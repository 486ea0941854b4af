import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from resonant_breathing.couplings import BreathingVector, gen_conformal, gen_nls1d
from resonant_breathing.errors import DegreeMismatch, IrrationalLadder
from resonant_breathing.nlsbench import breathing_polys
from resonant_breathing.polyspace import (PhasePoly, lowering_poly, number_poly, poisson_bracket,
                                          quadratic_hamiltonian)
from resonant_breathing.reduction import (FrequencyLadder, as_rational, channel_of, check_condB1,
                                          phase_shift, reduce_with_census, resonant_mask,
                                          time_average, verify_breathing_orders,
                                          weighted_monomials)

from conftest import gaussian_int_polys


def mono(abar, a, c=1.0, max_mode=8):
    return PhasePoly({(tuple(abar), tuple(a)): c}, max_mode)


def ladder_h0(lad: FrequencyLadder) -> PhasePoly:
    return quadratic_hamiltonian([float(w) for w in lad.omegas()])


class TestRationals:
    @pytest.mark.parametrize("x,expected", [("1/2", Fraction(1, 2)), (2, Fraction(2)),
                                            (Fraction(3, 2), Fraction(3, 2)), (" 5/3 ", Fraction(5, 3))])
    def test_accepted(self, x, expected):
        assert as_rational(x) == expected

    @pytest.mark.parametrize("x", [0.5, "0.333", "1e-3", "abc", "1/0", True])
    def test_rejected(self, x):
        with pytest.raises(IrrationalLadder):
            as_rational(x)

    def test_ladder_needs_positive_offset(self):
        with pytest.raises(ValueError):
            FrequencyLadder(0, 3)

    def test_net_frequency(self):
        lad = FrequencyLadder("1/2", 4)
        assert lad.net_frequency(((2, 0), (1, 1))) == 0
        assert lad.net_frequency(((1,), (0, 0, 0))) == 0
        assert lad.net_frequency(((0,), (1,))) == -1
        wm = weighted_monomials(mono([1], [0, 0, 0]), FrequencyLadder(1, 4))
        assert wm[0].net_frequency == -1


class TestTimeAverage:
    def test_ladder_cancellation_kept(self):
        for w0 in ("1/3", "1/2", 1, 7):
            p = mono([2, 0], [1, 1])
            assert time_average(p, FrequencyLadder(w0, 8)) == p

    def test_s_channel_depends_on_offset(self):
        p = mono([1], [0, 0, 0])
        assert not time_average(p, FrequencyLadder(1, 8))
        assert time_average(p, FrequencyLadder("1/2", 8)) == p

    @pytest.mark.parametrize("w0", ["1/7", "1/2", 1, "5/2"])
    def test_four_a_never_survives(self, w0):
        assert not time_average(mono([], [0, 1, 2, 3]), FrequencyLadder(w0, 8))
        assert not time_average(mono([0, 1, 2, 3], []), FrequencyLadder(w0, 8))

    def test_requires_ladder(self):
        with pytest.raises(TypeError):
            time_average(mono([0], [0]), "1/2")

    @given(gaussian_int_polys(max_mode=5, max_degree=4, max_terms=8),
           st.sampled_from(["1/2", "1", "3/2", "1/3", "2"]))
    def test_idempotent(self, p, w0):
        lad = FrequencyLadder(w0, 5)
        once = time_average(p, lad)
        assert time_average(once, lad) == once

    @given(gaussian_int_polys(max_mode=5, max_degree=4, max_terms=8),
           st.sampled_from(["1/2", "1", "3/2"]), st.floats(-10, 10))
    def test_output_is_phase_invariant(self, p, w0, theta):
        lad = FrequencyLadder(w0, 5)
        avg = time_average(p, lad)
        assert phase_shift(avg, theta, lad) == avg

    @given(gaussian_int_polys(max_mode=5, max_degree=4, max_terms=8),
           st.sampled_from(["1/2", "1", "3/2", "1/3"]))
    def test_output_commutes_with_h0(self, p, w0):
        # zero net frequency <=> Poisson-commutes with the ladder H0
        lad = FrequencyLadder(w0, 5)
        avg = time_average(p, lad)
        assert poisson_bracket(ladder_h0(lad), avg).max_abs_coeff() < 1e-12
        rest = p - avg
        for key, c in rest.items():
            assert lad.net_frequency(key) != 0

    @given(st.lists(st.tuples(st.integers(0, 6), st.integers(0, 6), st.integers(0, 6),
                              st.integers(0, 6), st.integers(0, 4)), min_size=1, max_size=12),
           st.sampled_from(["1/2", "1", "3/2", "2"]))
    def test_quartic_census_only_c_and_s(self, quads, w0):
        terms = {}
        for n, m, k, l, nb in quads:
            idx = (n, m, k, l)
            terms[(idx[:nb], idx[nb:])] = 1.0
        p = PhasePoly(terms, 6)
        res, census = reduce_with_census(p, FrequencyLadder(w0, 6))
        assert census.c_terms + census.s_terms == len(res)
        assert census.dropped == len(p) - len(res)
        for key, _ in res.items():
            assert channel_of(key) in ("C", "S")
            if channel_of(key) == "C":
                assert sum(key[0]) == sum(key[1])

    def test_mask_matches_fraction_arithmetic(self, rng):
        lad = FrequencyLadder("3/2", 10)
        keys = []
        for _ in range(300):
            nb = int(rng.integers(0, 5))
            na = 4 - nb
            keys.append((tuple(sorted(rng.integers(0, 11, nb))), tuple(sorted(rng.integers(0, 11, na)))))
        mask = resonant_mask([sum(k[0]) for k in keys], [sum(k[1]) for k in keys],
                             [len(k[0]) for k in keys], [len(k[1]) for k in keys], lad.omega0)
        assert list(mask) == [lad.net_frequency(k) == 0 for k in keys]


class TestPhaseShift:
    def test_zero_angle(self):
        p = mono([0], [1], 2.0) + mono([3], [0, 0], 1j)
        assert phase_shift(p, 0.0, FrequencyLadder(1, 8)) == p

    def test_b0_full_and_half_turn(self):
        lad = FrequencyLadder("1/2", 6)
        B0 = lowering_poly(np.ones(6), 6)
        assert (phase_shift(B0, 2 * math.pi, lad) - B0).max_abs_coeff() < 1e-14
        assert (phase_shift(B0, math.pi, lad) + B0).max_abs_coeff() < 1e-14

    def test_is_substitution(self, rng):
        # multiplying by e^{i theta nf} equals evaluating at a_n e^{-i theta omega_n}
        lad = FrequencyLadder("1/3", 4)
        p = mono([0, 1], [2], 1.0, 4) + mono([4], [1, 1], 0.5, 4)
        s = rng.normal(size=5) + 1j * rng.normal(size=5)
        th = 0.37
        w = np.array([float(x) for x in lad.omegas()])
        assert abs(phase_shift(p, th, lad)(s) - p(s * np.exp(-1j * th * w))) < 1e-13


class TestCondB1:
    def test_zero_holds(self):
        assert check_condB1(PhasePoly.zero(3), "1/2").holds

    def test_cubic_term(self):
        t = mono([0], [1, 1])
        assert check_condB1(t, 2).holds
        r = check_condB1(t, "1/3")
        assert not r.holds and len(r.violating_terms) == 1

    def test_quartic_half_integer(self):
        assert check_condB1(mono([0, 1, 2], [3]), "1/2").holds
        assert not check_condB1(mono([0, 1, 2], [3]), "1/3").holds

    @given(gaussian_int_polys(max_mode=4, max_degree=4), st.sampled_from(["1/3", "1/2", "2/7", "5"]))
    def test_balanced_always_holds(self, p, w0):
        bal = p.filter(lambda k, c: len(k[0]) == len(k[1]))
        assert check_condB1(bal, w0).holds

    @pytest.mark.parametrize("theta_turns", [1])
    def test_equivalent_to_full_turn_invariance(self, theta_turns):
        lad = FrequencyLadder("1/3", 4)
        p = mono([0], [1, 1], 1.0, 4) + mono([0, 1], [1, 0], 1.0, 4)
        shifted = phase_shift(p, 2 * math.pi * theta_turns, lad)
        invariant = (shifted - p).max_abs_coeff() < 1e-12
        assert invariant == check_condB1(p, "1/3").holds


class TestBreathingOrders:
    def test_linear_case(self, rng):
        K = 10
        lad = FrequencyLadder("3/2", K)
        B0 = lowering_poly(rng.uniform(0.5, 2, K), K)
        rep = verify_breathing_orders(ladder_h0(lad), PhasePoly.zero(K), B0, PhasePoly.zero(K))
        assert rep.zeroth_max < 1e-12 and not rep.first and rep.holds()

    def test_nls_data(self):
        K = 8
        H0, H1, B0, B1 = breathing_polys(K + 1)
        rep = verify_breathing_orders(H0, H1, B0, B1, window=K)
        assert rep.zeroth_max < 1e-10 and rep.first_max < 1e-10
        assert rep.second_max == 0 and rep.holds(1e-10)

    def test_corrupted_b0(self):
        K = 8
        H0, H1, B0, B1 = breathing_polys(K + 1)
        delta = PhasePoly({((3,), (4,)): 1.0}, K + 1)
        expected = poisson_bracket(H1, delta).truncate(K).max_abs_coeff()
        for eps in (0.1, 0.2):
            rep = verify_breathing_orders(H0, H1, B0 + delta.scale(eps), B1, window=K)
            # the defect is linear in the perturbation, scaled by the couplings
            assert rep.first_max == pytest.approx(eps * expected, rel=1e-9)
            assert not rep.holds(1e-10)
            assert rep.zeroth_max < 1e-12
        assert 1e-2 < 0.1 * expected < 1.0

    def test_degree_validation(self):
        H0 = number_poly(3)
        B0 = lowering_poly([1, 1, 1], 3)
        with pytest.raises(DegreeMismatch):
            verify_breathing_orders(H0 * H0, PhasePoly.zero(3), B0, PhasePoly.zero(3))
        with pytest.raises(DegreeMismatch):
            verify_breathing_orders(H0, H0, B0, PhasePoly.zero(3))
        with pytest.raises(DegreeMismatch):
            verify_breathing_orders(H0, PhasePoly.zero(3), PhasePoly.zero(3), PhasePoly.zero(3))

    @pytest.mark.parametrize("system,lam,w0", [("nls", 0.0, "1/2"), ("conformal", 0.5, "1")])
    def test_resonant_hamiltonian_conserves_b0(self, system, lam, w0):
        # condB1 holds (B1 = 0), so {H_res, B0} = 0 on like-truncated windows
        K = 8
        C = gen_nls1d(K + 1) if system == "nls" else gen_conformal(K + 1)
        assert check_condB1(PhasePoly.zero(K + 1), w0).holds
        Hres = C.hamiltonian_poly()
        B0 = BreathingVector(lam).b0_poly(K + 1)
        r = poisson_bracket(Hres, B0).truncate(K)
        assert r.max_abs_coeff() < 1e-10 * max(1.0, C.max_abs())
