"""Resonant (time-averaged) reduction on an evenly spaced frequency ladder.

With ``omega_n = omega0 + n`` and amplitudes rotating as ``a_n e^{i omega_n t}``,
a monomial picks up the phase ``exp(-i t * net_frequency)`` where::

    net_frequency = sum_{abar indices} omega_n - sum_{a indices} omega_n

Averaging over a common period keeps exactly the terms with zero net frequency.
All frequency arithmetic is done with :class:`fractions.Fraction`.
"""

from __future__ import annotations

import cmath
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational

import numpy as np

from .errors import DegreeMismatch, IrrationalLadder
from .polyspace import Key, Monomial, PhasePoly, poisson_bracket


def as_rational(x) -> Fraction:
    """Exact rational from an int, Fraction or ``'p/q'`` string.

    Floats are refused: a decimal literal such as 0.333 does not pin down the
    intended ladder offset.
    """
    if isinstance(x, bool):
        raise IrrationalLadder(f"not a rational number: {x!r}")
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        s = x.strip()
        if "." in s or "e" in s.lower():
            raise IrrationalLadder(f"rationals must be written as p/q, got {x!r}")
        try:
            return Fraction(s)
        except (ValueError, ZeroDivisionError):
            raise IrrationalLadder(f"cannot parse {x!r} as p/q") from None
    raise IrrationalLadder(f"ladder offset must be exact rational, got {type(x).__name__} {x!r}")


@dataclass(frozen=True)
class FrequencyLadder:
    """``omega_n = omega0 + n`` for ``0 <= n <= n_max``."""

    omega0: Fraction
    n_max: int

    def __post_init__(self):
        object.__setattr__(self, "omega0", as_rational(self.omega0))
        if self.omega0 <= 0:
            raise ValueError(f"ladder needs omega0 > 0, got {self.omega0}")
        if self.n_max < 0:
            raise ValueError("n_max must be nonnegative")

    def omega(self, n: int) -> Fraction:
        return self.omega0 + n

    def omegas(self) -> list[Fraction]:
        return [self.omega0 + n for n in range(self.n_max + 1)]

    def net_frequency(self, key: Key) -> Fraction:
        abar, a = key
        return (sum(abar) - sum(a)) + self.omega0 * (len(abar) - len(a))


@dataclass(frozen=True)
class WeightedMonomial:
    monomial: Monomial
    net_frequency: Fraction


def weighted_monomials(p: PhasePoly, ladder: FrequencyLadder) -> list[WeightedMonomial]:
    return [WeightedMonomial(m, ladder.net_frequency(m.key)) for m in p.monomials()]


def _ladder(ladder) -> FrequencyLadder:
    if not isinstance(ladder, FrequencyLadder):
        raise TypeError("expected a FrequencyLadder")
    return ladder


def resonant_mask(abar_sum, a_sum, n_abar, n_a, omega0) -> np.ndarray:
    """Vectorized exact zero-net-frequency test.

    With omega0 = p/q the condition ``sum(abar) - sum(a) + omega0 (n_abar - n_a) = 0``
    becomes ``q (sum(abar) - sum(a)) + p (n_abar - n_a) = 0`` in integers.
    """
    w0 = as_rational(omega0)
    p, q = w0.numerator, w0.denominator
    return (q * (np.asarray(abar_sum) - np.asarray(a_sum))
            + p * (np.asarray(n_abar) - np.asarray(n_a))) == 0


def time_average(h1: PhasePoly, ladder: FrequencyLadder) -> PhasePoly:
    """Keep the terms of ``h1`` whose net frequency is exactly zero."""
    ladder = _ladder(ladder)
    if not h1:
        return PhasePoly.zero(h1.max_mode)
    keys = list(h1.terms)
    mask = resonant_mask([sum(k[0]) for k in keys], [sum(k[1]) for k in keys],
                         [len(k[0]) for k in keys], [len(k[1]) for k in keys], ladder.omega0)
    return PhasePoly._raw({k: h1.coeff(*k) for k, keep in zip(keys, mask) if keep}, h1.max_mode)


def phase_shift(p: PhasePoly, theta: float, ladder: FrequencyLadder) -> PhasePoly:
    """Multiply each term by ``exp(i * theta * net_frequency)``.

    This is the substitution ``a_n -> a_n e^{-i theta omega_n}``.
    """
    out = {}
    for key, c in p.items():
        nf = ladder.net_frequency(key)
        out[key] = c * cmath.exp(1j * theta * float(nf)) if nf else c
    return PhasePoly(out, p.max_mode)


@dataclass
class ChannelCensus:
    c_terms: int
    s_terms: int
    dropped: int

    def as_dict(self) -> dict:
        return {"c_terms": self.c_terms, "s_terms": self.s_terms, "dropped": self.dropped}


def channel_of(key: Key) -> str:
    """'C' for two abar and two a, 'S' for a 3-1 split, 'other' otherwise."""
    nb, na = len(key[0]), len(key[1])
    if nb == 2 and na == 2:
        return "C"
    if (nb, na) in ((1, 3), (3, 1)):
        return "S"
    return "other"


def reduce_with_census(h1: PhasePoly, ladder: FrequencyLadder) -> tuple[PhasePoly, ChannelCensus]:
    res = time_average(h1, ladder)
    counts = {"C": 0, "S": 0, "other": 0}
    for key, _ in res.items():
        counts[channel_of(key)] += 1
    return res, ChannelCensus(counts["C"], counts["S"], len(h1) - len(res))


@dataclass
class CondB1Result:
    holds: bool
    violating_terms: list[Monomial] = field(default_factory=list)


def check_condB1(b1: PhasePoly, omega0) -> CondB1Result:
    """Invariance of ``b1`` under ``a_n -> a_n e^{2 pi i omega_n}``.

    A term picks up ``exp(2 pi i omega0 (deg_a - deg_abar))`` because the integer
    part of the ladder contributes whole turns, so it passes iff
    ``(deg_a - deg_abar) * omega0`` is an integer.
    """
    w0 = as_rational(omega0)
    bad = [m for m in b1.monomials() if (m.imbalance * w0).denominator != 1]
    return CondB1Result(not bad, bad)


@dataclass
class BreathingOrderReport:
    """Residuals of the order-by-order breathing relations.

    ``zeroth`` is {H0,B0} - i B0, ``first`` is {H0,B1} + {H1,B0} - i B1, and
    ``second`` is {H1,B1}, kept for information only.
    """

    zeroth: PhasePoly
    first: PhasePoly
    second: PhasePoly

    @property
    def zeroth_max(self) -> float:
        return self.zeroth.max_abs_coeff()

    @property
    def first_max(self) -> float:
        return self.first.max_abs_coeff()

    @property
    def second_max(self) -> float:
        return self.second.max_abs_coeff()

    def holds(self, atol: float = 1e-12) -> bool:
        """Whether the two required relations hold; ``second`` does not gate."""
        return self.zeroth_max <= atol and self.first_max <= atol


def _require(p: PhasePoly, degree: int, name: str, allow_zero: bool = True):
    if not p:
        if allow_zero:
            return
        raise DegreeMismatch(f"{name} must be a nonzero polynomial of degree {degree}")
    if not p.is_homogeneous(degree):
        raise DegreeMismatch(f"{name} must be homogeneous of degree {degree}, "
                             f"found degrees {sorted(p.degrees())}")


def verify_breathing_orders(h0: PhasePoly, h1: PhasePoly, b0: PhasePoly, b1: PhasePoly,
                            window: int | None = None) -> BreathingOrderReport:
    """Compute the residual polynomials of the breathing relations order by order.

    Parameters
    ----------
    window
        If given, residuals are truncated to modes ``<= window``.  Inputs built on
        a window one mode wider than this compare like-truncated expressions,
        since the bracket with a nearest-neighbour B0 only shifts indices by one.
    """
    _require(h0, 2, "H0", allow_zero=False)
    _require(b0, 2, "B0", allow_zero=False)
    _require(h1, 4, "H1")
    r0 = poisson_bracket(h0, b0) - b0.scale(1j)
    r1 = poisson_bracket(h0, b1) + poisson_bracket(h1, b0) - b1.scale(1j)
    r2 = poisson_bracket(h1, b1)
    if window is not None:
        r0, r1, r2 = r0.truncate(window), r1.truncate(window), r2.truncate(window)
    return BreathingOrderReport(r0, r1, r2)
