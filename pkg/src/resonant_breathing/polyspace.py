"""Sparse polynomials in complex mode amplitudes a_n and their conjugates.

A term is keyed by two sorted index tuples ``(abar, a)``; an index appearing
twice in ``a`` means a_n**2.  Coefficients are complex doubles.  Polynomials are
immutable; every operation returns a new object.

The Poisson bracket follows the convention in which amplitudes rotate as
``da_n/dt = +i omega_n a_n`` under ``H0 = sum omega_n abar_n a_n``::

    {F, G} = i * sum_k (dF/dabar_k * dG/da_k - dF/da_k * dG/dabar_k)

and the time derivative of any observable F along the flow of H is {H, F}.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Sequence

import numpy as np

Key = tuple[tuple[int, ...], tuple[int, ...]]


def _key(abar: Iterable[int], a: Iterable[int]) -> Key:
    return (tuple(sorted(abar)), tuple(sorted(a)))


def _merge(x: tuple[int, ...], y: tuple[int, ...]) -> tuple[int, ...]:
    if not x:
        return y
    if not y:
        return x
    return tuple(sorted(x + y))


def _remove_one(t: tuple[int, ...], k: int) -> tuple[int, ...]:
    i = t.index(k)
    return t[:i] + t[i + 1:]


@dataclass(frozen=True)
class Monomial:
    """One term ``coeff * prod abar_n^{p_n} * prod a_n^{q_n}``."""

    abar: tuple[int, ...]
    a: tuple[int, ...]
    coeff: complex

    @property
    def a_degrees(self) -> dict[int, int]:
        return dict(Counter(self.a))

    @property
    def abar_degrees(self) -> dict[int, int]:
        return dict(Counter(self.abar))

    @property
    def degree(self) -> int:
        return len(self.a) + len(self.abar)

    @property
    def imbalance(self) -> int:
        """Number of a factors minus number of abar factors."""
        return len(self.a) - len(self.abar)

    @property
    def key(self) -> Key:
        return (self.abar, self.a)


class PhasePoly:
    """Immutable sparse polynomial over a_0..a_{max_mode} and conjugates.

    Parameters
    ----------
    terms : mapping
        ``(abar_indices, a_indices) -> coefficient``.  Index tuples are sorted on
        construction and zero coefficients are dropped.
    max_mode : int
        Largest admissible mode index.  Terms touching a larger index are
        discarded and counted in :attr:`dropped`.
    """

    __slots__ = ("_terms", "max_mode", "dropped")

    def __init__(self, terms: Mapping[Key, complex] | None = None, max_mode: int = 0,
                 dropped: int = 0):
        clean: dict[Key, complex] = {}
        n_drop = dropped
        if terms:
            for (abar, a), c in terms.items():
                c = complex(c)
                if c == 0:
                    continue
                k = _key(abar, a)
                if (k[0] and k[0][-1] > max_mode) or (k[1] and k[1][-1] > max_mode):
                    n_drop += 1
                    continue
                if (k[0] and k[0][0] < 0) or (k[1] and k[1][0] < 0):
                    raise ValueError(f"negative mode index in term {k}")
                if k in clean:
                    s = clean[k] + c
                    if s == 0:
                        del clean[k]
                    else:
                        clean[k] = s
                else:
                    clean[k] = c
        self._terms = dict(sorted(clean.items()))
        self.max_mode = int(max_mode)
        self.dropped = n_drop

    @classmethod
    def _raw(cls, terms: dict[Key, complex], max_mode: int, dropped: int = 0) -> "PhasePoly":
        # terms already canonical, nonzero and in range
        obj = cls.__new__(cls)
        obj._terms = dict(sorted(terms.items()))
        obj.max_mode = max_mode
        obj.dropped = dropped
        return obj

    # construction helpers ---------------------------------------------------------

    @classmethod
    def zero(cls, max_mode: int = 0) -> "PhasePoly":
        return cls._raw({}, max_mode)

    @classmethod
    def constant(cls, c: complex, max_mode: int = 0) -> "PhasePoly":
        return cls({((), ()): c}, max_mode)

    @classmethod
    def a(cls, n: int, max_mode: int | None = None) -> "PhasePoly":
        return cls({((), (n,)): 1.0}, n if max_mode is None else max_mode)

    @classmethod
    def abar(cls, n: int, max_mode: int | None = None) -> "PhasePoly":
        return cls({((n,), ()): 1.0}, n if max_mode is None else max_mode)

    @classmethod
    def from_monomials(cls, monomials: Iterable[Monomial], max_mode: int) -> "PhasePoly":
        acc: dict[Key, complex] = defaultdict(complex)
        for m in monomials:
            acc[_key(m.abar, m.a)] += m.coeff
        return cls(acc, max_mode)

    # inspection -------------------------------------------------------------------

    @property
    def terms(self) -> dict[Key, complex]:
        return dict(self._terms)

    def items(self) -> Iterator[tuple[Key, complex]]:
        return iter(self._terms.items())

    def monomials(self) -> list[Monomial]:
        return [Monomial(k[0], k[1], c) for k, c in self._terms.items()]

    def coeff(self, abar: Iterable[int], a: Iterable[int]) -> complex:
        return self._terms.get(_key(abar, a), 0j)

    def __len__(self) -> int:
        return len(self._terms)

    def __bool__(self) -> bool:
        return bool(self._terms)

    def is_zero(self, atol: float = 0.0) -> bool:
        return self.max_abs_coeff() <= atol

    def max_abs_coeff(self) -> float:
        if not self._terms:
            return 0.0
        return float(max(abs(c) for c in self._terms.values()))

    def degrees(self) -> set[int]:
        return {len(k[0]) + len(k[1]) for k in self._terms}

    def is_homogeneous(self, degree: int) -> bool:
        return all(len(k[0]) + len(k[1]) == degree for k in self._terms)

    def used_max_index(self) -> int:
        """Largest index that actually occurs, -1 for a constant or zero."""
        top = -1
        for abar, a in self._terms:
            if abar:
                top = max(top, abar[-1])
            if a:
                top = max(top, a[-1])
        return top

    def __repr__(self) -> str:
        return f"PhasePoly({len(self)} terms, max_mode={self.max_mode})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PhasePoly):
            return NotImplemented
        return self._terms == other._terms

    __hash__ = None  # type: ignore[assignment]

    # algebra ----------------------------------------------------------------------

    def __add__(self, other: "PhasePoly | complex") -> "PhasePoly":
        if not isinstance(other, PhasePoly):
            other = PhasePoly.constant(other, self.max_mode)
        return poly_add(self, other)

    __radd__ = __add__

    def __neg__(self) -> "PhasePoly":
        return self.scale(-1.0)

    def __sub__(self, other: "PhasePoly | complex") -> "PhasePoly":
        if not isinstance(other, PhasePoly):
            other = PhasePoly.constant(other, self.max_mode)
        return poly_add(self, -other)

    def __rsub__(self, other: complex) -> "PhasePoly":
        return (-self) + other

    def __mul__(self, other: "PhasePoly | complex") -> "PhasePoly":
        if isinstance(other, PhasePoly):
            return poly_mul(self, other)
        return self.scale(other)

    def __rmul__(self, other: complex) -> "PhasePoly":
        return self.scale(other)

    def scale(self, s: complex) -> "PhasePoly":
        s = complex(s)
        if s == 0:
            return PhasePoly.zero(self.max_mode)
        return PhasePoly._raw({k: c * s for k, c in self._terms.items()}, self.max_mode)

    def conjugate(self) -> "PhasePoly":
        """Complex conjugate: swaps a and abar and conjugates coefficients."""
        return PhasePoly._raw({(a, abar): c.conjugate() for (abar, a), c in self._terms.items()},
                              self.max_mode)

    def truncate(self, max_mode: int) -> "PhasePoly":
        """Restrict to terms whose indices are all <= max_mode."""
        return PhasePoly(self._terms, max_mode)

    def with_max_mode(self, max_mode: int) -> "PhasePoly":
        if max_mode >= self.max_mode:
            return PhasePoly._raw(self._terms, max_mode)
        return self.truncate(max_mode)

    def filter(self, predicate) -> "PhasePoly":
        return PhasePoly._raw({k: c for k, c in self._terms.items() if predicate(k, c)},
                              self.max_mode)

    def chop(self, atol: float) -> "PhasePoly":
        """Drop coefficients with magnitude <= atol."""
        return self.filter(lambda k, c: abs(c) > atol)

    def diff(self, k: int, conj: bool = False) -> "PhasePoly":
        """Partial derivative with respect to a_k (or abar_k if ``conj``)."""
        out: dict[Key, complex] = defaultdict(complex)
        for (abar, a), c in self._terms.items():
            t = abar if conj else a
            d = t.count(k)
            if not d:
                continue
            rest = _remove_one(t, k)
            key = (rest, a) if conj else (abar, rest)
            out[key] += d * c
        return PhasePoly._raw({k_: v for k_, v in out.items() if v != 0}, self.max_mode)

    def __call__(self, amps: Sequence[complex]) -> complex:
        return evaluate(self, amps)


def poly_add(p: PhasePoly, q: PhasePoly) -> PhasePoly:
    """Coefficient-wise sum; exact cancellations are pruned."""
    max_mode = max(p.max_mode, q.max_mode)
    out = dict(p._terms)
    for k, c in q._terms.items():
        if k in out:
            s = out[k] + c
            if s == 0:
                del out[k]
            else:
                out[k] = s
        else:
            out[k] = c
    return PhasePoly._raw(out, max_mode)


def poly_mul(p: PhasePoly, q: PhasePoly, max_mode: int | None = None) -> PhasePoly:
    """Distributed product.

    Products touching an index above ``max_mode`` (default: the larger of the
    two operands' bounds) are dropped; their count is kept in ``.dropped``.
    """
    if max_mode is None:
        max_mode = max(p.max_mode, q.max_mode)
    out: dict[Key, complex] = defaultdict(complex)
    dropped = 0
    for (ab1, a1), c1 in p._terms.items():
        for (ab2, a2), c2 in q._terms.items():
            ab = _merge(ab1, ab2)
            a = _merge(a1, a2)
            if (ab and ab[-1] > max_mode) or (a and a[-1] > max_mode):
                dropped += 1
                continue
            out[(ab, a)] += c1 * c2
    return PhasePoly._raw({k: v for k, v in out.items() if v != 0}, max_mode, dropped)


def poisson_bracket(f: PhasePoly, g: PhasePoly) -> PhasePoly:
    """Exact bracket ``i * sum_k (df/dabar_k dg/da_k - df/da_k dg/dabar_k)``."""
    max_mode = max(f.max_mode, g.max_mode)
    # index g's terms by which a_k / abar_k they contain
    g_by_a: dict[int, list] = defaultdict(list)
    g_by_abar: dict[int, list] = defaultdict(list)
    for (ab, a), c in g._terms.items():
        for k in set(a):
            g_by_a[k].append((ab, a, c))
        for k in set(ab):
            g_by_abar[k].append((ab, a, c))
    out: dict[Key, complex] = defaultdict(complex)
    for (fab, fa), fc in f._terms.items():
        for k in set(fab):
            df = fab.count(k)
            fab_r = _remove_one(fab, k)
            for gab, ga, gc in g_by_a.get(k, ()):
                dg = ga.count(k)
                key = (_merge(fab_r, gab), _merge(fa, _remove_one(ga, k)))
                out[key] += 1j * df * dg * fc * gc
        for k in set(fa):
            df = fa.count(k)
            fa_r = _remove_one(fa, k)
            for gab, ga, gc in g_by_abar.get(k, ()):
                dg = gab.count(k)
                key = (_merge(fab, _remove_one(gab, k)), _merge(fa_r, ga))
                out[key] -= 1j * df * dg * fc * gc
    return PhasePoly._raw({k: v for k, v in out.items() if v != 0}, max_mode)


def evaluate(p: PhasePoly, amps: Sequence[complex]) -> complex:
    """Numerical value at the amplitude vector ``amps``.

    Terms are evaluated in ascending key order and summed in that order, so the
    result is reproducible bit for bit.
    """
    x = np.asarray(getattr(amps, "amps", amps), dtype=complex)
    top = p.used_max_index()
    if top >= x.shape[0]:
        raise ValueError(f"state has {x.shape[0]} modes but polynomial uses index {top}")
    if not p._terms:
        return 0j
    xb = x.conj()
    keys = list(p._terms)
    vals = np.empty(len(keys), dtype=complex)
    groups: dict[tuple[int, int], list[int]] = defaultdict(list)
    for i, (ab, a) in enumerate(keys):
        groups[(len(ab), len(a))].append(i)
    for (nb, na), idx in groups.items():
        coef = np.array([p._terms[keys[i]] for i in idx])
        v = coef
        if nb:
            ib = np.array([keys[i][0] for i in idx])
            v = v * np.prod(xb[ib], axis=1)
        if na:
            ia = np.array([keys[i][1] for i in idx])
            v = v * np.prod(x[ia], axis=1)
        vals[idx] = v
    return complex(np.sum(vals))


def gradient_abar(p: PhasePoly, amps: Sequence[complex]) -> np.ndarray:
    """Vector of dP/dabar_n evaluated at ``amps`` for n = 0..len(amps)-1."""
    x = np.asarray(amps, dtype=complex)
    return np.array([evaluate(p.diff(n, conj=True), x) for n in range(x.shape[0])])


# standard polynomials ----------------------------------------------------------------

def number_poly(n_max: int) -> PhasePoly:
    """N = sum_n |a_n|^2."""
    return PhasePoly({((n,), (n,)): 1.0 for n in range(n_max + 1)}, n_max)


def energy_poly(n_max: int) -> PhasePoly:
    """E = sum_n n |a_n|^2."""
    return PhasePoly({((n,), (n,)): float(n) for n in range(1, n_max + 1)}, n_max)


def quadratic_hamiltonian(omegas: Sequence[float]) -> PhasePoly:
    """H0 = sum_n omega_n abar_n a_n."""
    return PhasePoly({((n,), (n,)): float(w) for n, w in enumerate(omegas)}, len(omegas) - 1)


def lowering_poly(beta: Sequence[complex], n_max: int) -> PhasePoly:
    """B0 = sum_{n < n_max} beta_n abar_n a_{n+1}."""
    return PhasePoly({((n,), (n + 1,)): beta[n] for n in range(n_max)}, n_max)


# text serialization ------------------------------------------------------------------

def dumps(p: PhasePoly) -> str:
    """One term per line: ``re im | abar: n1 n2 | a: m1 m2``, blank-line terminated."""
    lines = []
    for (ab, a), c in p._terms.items():
        lines.append(f"{c.real!r} {c.imag!r} | abar: {' '.join(map(str, ab))} | a: {' '.join(map(str, a))}".rstrip())
    return "\n".join(lines) + "\n\n"


def loads(text: str, max_mode: int | None = None) -> PhasePoly:
    """Inverse of :func:`dumps`; stops at the first blank line."""
    from .errors import FormatError

    terms: dict[Key, complex] = defaultdict(complex)
    top = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line:
            break
        if line.startswith("#"):
            continue
        parts = [s.strip() for s in line.split("|")]
        if len(parts) != 3 or not parts[1].startswith("abar:") or not parts[2].startswith("a:"):
            raise FormatError(f"expected 're im | abar: ... | a: ...', got {raw!r}", lineno)
        try:
            re_s, im_s = parts[0].split()
            c = complex(float(re_s), float(im_s))
            ab = tuple(int(s) for s in parts[1][5:].split())
            a = tuple(int(s) for s in parts[2][2:].split())
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        if any(i < 0 for i in ab + a):
            raise FormatError("negative mode index", lineno)
        top = max([top, *ab, *a])
        terms[_key(ab, a)] += c
    return PhasePoly(terms, top if max_mode is None else max_mode)
