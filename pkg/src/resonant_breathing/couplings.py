"""Resonant coupling tensors C[n,m,k,l] on quartets with n + m = k + l.

Convention: the resonant Hamiltonian is the sum over *ordered* resonant
quartets::

    H_res = sum_{n+m=k+l} C[n,m,k,l] abar_n abar_m a_k a_l

with C symmetric under n<->m, k<->l and (n,m)<->(k,l).  Only one canonical
representative per symmetry orbit is stored; the orbit multiplicity is applied
when a polynomial or dense array is assembled.
"""

from __future__ import annotations

import math
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations_with_replacement
from pathlib import Path
from typing import Iterable, Iterator, Sequence

import numpy as np

from .errors import (FormatError, MalformedChannel, NoConsistentG, NonForcing, NotResonant,
                     QuadratureBudgetExceeded)
from .hermite import hermite_functions, line_quadrature
from .polyspace import Monomial, PhasePoly, poly_add, poly_mul
from .reduction import FrequencyLadder, as_rational, resonant_mask, time_average

Quartet = tuple[int, int, int, int]

MAX_GENERATED_MODE = 64


def canonical_quartet(n: int, m: int, k: int, l: int) -> Quartet:
    """Orbit representative with n <= m, k <= l and (n, m) <= (k, l)."""
    if n + m != k + l:
        raise NotResonant(f"({n},{m},{k},{l}) has n+m={n + m} != k+l={k + l}")
    p = (n, m) if n <= m else (m, n)
    q = (k, l) if k <= l else (l, k)
    return p + q if p <= q else q + p


def orbit(q: Quartet) -> set[Quartet]:
    """All ordered quartets equivalent to ``q`` under the index symmetries."""
    n, m, k, l = q
    out = set()
    for a, b in ((n, m), (m, n)):
        for c, d in ((k, l), (l, k)):
            out.add((a, b, c, d))
            out.add((c, d, a, b))
    return out


def _pair_mult(i: int, j: int) -> int:
    return 1 if i == j else 2


def iter_canonical(n_max: int) -> Iterator[Quartet]:
    """Every canonical resonant quartet with indices in [0, n_max]."""
    for s in range(2 * n_max + 1):
        pairs = [(i, s - i) for i in range(max(0, s - n_max), s // 2 + 1)]
        for x, p in enumerate(pairs):
            for q in pairs[x:]:
                yield p + q


@dataclass
class CouplingTensor:
    """Sparse symmetric rank-4 tensor keyed by canonical resonant quartets."""

    n_max: int
    entries: dict[Quartet, float] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for q, v in self.entries.items():
            cq = canonical_quartet(*q)
            if max(cq) > self.n_max or min(cq) < 0:
                raise ValueError(f"quartet {q} outside [0, {self.n_max}]")
            v = float(v)
            if not math.isfinite(v):
                raise ValueError(f"non-finite coupling at {q}")
            if cq in clean and clean[cq] != v:
                raise ValueError(f"conflicting values for orbit of {cq}")
            clean[cq] = v
        self.entries = dict(sorted(clean.items()))
        self._dense = None

    def __len__(self) -> int:
        return len(self.entries)

    def __getitem__(self, q: Quartet) -> float:
        return self.get(*q)

    def get(self, n: int, m: int, k: int, l: int) -> float:
        if n + m != k + l or min(n, m, k, l) < 0 or max(n, m, k, l) > self.n_max:
            return 0.0
        return self.entries.get(canonical_quartet(n, m, k, l), 0.0)

    def max_abs(self) -> float:
        return max((abs(v) for v in self.entries.values()), default=0.0)

    def dense(self) -> np.ndarray:
        """Full array ``C[n,m,k,l]`` (zero off the resonant set)."""
        if self._dense is None:
            d = np.zeros((self.n_max + 1,) * 4)
            for q, v in self.entries.items():
                for o in orbit(q):
                    d[o] = v
            d.setflags(write=False)
            self._dense = d
        return self._dense

    def scaled(self, factor: float) -> "CouplingTensor":
        return CouplingTensor(self.n_max, {q: factor * v for q, v in self.entries.items()})

    def perturbed(self, quartet: Quartet, delta: float, relative: bool = False) -> "CouplingTensor":
        cq = canonical_quartet(*quartet)
        entries = dict(self.entries)
        old = entries.get(cq, 0.0)
        entries[cq] = old * (1.0 + delta) if relative else old + delta
        return CouplingTensor(self.n_max, entries)

    def hamiltonian_poly(self) -> PhasePoly:
        """H_res as a polynomial, orbit multiplicities folded into coefficients."""
        terms = {}
        for (n, m, k, l), v in self.entries.items():
            mult = _pair_mult(n, m) * _pair_mult(k, l)
            terms[((n, m), (k, l))] = terms.get(((n, m), (k, l)), 0.0) + mult * v
            if (n, m) != (k, l):
                terms[((k, l), (n, m))] = terms.get(((k, l), (n, m)), 0.0) + mult * v
        return PhasePoly(terms, self.n_max)


@dataclass(frozen=True)
class BreathingVector:
    """beta_n = sqrt((1 + n)(1 + n*lam)), lam = 1/G (lam = 0 means G infinite).

    ``values`` overrides the formula, e.g. to study degenerate sequences.
    """

    lam: float = 0.0
    values: tuple[float, ...] | None = None

    def __post_init__(self):
        if self.values is None and self.lam < 0:
            raise ValueError("lam must be >= 0")

    @property
    def G(self) -> float:
        return math.inf if self.lam == 0 else 1.0 / self.lam

    def beta(self, n: int) -> float:
        if n < 0:
            return 0.0
        if self.values is not None:
            return self.values[n] if n < len(self.values) else 0.0
        return math.sqrt((1 + n) * (1 + n * self.lam))

    def array(self, n_max: int) -> np.ndarray:
        if self.values is not None:
            return np.array([self.beta(n) for n in range(n_max + 1)])
        n = np.arange(n_max + 1)
        return np.sqrt((1.0 + n) * (1.0 + n * self.lam))

    def b0_poly(self, n_max: int) -> PhasePoly:
        """B0 = sum_{n<n_max} beta_n abar_n a_{n+1} on the window [0, n_max]."""
        return PhasePoly({((n,), (n + 1,)): self.beta(n) for n in range(n_max)}, n_max)


# extraction from a resonant polynomial ----------------------------------------------

@dataclass
class ResonantSplit:
    C: CouplingTensor
    S_terms: list[Monomial]


def from_resonant_poly(p: PhasePoly, n_max: int | None = None, atol: float = 1e-12) -> ResonantSplit:
    """Read C off a quartic resonant polynomial; S-channel terms come back separately.

    S-channel coefficients with magnitude <= ``atol`` are treated as zero.  The
    C tensor must come out real and the polynomial Hermitian (to ``atol``).
    """
    n_max = p.max_mode if n_max is None else n_max
    acc: dict[Quartet, list[complex]] = {}
    s_terms = []
    for (ab, a), c in p.items():
        nb, na = len(ab), len(a)
        if (nb, na) == (2, 2):
            if sum(ab) != sum(a):
                raise MalformedChannel(f"C-type term abar{ab} a{a} is not resonant")
            q = canonical_quartet(*ab, *a)
            acc.setdefault(q, []).append(c / (_pair_mult(*ab) * _pair_mult(*a)))
        elif (nb, na) in ((1, 3), (3, 1)):
            if abs(c) > atol:
                s_terms.append(Monomial(ab, a, c))
        else:
            raise MalformedChannel(f"term abar{ab} a{a} is neither C- nor S-channel")
    entries = {}
    for q, vals in acc.items():
        symmetric = (q[0], q[1]) == (q[2], q[3])
        if not symmetric and len(vals) == 1:
            # partner term with the abar/a roles swapped is missing
            vals = vals + [0j]
        v = sum(vals) / len(vals)
        spread = max(abs(x - v) for x in vals)
        if spread > atol + 1e-9 * abs(v):
            raise MalformedChannel(f"non-Hermitian couplings on orbit {q}: {vals}")
        if abs(v.imag) > atol:
            raise MalformedChannel(f"complex coupling {v} on orbit {q}")
        entries[q] = v.real
    return ResonantSplit(CouplingTensor(n_max, entries), s_terms)


# identities -------------------------------------------------------------------------

class _IdentityRows:
    """Index bookkeeping for the beta-weighted neighbour identity.

    One row per (n, m, k, l) with n + m + 1 = k + l, n <= m, k <= l.  Rows are
    kept only where the raised entries C[n+1,...] and C[n,m+1,...] still lie
    inside the window; beyond it the truncated tensor simply has no data.
    """

    def __init__(self, C: CouplingTensor):
        K = C.n_max
        d = C.dense()
        rows = []
        for n in range(K):
            for m in range(n, K):
                s = n + m + 1
                for k in range(max(0, s - K), s // 2 + 1):
                    rows.append((n, m, k, s - k))
        self.n_rows = len(rows)
        if not rows:
            return
        r = np.array(rows)
        n, m, k, l = r.T
        self.c1 = d[n + 1, m, k, l]
        self.c2 = d[n, m + 1, k, l]
        self.c3 = np.where(k > 0, d[n, m, np.maximum(k - 1, 0), l], 0.0)
        self.c4 = np.where(l > 0, d[n, m, k, np.maximum(l - 1, 0)], 0.0)
        self.n, self.m, self.k, self.l = n, m, k, l

    def residuals(self, beta: np.ndarray) -> np.ndarray:
        if not self.n_rows:
            return np.zeros(0)
        bp = np.concatenate([[0.0], beta])  # bp[i + 1] = beta_i, bp[0] = beta_{-1} = 0
        return (bp[self.n + 1] * self.c1 + bp[self.m + 1] * self.c2
                - bp[self.k] * self.c3 - bp[self.l] * self.c4)


def check_C_identity(C: CouplingTensor, bv: BreathingVector) -> float:
    """Max violation of beta_n C[n+1,m,k,l] + beta_m C[n,m+1,k,l]
    = beta_{k-1} C[n,m,k-1,l] + beta_{l-1} C[n,m,k,l-1]."""
    rows = _IdentityRows(C)
    r = rows.residuals(bv.array(C.n_max))
    return float(np.max(np.abs(r))) if r.size else 0.0


@dataclass
class GFit:
    lam: float
    residual: float

    @property
    def G(self) -> float:
        return math.inf if self.lam == 0 else 1.0 / self.lam


def find_G(C: CouplingTensor, lam_max: float = 100.0, n_grid: int = 10_000,
           threshold: float | None = None) -> GFit:
    """Fit lam = 1/G by minimizing the identity residual.

    Log-spaced scan over (0, lam_max] plus the endpoint lam = 0, followed by a
    golden-section refinement around the best grid point.
    """
    rows = _IdentityRows(C)
    if not rows.n_rows:
        raise NoConsistentG("tensor has no quartet pairs linked by the identity", 0.0, math.inf)
    n = np.arange(C.n_max + 1)

    def resid(lam: float) -> float:
        return float(np.max(np.abs(rows.residuals(np.sqrt((1.0 + n) * (1.0 + n * lam))))))

    grid = np.concatenate([[0.0], np.geomspace(1e-8, lam_max, n_grid)])
    vals = np.array([resid(x) for x in grid])
    i = int(np.argmin(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
    gr = (math.sqrt(5) - 1) / 2
    x1, x2 = hi - gr * (hi - lo), lo + gr * (hi - lo)
    f1, f2 = resid(x1), resid(x2)
    for _ in range(200):
        if hi - lo <= 1e-15 * max(1.0, hi):
            break
        if f1 <= f2:
            hi, x2, f2 = x2, x1, f1
            x1 = hi - gr * (hi - lo)
            f1 = resid(x1)
        else:
            lo, x1, f1 = x1, x2, f2
            x2 = lo + gr * (hi - lo)
            f2 = resid(x2)
    cands = [(vals[i], grid[i]), (f1, x1), (f2, x2), (resid(lo), lo), (resid(hi), hi)]
    best_r, best_lam = min(cands)
    # lam = 0 (G infinite) is a point of the family, not a limit: prefer it when
    # the fitted value is indistinguishable from it at rounding level
    r0 = float(vals[0])
    if best_lam != 0.0 and r0 <= best_r + 1e-14 * max(C.max_abs(), 1e-300):
        best_r, best_lam = r0, 0.0
    if threshold is None:
        threshold = 1e-6 * C.max_abs()
    if best_r > threshold:
        raise NoConsistentG(f"best residual {best_r:.3e} at lam={best_lam:.6g} exceeds "
                            f"threshold {threshold:.3e}", float(best_lam), float(best_r))
    return GFit(float(best_lam), float(best_r))


@dataclass
class SForcingTrace:
    """Outcome of the S-channel forcing argument.

    ``order`` lists canonical S-quartets (n, m, k, l), m <= k <= l, in the order
    they are forced to zero; ``empty_support`` is set when the ladder admits no
    S-channel at all.
    """

    omega0: Fraction
    n_max: int
    empty_support: bool
    order: list[Quartet]

    @property
    def support(self) -> list[Quartet]:
        return sorted(self.order)


def s_support(omega0, n_max: int) -> list[Quartet]:
    """Canonical (n, m<=k<=l) with omega_n = omega_m + omega_k + omega_l."""
    w0 = as_rational(omega0)
    shift = 2 * w0
    if shift.denominator != 1:
        return []
    out = []
    for m, k, l in combinations_with_replacement(range(n_max + 1), 3):
        n = m + k + l + int(shift)
        if n <= n_max:
            out.append((n, m, k, l))
    return out


def assert_S_vanishes(bv: BreathingVector | Sequence[float], omega0, n_max: int) -> SForcingTrace:
    """Certify that the S-channel identity forces every S coupling to zero.

    The identity at (n, m, k, l) expresses beta_n S[n+1,m,k,l] through entries
    whose lower-index sum m+k+l is one smaller.  Induction on that sum starting
    from S[2*omega0, 0, 0, 0] forces each entry to zero, provided the beta that
    multiplies it is nonzero.
    """
    if not isinstance(bv, BreathingVector):
        bv = BreathingVector(values=tuple(float(b) for b in bv))
    w0 = as_rational(omega0)
    support = s_support(w0, n_max)
    if not support:
        return SForcingTrace(w0, n_max, True, [])
    order = sorted(support, key=lambda q: (q[1] + q[2] + q[3], q))
    for q in order:
        n = q[0]
        if bv.beta(n - 1) == 0:
            raise NonForcing(f"beta_{n - 1} = 0, so S{q} is not forced by the identity")
    return SForcingTrace(w0, n_max, False, order)


def s_identity_matrix(bv: BreathingVector, omega0, n_max: int) -> tuple[np.ndarray, list[Quartet]]:
    """Linear system of S-channel identities over the canonical S-support.

    Rows are the identities with all four entries inside the window; used as an
    independent check that the only solution is S = 0.
    """
    support = s_support(omega0, n_max)
    col = {q: i for i, q in enumerate(support)}

    def idx(n, m, k, l):
        if min(n, m, k, l) < 0:
            return None
        return col.get((n,) + tuple(sorted((m, k, l))))

    shift = int(2 * as_rational(omega0)) if support else 0
    rows = []
    for m in range(n_max + 1):
        for k in range(m, n_max + 1):
            for l in range(k, n_max + 1):
                n = m + k + l + shift - 1
                if n < 0 or n + 1 > n_max:
                    continue
                row = np.zeros(len(support))
                for coef, key in ((bv.beta(n), (n + 1, m, k, l)), (-bv.beta(m - 1), (n, m - 1, k, l)),
                                  (-bv.beta(k - 1), (n, m, k - 1, l)), (-bv.beta(l - 1), (n, m, k, l - 1))):
                    j = idx(*key)
                    if j is not None:
                        row[j] += coef
                rows.append(row)
    return (np.array(rows) if rows else np.zeros((0, len(support)))), support


# generators -------------------------------------------------------------------------

def _check_budget(n_max: int):
    if n_max < 0:
        raise ValueError("n_max must be nonnegative")
    if n_max > MAX_GENERATED_MODE:
        raise QuadratureBudgetExceeded(f"n_max={n_max} exceeds the quadrature budget "
                                       f"of {MAX_GENERATED_MODE}")


def _pair_gram(basis: np.ndarray, weights: np.ndarray) -> np.ndarray:
    """T[n,m,k,l] = sum_j w_j f_n f_m f_k f_l from nodal values f (nodes x modes)."""
    N = basis.shape[1]
    pairs = (basis[:, :, None] * basis[:, None, :]).reshape(basis.shape[0], N * N)
    return ((pairs * weights[:, None]).T @ pairs).reshape(N, N, N, N)


def nls_overlaps(n_max: int, n_nodes: int | None = None) -> np.ndarray:
    """W[n,m,k,l] = integral of h_n h_m h_k h_l over the line.

    The rescaled Gauss-Hermite rule is exact once n_nodes >= 2*n_max + 1.
    """
    _check_budget(n_max)
    n_nodes = 2 * n_max + 16 if n_nodes is None else n_nodes
    x, w = line_quadrature(n_nodes, scale=math.sqrt(2.0))
    return _pair_gram(hermite_functions(n_max, x), w)


def conformal_overlaps(n_max: int, n_nodes: int | None = None) -> np.ndarray:
    """V[n,m,k,l] = integral over (0, pi) of e_n e_m e_k e_l / sin^2 x,
    e_n = sqrt(2/pi) sin((n+1) x).

    The integrand is a cosine polynomial of degree <= 4*n_max + 2, so the
    trapezoid rule on n_nodes + 1 panels is exact once n_nodes > 2*n_max.
    """
    _check_budget(n_max)
    n_nodes = 2 * n_max + 16 if n_nodes is None else n_nodes
    theta = np.arange(1, n_nodes + 1) * np.pi / (n_nodes + 1)
    modes = np.sin(np.outer(theta, np.arange(1, n_max + 2))) * math.sqrt(2.0 / np.pi)
    w = (np.pi / (n_nodes + 1)) / np.sin(theta) ** 2
    return _pair_gram(modes, w)


def _resonant_entries(T: np.ndarray, n_max: int, factor: float) -> dict[Quartet, float]:
    return {q: factor * float(T[q]) for q in iter_canonical(n_max)}


def gen_nls1d(n_max: int) -> CouplingTensor:
    """Couplings of the 1D trapped cubic NLS, C = W/2 on resonant quartets.

    Source Hamiltonian interaction: (1/2) int |Psi|^4 dx in the Hermite basis.
    """
    W = nls_overlaps(n_max)
    return CouplingTensor(n_max, _resonant_entries(W, n_max, 0.5))


def nls_quartic_poly(n_max: int, resonant_only: bool = False) -> PhasePoly:
    """H1 = (1/2) sum_{nmkl} W[n,m,k,l] abar_n abar_m a_k a_l over all ordered quartets."""
    W = nls_overlaps(n_max)
    terms = {}
    rng = range(n_max + 1)
    for n in rng:
        for m in range(n, n_max + 1):
            for k in rng:
                for l in range(k, n_max + 1):
                    if (n + m + k + l) % 2 or (resonant_only and n + m != k + l):
                        continue
                    v = 0.5 * W[n, m, k, l] * _pair_mult(n, m) * _pair_mult(k, l)
                    if v != 0.0:
                        terms[((n, m), (k, l))] = v
    return PhasePoly(terms, n_max)


def conformal_quartic_chunks(n_max: int) -> Iterator[PhasePoly]:
    """H1 = (1/4) sum V[n,m,k,l] q_n q_m q_k q_l, q_n = (a_n + abar_n)/sqrt(2 omega_n),
    yielded in pieces (one per leading index pair) to bound memory."""
    V = conformal_overlaps(n_max)
    N = n_max + 1
    q = [PhasePoly({((), (n,)): 1.0, ((n,), ()): 1.0}, n_max).scale(1.0 / math.sqrt(2.0 * (n + 1)))
         for n in range(N)]
    qq = {(i, j): poly_mul(q[i], q[j]) for i in range(N) for j in range(i, N)}
    for i in range(N):
        for j in range(i, N):
            acc: dict = defaultdict(complex)
            for k in range(j, N):
                for l in range(k, N):
                    v = V[i, j, k, l]
                    if v == 0.0:
                        continue
                    w = 0.25 * _distinct_orderings((i, j, k, l)) * v
                    for key, c in poly_mul(qq[(i, j)], qq[(k, l)]).items():
                        acc[key] += w * c
            yield PhasePoly(acc, n_max)


def _distinct_orderings(t: tuple[int, ...]) -> int:
    out = math.factorial(len(t))
    for c in Counter(t).values():
        out //= math.factorial(c)
    return out


def averaged_quartic_expansion(T: np.ndarray, mode_scale: np.ndarray, ladder: FrequencyLadder,
                               prefactor: float = 1.0) -> PhasePoly:
    """Time average of ``prefactor * sum_{nmkl} T[n,m,k,l] q_n q_m q_k q_l``
    with ``q_n = mode_scale[n] (a_n + abar_n)`` and T fully symmetric.

    The 16-fold binomial expansion of every product is carried out on index
    arrays; each expanded term is passed through the same exact resonance test
    as :func:`time_average`, and only survivors are materialized.
    """
    N = T.shape[0]
    ms = np.array(list(combinations_with_replacement(range(N), 4)), dtype=np.int64)
    counts = np.array([_distinct_orderings(tuple(r)) for r in ms])
    base = prefactor * counts * T[ms[:, 0], ms[:, 1], ms[:, 2], ms[:, 3]] * np.prod(mode_scale[ms], axis=1)
    acc: dict = defaultdict(complex)
    for pattern in range(16):
        conj = [(pattern >> b) & 1 for b in range(4)]
        cols_b = [b for b in range(4) if conj[b]]
        cols_a = [b for b in range(4) if not conj[b]]
        mask = resonant_mask(ms[:, cols_b].sum(axis=1), ms[:, cols_a].sum(axis=1),
                             len(cols_b), len(cols_a), ladder.omega0) & (base != 0)
        for row, c in zip(ms[mask], base[mask]):
            acc[(tuple(row[cols_b]), tuple(row[cols_a]))] += c
    return time_average(PhasePoly(acc, N - 1), ladder)


def gen_conformal(n_max: int) -> CouplingTensor:
    """Couplings of the conformal-flow wave equation, through the averaging pipeline.

    The quartic Hamiltonian (1/4) sum V q^4 is expanded in amplitudes,
    time-averaged on the ladder omega_n = n + 1 and read off by
    :func:`from_resonant_poly`; no normalization is inserted by hand.
    """
    _check_budget(n_max)
    ladder = FrequencyLadder(Fraction(1), n_max)
    V = conformal_overlaps(n_max)
    scale = 1.0 / np.sqrt(2.0 * (np.arange(n_max + 1) + 1.0))
    res = averaged_quartic_expansion(V, scale, ladder, prefactor=0.25)
    split = from_resonant_poly(res, n_max)
    if split.S_terms:
        raise MalformedChannel(f"{len(split.S_terms)} S-channel terms survived averaging")
    return split.C


# file format ------------------------------------------------------------------------

HEADER = "resonant-coupling v1"


def save(C: CouplingTensor, path) -> None:
    lines = [HEADER, f"n_max={C.n_max}", "symmetry=nm.kl.swap", f"entries={len(C.entries)}",
             "# H_res = sum over ordered quartets n+m=k+l of C abar_n abar_m a_k a_l;",
             "# one line per canonical quartet (n<=m, k<=l, (n,m)<=(k,l)), value as hex float"]
    for (n, m, k, l), v in C.entries.items():
        lines.append(f"{n} {m} {k} {l} {float(v).hex()}")
    Path(path).write_text("\n".join(lines) + "\n")


def load(path) -> CouplingTensor:
    text = Path(path).read_text()
    lines = text.split("\n")
    if not text.endswith("\n"):
        raise FormatError("file does not end with a newline (truncated?)", len(lines))
    if not lines or lines[0].strip() != HEADER:
        raise FormatError(f"expected header {HEADER!r}", 1)
    meta = {}
    entries: dict[Quartet, float] = {}
    lineno = 1
    for lineno, raw in enumerate(lines[1:], start=2):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, val = line.partition("=")
            meta[key.strip()] = val.strip()
            continue
        if "n_max" not in meta:
            raise FormatError("n_max header missing before entries", lineno)
        parts = line.split()
        if len(parts) != 5:
            raise FormatError(f"expected 'n m k l value', got {raw!r}", lineno)
        try:
            q = tuple(int(s) for s in parts[:4])
            v = float.fromhex(parts[4])
        except ValueError as exc:
            raise FormatError(str(exc), lineno) from None
        K = int(meta["n_max"])
        if min(q) < 0 or max(q) > K:
            raise FormatError(f"quartet {q} outside declared n_max={K}", lineno)
        try:
            cq = canonical_quartet(*q)
        except NotResonant as exc:
            raise FormatError(str(exc), lineno) from None
        if cq != q:
            raise FormatError(f"quartet {q} is not canonical (expected {cq})", lineno)
        if q in entries:
            raise FormatError(f"duplicate quartet {q}", lineno)
        if not math.isfinite(v):
            raise FormatError("non-finite value", lineno)
        entries[q] = v
    try:
        K = int(meta["n_max"])
    except (KeyError, ValueError):
        raise FormatError("missing or invalid n_max header", 2) from None
    if meta.get("symmetry") != "nm.kl.swap":
        raise FormatError("missing or unsupported symmetry header", 3)
    if "entries" in meta and int(meta["entries"]) != len(entries):
        raise FormatError(f"header declares {meta['entries']} entries, found {len(entries)} "
                          "(truncated?)", lineno)
    return CouplingTensor(K, entries)
