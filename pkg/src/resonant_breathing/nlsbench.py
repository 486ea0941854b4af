"""1D cubic NLS in a harmonic trap, solved in the Hermite-function basis.

    i dPsi/dt = (1/2)(-d^2/dx^2 + x^2) Psi + g |Psi|^2 Psi,   Psi = sum_n c_n h_n(x)

The linear part is diagonal with omega_n = n + 1/2 and is removed by an
integrating factor.  The cubic term is projected exactly: |Psi|^2 Psi h_n is a
polynomial times exp(-2x^2), integrated by the Gauss-Hermite rule rescaled by
sqrt(2).

In this textbook form modes rotate as exp(-i omega_n t).  The resonant-system
amplitudes rotate the other way; :func:`to_resonant_frame` is the single adapter
between the two (complex conjugation plus removal of the fast phase).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .couplings import CouplingTensor, gen_nls1d, nls_quartic_poly
from .errors import GridMismatch, ZeroBreathing
from .evolution import ModeState, evolve
from .hermite import hermite_function_derivatives, hermite_functions, line_quadrature
from .integrate import dopri5
from .polyspace import PhasePoly, quadratic_hamiltonian
from .reduction import FrequencyLadder

LADDER_OFFSET = Fraction(1, 2)


def omegas(n_max: int) -> np.ndarray:
    return np.arange(n_max + 1) + 0.5


def ladder(n_max: int) -> FrequencyLadder:
    return FrequencyLadder(LADDER_OFFSET, n_max)


class HermiteGrid:
    """Nodes, weights and basis values for one quadrature grid.

    ``scale=1`` (default) integrates products of two basis functions exactly;
    ``scale=sqrt(2)`` integrates products of four, which is what the cubic
    nonlinearity needs.
    """

    def __init__(self, n_max: int, n_nodes: int | None = None, scale: float = 1.0):
        n_nodes = 2 * n_max + 16 if n_nodes is None else n_nodes
        if n_nodes < 2 * n_max + 1:
            raise GridMismatch(f"{n_nodes} nodes cannot resolve n_max={n_max} "
                               f"(need >= {2 * n_max + 1})")
        self.n_max = n_max
        self.scale = scale
        self.x, self.w = line_quadrature(n_nodes, scale)
        self.H = hermite_functions(n_max, self.x)
        self._WH = self.H * self.w[:, None]

    @property
    def n_nodes(self) -> int:
        return self.x.shape[0]

    def to_samples(self, coeffs) -> np.ndarray:
        c = np.asarray(coeffs)
        if c.shape[-1] != self.n_max + 1:
            raise GridMismatch(f"expected {self.n_max + 1} coefficients, got {c.shape[-1]}")
        return c @ self.H.T

    def to_coeffs(self, samples) -> np.ndarray:
        f = np.asarray(samples)
        if f.shape[-1] != self.n_nodes:
            raise GridMismatch(f"expected {self.n_nodes} samples, got {f.shape[-1]}")
        return f @ self._WH


def hermite_transform(data, grid: HermiteGrid, inverse: bool = False) -> np.ndarray:
    """Samples -> coefficients, or coefficients -> samples with ``inverse=True``."""
    return grid.to_samples(data) if inverse else grid.to_coeffs(data)


@dataclass
class FieldState:
    coeffs: np.ndarray
    t: float = 0.0

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex)

    @property
    def n_max(self) -> int:
        return self.coeffs.shape[0] - 1

    def norm2(self) -> float:
        return float(np.sum(np.abs(self.coeffs) ** 2))


def shifted_gaussian(d: float, n_max: int) -> FieldState:
    """Coefficients of h_0(x - d) (a coherent state)."""
    n = np.arange(n_max + 1)
    logc = -d * d / 4 + n * np.log(abs(d) / math.sqrt(2) if d else 1.0) - 0.5 * np.cumsum(
        np.concatenate([[0.0], np.log(n[1:])]))
    c = np.exp(logc) * (np.sign(d) ** n if d else (n == 0))
    return FieldState(c.astype(complex))


def mode_mixture(weights: dict[int, complex], n_max: int) -> FieldState:
    c = np.zeros(n_max + 1, dtype=complex)
    for n, v in weights.items():
        c[n] = v
    return FieldState(c)


@dataclass
class FieldTrajectory:
    t: np.ndarray
    coeffs: np.ndarray       # (samples, modes)
    g: float

    def state(self, i: int) -> FieldState:
        return FieldState(self.coeffs[i], float(self.t[i]))


def cubic_term(c: np.ndarray, grid: HermiteGrid) -> np.ndarray:
    """Projection of |Psi|^2 Psi onto the basis."""
    psi = grid.to_samples(c)
    return grid.to_coeffs(np.abs(psi) ** 2 * psi)


def nls_evolve(f0: FieldState, g: float, t_end: float, tol: float = 1e-10,
               samples=None) -> FieldTrajectory:
    """Integrate the trapped NLS with an integrating factor for the linear part."""
    if g < 0:
        raise ValueError("g must be nonnegative")
    K = f0.n_max
    w = omegas(K)
    grid = HermiteGrid(K, scale=math.sqrt(2.0))
    t0 = f0.t
    if samples is None:
        t_eval = np.array([t0, t_end])
    elif np.isscalar(samples):
        t_eval = np.linspace(t0, t_end, int(samples))
    else:
        t_eval = np.asarray(samples, dtype=float)

    def fun(t, v):
        if g == 0:
            return np.zeros_like(v)
        ph = np.exp(1j * w * (t - t0))
        return -1j * g * ph * cubic_term(v / ph, grid)

    sol = dopri5(fun, (t0, t_end), f0.coeffs, tol=tol, t_eval=t_eval)
    coeffs = sol.y * np.exp(-1j * np.outer(sol.t - t0, w))
    return FieldTrajectory(sol.t, coeffs, g)


def measure_breathing(f: FieldState, method: str = "quadrature") -> complex:
    """B = int (x |Psi|^2 - conj(Psi) dPsi/dx) dx.

    ``quadrature`` evaluates the integral on a Gauss-Hermite grid; ``bilinear``
    uses the closed form sum_n sqrt(2(n+1)) conj(c_{n+1}) c_n, which follows from
    (x - d/dx) h_n = sqrt(2(n+1)) h_{n+1}.
    """
    c = f.coeffs
    if method == "bilinear":
        n = np.arange(c.shape[0] - 1)
        return complex(np.sum(np.sqrt(2.0 * (n + 1)) * c[1:].conj() * c[:-1]))
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    K = c.shape[0] - 1
    x, w = line_quadrature(K + 8)
    psi = hermite_functions(K, x) @ c
    dpsi = hermite_function_derivatives(K, x) @ c
    return complex(np.sum(w * (x * np.abs(psi) ** 2 - psi.conj() * dpsi)))


@dataclass
class PhaseReport:
    max_modulus_drift: float
    phase_slope: float
    phase_fit_residual: float


def breathing_phase_test(traj: FieldTrajectory) -> PhaseReport:
    """Fit arg B(t) to a line; B(t) = e^{it} B(0) gives slope +1 in this frame."""
    B = np.array([measure_breathing(FieldState(c), "bilinear") for c in traj.coeffs])
    if abs(B[0]) < 1e-12:
        raise ZeroBreathing(f"|B(0)| = {abs(B[0]):.3e}")
    drift = float(np.max(np.abs(np.abs(B) - abs(B[0]))) / abs(B[0]))
    phase = np.unwrap(np.angle(B))
    A = np.stack([traj.t - traj.t[0], np.ones_like(traj.t)], axis=1)
    (slope, icpt), *_ = np.linalg.lstsq(A, phase, rcond=None)
    fit_res = float(np.max(np.abs(A @ np.array([slope, icpt]) - phase)))
    return PhaseReport(drift, float(slope), fit_res)


def to_resonant_frame(coeffs: np.ndarray, t, t0: float = 0.0) -> np.ndarray:
    """a_n = conj(c_n) exp(-i omega_n (t - t0)): interaction-picture amplitudes."""
    c = np.asarray(coeffs)
    t = np.asarray(t, dtype=float)
    w = omegas(c.shape[-1] - 1)
    return c.conj() * np.exp(-1j * np.multiply.outer(t - t0, w))


def breathing_polys(n_max: int) -> tuple[PhasePoly, PhasePoly, PhasePoly, PhasePoly]:
    """(H0, H1, B0, B1) for the trap on window [0, n_max] in resonant-frame variables.

    B0 = sum sqrt(2(n+1)) abar_n a_{n+1} is the center-of-mass mode; B1 = 0.
    """
    H0 = quadratic_hamiltonian(omegas(n_max))
    H1 = nls_quartic_poly(n_max)
    B0 = PhasePoly({((n,), (n + 1,)): math.sqrt(2.0 * (n + 1)) for n in range(n_max)}, n_max)
    return H0, H1, B0, PhasePoly.zero(n_max)


@dataclass
class CompareResult:
    metric: float
    tau: np.ndarray
    full: np.ndarray          # resonant-frame amplitudes from the PDE
    resonant: np.ndarray      # amplitudes from the resonant system
    drift_N: float
    drift_E: float


def compare_resonant(f0: FieldState, g: float, horizon: float, tol: float = 1e-11,
                     samples: int = 101, couplings: CouplingTensor | None = None) -> CompareResult:
    """Sup over modes and samples of ||a_n^full| - |a_n^res|| up to slow time ``horizon``.

    The resonant Hamiltonian is sum C abar abar a a with C = W/2; its flow in
    tau = g t is generated by the tensor 2C under :func:`evolution.rhs`.
    """
    K = f0.n_max
    if couplings is None:
        couplings = gen_nls1d(K)
    a0 = to_resonant_frame(f0.coeffs, f0.t, f0.t)
    if g == 0:
        a_full = np.repeat(a0[None, :], samples, axis=0)
        tau = np.linspace(0.0, horizon, samples)
        return CompareResult(0.0, tau, a_full, a_full.copy(), 0.0, 0.0)
    t = f0.t + np.linspace(0.0, horizon / g, samples)
    traj = nls_evolve(f0, g, t[-1], tol=tol, samples=t)
    a_full = to_resonant_frame(traj.coeffs, traj.t, f0.t)
    tau = g * (traj.t - f0.t)
    res = evolve(couplings.scaled(2.0), ModeState(a0), float(tau[-1]), tol=max(tol, 1e-13),
                 samples=tau)
    metric = float(np.max(np.abs(np.abs(a_full) - np.abs(res.amps))))
    p = np.abs(a_full) ** 2
    Nt = p.sum(axis=1)
    Et = p @ np.arange(K + 1)
    return CompareResult(metric, tau, a_full, res.amps,
                         float(np.max(np.abs(Nt - Nt[0]))), float(np.max(np.abs(Et - Et[0]))))
