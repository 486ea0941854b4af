"""Slow-time evolution of the truncated resonant system.

The right-hand side is the resonant equation of motion in the form::

    da_n/dtau = i sum_m sum_k C[n, m, k, n+m-k] abar_m a_k a_{n+m-k}

with all indices restricted to [0, n_max].  With ``H_res = sum C abar abar a a``
over ordered quartets this equals ``(i/2) dH_res/dabar_n``, so the flow is the
Hamiltonian flow of H_res run at half speed; all conservation statements are
unaffected by that rescaling of tau.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .couplings import BreathingVector, CouplingTensor
from .integrate import dopri5


@dataclass
class ModeState:
    amps: np.ndarray
    tau: float = 0.0

    def __post_init__(self):
        self.amps = np.asarray(self.amps, dtype=complex)
        if self.amps.ndim != 1:
            raise ValueError("amplitudes must be a vector")
        if not np.all(np.isfinite(self.amps)):
            raise ValueError("non-finite amplitudes")

    @property
    def n_max(self) -> int:
        return self.amps.shape[0] - 1

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))


class _Kernel:
    """Precomputed gather tables for the O(N^3) contraction."""

    def __init__(self, C: CouplingTensor):
        K = C.n_max
        N = K + 1
        n, m, k = np.meshgrid(np.arange(N), np.arange(N), np.arange(N), indexing="ij")
        l = n + m - k
        ok = (l >= 0) & (l <= K)
        lc = np.clip(l, 0, K)
        self.T = np.where(ok, C.dense()[n, m, k, lc], 0.0)
        self.l_idx = lc
        self.N = N


def _kernel(C: CouplingTensor) -> _Kernel:
    ker = getattr(C, "_kernel", None)
    if ker is None:
        ker = _Kernel(C)
        C._kernel = ker
    return ker


def _amps(s) -> np.ndarray:
    return s.amps if isinstance(s, ModeState) else np.asarray(s, dtype=complex)


def rhs(C: CouplingTensor, s) -> np.ndarray:
    """Time derivative of the amplitudes (accepts a ModeState or a vector)."""
    a = _amps(s)
    ker = _kernel(C)
    if a.shape[0] != ker.N:
        raise ValueError(f"state has {a.shape[0]} modes, couplings have {ker.N}")
    # inner[n, m] = sum_k T[n,m,k] a_k a_{n+m-k}; then contract m with abar
    inner = np.einsum("nmk,nmk->nm", ker.T, a[None, None, :] * a[ker.l_idx])
    return 1j * (inner @ a.conj())


def hamiltonian(C: CouplingTensor, s) -> float:
    """H_res = sum over ordered resonant quartets of C abar_n abar_m a_k a_l."""
    a = _amps(s)
    return float(np.real(np.vdot(a, -1j * rhs(C, a))))


def number(s) -> float:
    a = _amps(s)
    return float(np.sum(np.abs(a) ** 2))


def energy(s) -> float:
    a = _amps(s)
    return float(np.sum(np.arange(a.shape[0]) * np.abs(a) ** 2))


def breathing_value(s, bv: BreathingVector) -> complex:
    """B0 = sum_n beta_n abar_n a_{n+1}."""
    a = _amps(s)
    beta = bv.array(a.shape[0] - 1)[:-1]
    return complex(np.sum(beta * a[:-1].conj() * a[1:]))


@dataclass
class Trajectory:
    tau: np.ndarray
    amps: np.ndarray           # (samples, modes)
    n_steps: int = 0
    n_rejected: int = 0

    def state(self, i: int) -> ModeState:
        return ModeState(self.amps[i], float(self.tau[i]))

    def __len__(self) -> int:
        return len(self.tau)


def evolve(C: CouplingTensor, s0: ModeState, tau_end: float, tol: float = 1e-10,
           samples=None) -> Trajectory:
    """Integrate from ``s0.tau`` to ``tau_end``.

    ``samples`` is either a number of equally spaced output times (endpoints
    included) or an explicit array of times.
    """
    if not 1e-13 <= tol <= 1e-6:
        raise ValueError(f"tol must lie in [1e-13, 1e-6], got {tol}")
    t0 = float(s0.tau)
    if samples is None:
        t_eval = np.array([t0, tau_end])
    elif np.isscalar(samples):
        t_eval = np.linspace(t0, tau_end, int(samples))
    else:
        t_eval = np.asarray(samples, dtype=float)
    sol = dopri5(lambda t, y: rhs(C, y), (t0, tau_end), s0.amps, tol=tol, t_eval=t_eval)
    return Trajectory(sol.t, sol.y, sol.n_steps, sol.n_rejected)


@dataclass
class ConservedReport:
    """Observables along a trajectory and their drifts relative to the first sample."""

    tau: np.ndarray
    N: np.ndarray
    E: np.ndarray
    H_res: np.ndarray
    B0: np.ndarray
    closure: np.ndarray            # {B0bar, B0} evaluated on the state
    cauchy_schwarz_ok: bool
    drifts: dict = field(default_factory=dict)

    def summary(self) -> dict:
        return {"samples": int(len(self.tau)), "tau_end": float(self.tau[-1]),
                "N0": float(self.N[0]), "E0": float(self.E[0]), "H0": float(self.H_res[0]),
                "B0_0": [float(self.B0[0].real), float(self.B0[0].imag)],
                "cauchy_schwarz_ok": bool(self.cauchy_schwarz_ok), "drifts": dict(self.drifts)}


def _rel_drift(x: np.ndarray) -> float:
    ref = abs(x[0])
    d = float(np.max(np.abs(x - x[0])))
    return d / ref if ref > 0 else d


def conserved_report(traj: Trajectory, C: CouplingTensor, bv: BreathingVector) -> ConservedReport:
    A = traj.amps
    K = A.shape[1] - 1
    p = np.abs(A) ** 2
    N = p.sum(axis=1)
    E = p @ np.arange(K + 1)
    H = np.array([hamiltonian(C, a) for a in A])
    beta = bv.array(K)
    B0 = np.sum(beta[:-1] * A[:, :-1].conj() * A[:, 1:], axis=1)
    b2 = beta[:-1] ** 2
    weights = np.concatenate([b2, [0.0]]) - np.concatenate([[0.0], b2])
    closure = 1j * (p @ weights)
    bound = np.sum(beta[:-1] * np.abs(A[:, :-1]) * np.abs(A[:, 1:]), axis=1)
    cs_ok = bool(np.all(np.abs(B0) <= bound * (1 + 1e-12) + 1e-300))
    drifts = {"N": _rel_drift(N), "E": _rel_drift(E), "H_res": _rel_drift(H), "B0": _rel_drift(B0),
              "B0_abs": float(np.max(np.abs(B0 - B0[0])))}
    return ConservedReport(traj.tau, N, E, H, B0, closure, cs_ok, drifts)


def breathing_transform(s: ModeState, eta: complex, bv: BreathingVector) -> ModeState:
    """First-order kinematic shift a_n -> a_n + i eta beta_n a_{n+1} + i conj(eta) beta_{n-1} a_{n-1}."""
    if abs(eta) > 0.1:
        raise ValueError(f"|eta| = {abs(eta)} exceeds the first-order regime 0.1")
    a = s.amps
    beta = bv.array(a.shape[0] - 1)
    up = np.zeros_like(a)
    down = np.zeros_like(a)
    up[:-1] = beta[:-1] * a[1:]
    down[1:] = beta[:-1] * a[:-1]
    return ModeState(a + 1j * eta * up + 1j * np.conj(eta) * down, s.tau)
