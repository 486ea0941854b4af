"""Three-parameter solution family of the solvable resonant systems.

    a_n = sqrt( prod_{j<n} (1 + j*lam) / n! ) * (b + a*n) * p**n,    lam = 1/G

For lam = 0 (G infinite) the prefactor is 1/sqrt(n!), for lam = 1 it is 1.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import least_squares, minimize_scalar

from .errors import ConstantObservable, NoReturnFound, PNormViolation
from .evolution import ModeState

P_MARGIN = 1e-3


@dataclass(frozen=True)
class AnsatzParams:
    b: complex
    a: complex
    p: complex
    lam: float = 0.0

    @property
    def G(self) -> float:
        return math.inf if self.lam == 0 else 1.0 / self.lam


def prefactors(lam: float, n_max: int) -> np.ndarray:
    """sqrt(prod_{j<n}(1 + j lam) / n!), computed in log space."""
    n = np.arange(n_max + 1)
    log_prod = np.concatenate([[0.0], np.cumsum(np.log1p(lam * n[:-1]))])
    log_fact = np.concatenate([[0.0], np.cumsum(np.log(n[1:]))])
    return np.exp(0.5 * (log_prod - log_fact))


def _profile(p: complex, lam: float, n_max: int) -> tuple[np.ndarray, np.ndarray]:
    n = np.arange(n_max + 1)
    base = prefactors(lam, n_max) * np.power(complex(p), n)
    return base, n * base


def ansatz_state(params: AnsatzParams, n_max: int) -> ModeState:
    if abs(params.p) > 1 - P_MARGIN:
        raise PNormViolation(f"|p| = {abs(params.p):.6g} exceeds {1 - P_MARGIN}")
    f0, f1 = _profile(params.p, params.lam, n_max)
    return ModeState(params.b * f0 + params.a * f1)


def tail_fraction(params: AnsatzParams, n_max: int, extra: int = 400) -> float:
    """Norm of the family member beyond n_max relative to its full norm."""
    full = ansatz_state(params, n_max + extra).amps
    return float(np.linalg.norm(full[n_max + 1:]) / np.linalg.norm(full))


@dataclass
class AnsatzFit:
    params: AnsatzParams
    residual: float
    converged: bool


def _project(s: np.ndarray, p: complex, lam: float):
    f0, f1 = _profile(p, lam, s.shape[0] - 1)
    F = np.stack([f0, f1], axis=1)
    coef, *_ = np.linalg.lstsq(F, s, rcond=None)
    return coef, s - F @ coef


def _ratio_guesses(s: np.ndarray, lam: float) -> list[complex]:
    """Candidates for p from a_1/a_0 = f_1 p (1 + u) and a_2/a_0 = f_2 p^2 (1 + 2u), u = a/b.

    Eliminating p leaves a quadratic in u; both roots are returned.
    """
    f = prefactors(lam, 2)
    if abs(s[0]) < 1e-300:
        return []
    r1 = s[1] / (f[1] * s[0])
    r2 = s[2] / (f[2] * s[0])
    if abs(r1) < 1e-14:
        return [complex(np.sqrt(r2 + 0j))] if abs(r2) > 0 else [0j]
    rho = r2 / r1 ** 2
    if abs(rho) < 1e-14:
        return [complex(r1)]
    disc = np.sqrt(1 - rho + 0j)
    roots = [((1 - rho) + disc) / rho, ((1 - rho) - disc) / rho]
    return [complex(r1 / (1 + u)) for u in sorted(roots, key=abs) if abs(1 + u) > 1e-300]


def fit_ansatz(s: ModeState, lam: float, starts: int = 12, p0: complex | None = None) -> AnsatzFit:
    """Least-squares projection of ``s`` onto the family with fixed ``lam``.

    (b, a) enter linearly and are eliminated exactly for each trial p; the
    remaining two real unknowns are found by Levenberg-Marquardt, started from
    the ratio estimate built from a_0, a_1, a_2 and, if that is not good enough,
    from a ring of points in the disk.  Passing ``p0`` (e.g. the previous fit
    along a trajectory) makes that the first start and skips the ring search.
    """
    x = np.asarray(s.amps if isinstance(s, ModeState) else s, dtype=complex)
    norm = np.linalg.norm(x)
    if norm == 0:
        raise ValueError("cannot fit the zero state")
    if x.shape[0] < 3:
        raise ValueError("need at least three modes")
    y = x / norm

    def fun(v):
        _, r = _project(y, complex(v[0], v[1]), lam)
        return np.concatenate([r.real, r.imag])

    def run(p0: complex):
        sol = least_squares(fun, [p0.real, p0.imag], method="trf", xtol=1e-15, ftol=1e-15,
                            gtol=1e-15, max_nfev=2000)
        return float(np.linalg.norm(sol.fun)), complex(sol.x[0], sol.x[1]), bool(sol.success)

    warm = p0 is not None
    guesses = [complex(p0)] if warm else []
    guesses += [g for g in _ratio_guesses(y, lam) if np.isfinite(g) and abs(g) < 1]
    if not warm:
        guesses = guesses[:2]
    best = None
    for start in guesses:
        cand = run(start)
        if best is None or cand[0] < best[0]:
            best = cand
        if warm and best[0] <= 1e-12:
            break
    if best is None or (not warm and best[0] > 1e-8):
        ring = [0.5 * r * np.exp(2j * np.pi * k / starts) for r in (0.4, 1.2) for k in range(starts)]
        for start in [0.05 + 0j] + ring:
            cand = run(start)
            if best is None or cand[0] < best[0]:
                best = cand
    res, p, ok = best
    coef, _ = _project(y, p, lam)
    params = AnsatzParams(complex(coef[0] * norm), complex(coef[1] * norm), p, lam)
    converged = ok and np.isfinite(res) and abs(p) <= 1 - P_MARGIN
    return AnsatzFit(params, res, converged)


def track_ansatz(amps, lam: float, p0: complex | None = None) -> list[AnsatzFit]:
    """Fit every row of ``amps`` (samples x modes), warm-starting from the previous p.

    Whenever the warm-started residual jumps above twice the previous one the
    full multi-start search is run as well and the better fit kept.
    """
    fits: list[AnsatzFit] = []
    prev_p, prev_r = p0, None
    for row in np.asarray(amps):
        fit = fit_ansatz(row, lam, p0=prev_p)
        if prev_p is None or (prev_r is not None and fit.residual > 2 * prev_r + 1e-12):
            if prev_p is not None:
                alt = fit_ansatz(row, lam)
                fit = alt if alt.residual < fit.residual else fit
        fits.append(fit)
        prev_p, prev_r = fit.params.p, fit.residual
    return fits


@dataclass
class PeriodResult:
    period: float
    return_residual: float


def detect_period(tau, series, threshold: float | None = None) -> PeriodResult:
    """First recurrence of a sampled (vector) series to its initial value.

    Local minima of ``max_i |x_i(tau) - x_i(0)|`` that fall below ``threshold``
    (default: 5% of the series' range) are candidates; the earliest one is
    refined by a parabola through the squared distance at the neighbouring
    samples and polished on a cubic-spline interpolant of the series.  The
    reported residual is the sup-norm distance at the refined time.
    """
    tau = np.asarray(tau, dtype=float)
    X = np.asarray(series, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    if len(tau) < 200:
        raise ValueError(f"need at least 200 samples, got {len(tau)}")
    span = float(np.max(X.max(axis=0) - X.min(axis=0)))
    if span < 1e-12:
        raise ConstantObservable(f"series varies by only {span:.3e}")
    if threshold is None:
        threshold = 0.05 * span
    dist = np.max(np.abs(X - X[0]), axis=1)
    d2 = np.sum((X - X[0]) ** 2, axis=1)
    # leave the neighbourhood of tau = 0 first
    away = np.nonzero(dist > threshold)[0]
    if not len(away):
        raise NoReturnFound("series never leaves its initial neighbourhood")
    start = away[0]
    for i in range(max(start, 1), len(tau) - 1):
        if dist[i] < threshold and d2[i] <= d2[i - 1] and d2[i] <= d2[i + 1]:
            break
    else:
        raise NoReturnFound(f"no return below {threshold:.3e} within tau <= {tau[-1]:g}")
    t_lo, t_mid, t_hi = tau[i - 1], tau[i], tau[i + 1]
    y_lo, y_mid, y_hi = d2[i - 1], d2[i], d2[i + 1]
    denom = (t_lo - t_mid) * (t_lo - t_hi) * (t_mid - t_hi)
    A = (t_hi * (y_mid - y_lo) + t_mid * (y_lo - y_hi) + t_lo * (y_hi - y_mid)) / denom
    B = (t_hi ** 2 * (y_lo - y_mid) + t_mid ** 2 * (y_hi - y_lo) + t_lo ** 2 * (y_mid - y_hi)) / denom
    t_star = -B / (2 * A) if A > 0 else t_mid
    t_star = float(np.clip(t_star, t_lo, t_hi))
    lo, hi = max(i - 4, 0), min(i + 5, len(tau))
    spline = CubicSpline(tau[lo:hi], X[lo:hi], axis=0)
    opt = minimize_scalar(lambda t: float(np.sum((spline(t) - X[0]) ** 2)),
                          bounds=(t_lo, t_hi), method="bounded", options={"xatol": 1e-12})
    if opt.success and opt.fun <= np.sum((spline(t_star) - X[0]) ** 2):
        t_star = float(opt.x)
    resid = float(np.max(np.abs(spline(t_star) - X[0])))
    return PeriodResult(t_star, resid)


def spectrum(amps: np.ndarray) -> np.ndarray:
    return np.abs(np.asarray(amps)) ** 2
