"""Dormand-Prince 5(4) integrator with step-size control and dense output.

Works on complex state vectors.  Each accepted step satisfies

    max_i |err_i| / (tol * (1 + max(|y_i|, |y_new_i|))) <= 1

where ``err`` is the difference between the embedded 5th and 4th order
solutions.  The 5th order solution is propagated.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import StepSizeUnderflow

C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (71 / 57600, -71 / 16695, 71 / 1920, -17253 / 339200, 22 / 525, -1 / 40)
# continuous extension (Hairer, Norsett & Wanner)
D1, D3, D4, D5, D6, D7 = (-12715105075 / 11282082432, 87487479700 / 32700410799,
                          -10690763975 / 1880347072, 701980252875 / 199316789632,
                          -1453857185 / 822651844, 69997945 / 29380423)


@dataclass
class Solution:
    t: np.ndarray
    y: np.ndarray          # shape (len(t), dim)
    n_steps: int
    n_rejected: int
    n_evals: int


def _initial_step(fun, t0, y0, f0, tol, direction):
    sc = tol * (1.0 + np.abs(y0))
    d0 = np.max(np.abs(y0) / sc)
    d1 = np.max(np.abs(f0) / sc)
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    y1 = y0 + direction * h0 * f0
    f1 = fun(t0 + direction * h0, y1)
    d2 = np.max(np.abs(f1 - f0) / sc) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def dopri5(fun: Callable[[float, np.ndarray], np.ndarray], t_span: tuple[float, float], y0,
           tol: float = 1e-10, t_eval: Sequence[float] | None = None,
           first_step: float | None = None, max_steps: int = 2_000_000) -> Solution:
    """Integrate ``y' = fun(t, y)`` from ``t_span[0]`` to ``t_span[1]``.

    ``t_eval`` (monotone, inside the span) selects output times, filled by the
    4th order continuous extension; by default only the endpoints are returned.
    """
    t0, t1 = float(t_span[0]), float(t_span[1])
    y = np.array(y0, dtype=complex)
    direction = 1.0 if t1 >= t0 else -1.0
    if t_eval is None:
        t_eval = np.array([t0, t1])
    t_eval = np.asarray(t_eval, dtype=float)
    out = np.empty((len(t_eval), y.size), dtype=complex)
    i_out = 0
    while i_out < len(t_eval) and t_eval[i_out] == t0:
        out[i_out] = y
        i_out += 1
    if t1 == t0:
        out[i_out:] = y
        return Solution(t_eval, out, 0, 0, 0)

    t = t0
    k1 = fun(t, y)
    n_evals = 1
    h = abs(first_step) if first_step else _initial_step(fun, t, y, k1, tol, direction)
    n_evals += 0 if first_step else 1
    n_steps = n_rej = 0
    span = abs(t1 - t0)
    while direction * (t1 - t) > 0:
        if n_steps + n_rej >= max_steps:
            raise StepSizeUnderflow(f"step budget of {max_steps} exhausted at t={t}", t)
        if h < 1e-14 * max(1.0, abs(t)) or h < 1e-15 * span:
            raise StepSizeUnderflow(f"step size {h:.3e} underflowed at t={t}", t)
        h = min(h, abs(t1 - t))
        hs = direction * h
        k2 = fun(t + C2 * hs, y + hs * (A21 * k1))
        k3 = fun(t + C3 * hs, y + hs * (A31 * k1 + A32 * k2))
        k4 = fun(t + C4 * hs, y + hs * (A41 * k1 + A42 * k2 + A43 * k3))
        k5 = fun(t + C5 * hs, y + hs * (A51 * k1 + A52 * k2 + A53 * k3 + A54 * k4))
        k6 = fun(t + hs, y + hs * (A61 * k1 + A62 * k2 + A63 * k3 + A64 * k4 + A65 * k5))
        y_new = y + hs * (A71 * k1 + A73 * k3 + A74 * k4 + A75 * k5 + A76 * k6)
        k7 = fun(t + hs, y_new)
        n_evals += 6
        err = hs * (E1 * k1 + E3 * k3 + E4 * k4 + E5 * k5 + E6 * k6 + E7 * k7)
        sc = tol * (1.0 + np.maximum(np.abs(y), np.abs(y_new)))
        err_norm = float(np.max(np.abs(err) / sc))
        if err_norm <= 1.0:
            t_new = t + hs if h < abs(t1 - t) else t1
            # fill requested outputs inside (t, t_new]
            if i_out < len(t_eval) and direction * (t_eval[i_out] - t_new) <= 0:
                ydiff = y_new - y
                bspl = hs * k1 - ydiff
                r4 = ydiff - hs * k7 - bspl
                r5 = hs * (D1 * k1 + D3 * k3 + D4 * k4 + D5 * k5 + D6 * k6 + D7 * k7)
                while i_out < len(t_eval) and direction * (t_eval[i_out] - t_new) <= 0:
                    if t_eval[i_out] == t_new:
                        out[i_out] = y_new
                    else:
                        th = (t_eval[i_out] - t) / hs
                        th1 = 1.0 - th
                        out[i_out] = y + th * (ydiff + th1 * (bspl + th * (r4 + th1 * r5)))
                    i_out += 1
            t, y, k1 = t_new, y_new, k7
            n_steps += 1
            fac = 0.9 * err_norm ** -0.2 if err_norm > 0 else 5.0
            h = h * min(5.0, max(0.2, fac))
        else:
            n_rej += 1
            h = h * max(0.2, 0.9 * err_norm ** -0.2)
    return Solution(t_eval, out, n_steps, n_rej, n_evals)
