"""Orthonormal Hermite functions and Gauss-Hermite rules on the real line."""

from __future__ import annotations

import numpy as np


def hermite_functions(n_max: int, x) -> np.ndarray:
    """Values ``h_n(x)`` for n = 0..n_max, shape ``(len(x), n_max + 1)``.

    Uses the three-term recurrence of the normalized functions, which stays
    well scaled where the raw polynomials would overflow.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (n_max + 1,))
    out[..., 0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[..., 1] = np.sqrt(2.0) * x * out[..., 0]
    for n in range(1, n_max):
        out[..., n + 1] = (np.sqrt(2.0 / (n + 1)) * x * out[..., n]
                           - np.sqrt(n / (n + 1.0)) * out[..., n - 1])
    return out


def hermite_function_derivatives(n_max: int, x) -> np.ndarray:
    """Values ``h_n'(x) = sqrt(n/2) h_{n-1} - sqrt((n+1)/2) h_{n+1}``."""
    h = hermite_functions(n_max + 1, x)
    n = np.arange(n_max + 1)
    d = -np.sqrt((n + 1) / 2.0) * h[..., 1:]
    d[..., 1:] += np.sqrt(n[1:] / 2.0) * h[..., :n_max]
    return d


def line_quadrature(n_nodes: int, scale: float = 1.0) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for ``int F(x) dx`` over the real line.

    Built on the Gauss-Hermite rule for weight ``exp(-y^2)`` with ``x = y/scale``.
    The rule is exact when ``F(x) exp(scale^2 x^2)`` is a polynomial of degree
    below ``2 * n_nodes``.  ``scale=1`` integrates products of two Hermite
    functions exactly; ``scale=sqrt(2)`` does the same for products of four.
    """
    y, w = np.polynomial.hermite.hermgauss(n_nodes)
    weights = np.exp(np.log(w) + y * y) / scale
    return y / scale, weights
