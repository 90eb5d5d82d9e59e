"""L1 approximation of the Caputo derivative on a nonuniform time grid.

For a grid ``0 = t_0 < ... < t_N`` the L1 weights of level ``n`` are

    d[n, k] = ((t_n - t_{n-k})**(1-a) - (t_n - t_{n-k+1})**(1-a)) / tau_{n-k+1}

for ``k = 1..n``, and the discrete operator is

    D v^n = (d[n,1] v^n - d[n,n] v^0 + sum_{k=1}^{n-1} (d[n,k+1] - d[n,k]) v^{n-k})
            / Gamma(2 - a).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma

from .meshes import TimeGrid


def _check_alpha(alpha):
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")


def _check_level(grid, n):
    if not 1 <= n <= grid.N:
        raise ValueError(f"time level {n} outside 1..{grid.N}")


@dataclass(frozen=True)
class L1Row:
    """Weights ``d[n, 1..n]`` of one time level; ``d[0]`` is ``d[n, 1]``."""

    n: int
    alpha: float
    d: np.ndarray

    @property
    def gamma2(self) -> float:
        return gamma(2.0 - self.alpha)

    def history_weights(self) -> np.ndarray:
        """Coefficients ``w_j`` with ``Gamma(2-a) D v^n = sum_j w_j v^j``."""
        n, d = self.n, self.d
        w = np.empty(n + 1)
        w[n] = d[0]
        w[0] = -d[n - 1]
        if n > 1:
            # j = n - k for k = 1..n-1  ->  d[n,k+1] - d[n,k]
            k = n - np.arange(1, n)
            w[1:n] = d[k] - d[k - 1]
        return w


def d_row(grid: TimeGrid, n: int, alpha: float) -> L1Row:
    _check_alpha(alpha)
    _check_level(grid, n)
    t = grid.nodes
    e = 1.0 - alpha
    d = np.empty(n)
    d[0] = grid.steps[n - 1] ** (-alpha)
    if n > 1:
        k = np.arange(2, n + 1)
        near = t[n] - t[n - k + 1]
        tau = grid.steps[n - k]
        # A**e - B**e with A = B + tau, written to survive tau << B
        d[1:] = near ** e * np.expm1(e * np.log1p(tau / near)) / tau
    return L1Row(n=n, alpha=float(alpha), d=d)


def discrete_caputo(values, row: L1Row):
    """Apply the discrete Caputo operator to ``values[0..n]``.

    ``values`` may be a sequence of scalars or an array whose leading axis
    is the time level; trailing axes are treated componentwise.
    """
    v = np.asarray(values, dtype=float)
    if v.shape[0] != row.n + 1:
        raise ValueError(
            f"history has {v.shape[0]} levels, row expects {row.n + 1}")
    w = row.history_weights()
    return np.tensordot(w, v, axes=(0, 0)) / row.gamma2


def d_matrix(grid: TimeGrid, alpha: float) -> np.ndarray:
    """Lower-triangular array with ``D[n, k] = d[n, k]`` (1-based, zero padded)."""
    N = grid.N
    D = np.zeros((N + 1, N + 1))
    for n in range(1, N + 1):
        D[n, 1:n + 1] = d_row(grid, n, alpha).d
    return D


@dataclass(frozen=True)
class PCoefficients:
    """Complementary convolution kernel of level ``n``.

    ``p[i - 1]`` stores ``p^{(n)}_{n-i}`` for ``i = 1..n``.
    """

    n: int
    alpha: float
    p: np.ndarray


def _p_from_dmatrix(D, steps, alpha, n):
    g2 = gamma(2.0 - alpha)
    p = np.zeros(n + 1)  # p[i] for i = 1..n
    p[n] = g2 * steps[n - 1] ** alpha
    for i in range(n - 1, 0, -1):
        k = np.arange(i + 1, n + 1)
        # Gamma(2-a) * (b^{(k)}_{k-i-1} - b^{(k)}_{k-i}) = d[k, k-i] - d[k, k-i+1]
        diff = D[k, k - i] - D[k, k - i + 1]
        p[i] = steps[i - 1] ** alpha * np.dot(diff, p[i + 1:n + 1])
    return p[1:]


def p_coefficients(grid: TimeGrid, alpha: float, n: int, D=None) -> PCoefficients:
    _check_alpha(alpha)
    _check_level(grid, n)
    if D is None:
        D = d_matrix(grid, alpha)
    return PCoefficients(n=n, alpha=float(alpha),
                         p=_p_from_dmatrix(D, grid.steps, alpha, n))


def p_table(grid: TimeGrid, alpha: float) -> list:
    """All ``PCoefficients`` for ``n = 1..N`` sharing one weight matrix."""
    D = d_matrix(grid, alpha)
    return [p_coefficients(grid, alpha, n, D) for n in range(1, grid.N + 1)]


def truncation_probe(exact_caputo: Callable, samples: Callable,
                     grid: TimeGrid, alpha: float) -> np.ndarray:
    """Local consistency error ``zeta^n`` for ``n = 1..N``.

    ``samples(t)`` evaluates the probe function and ``exact_caputo(t)`` its
    Caputo derivative; both must accept arrays.
    """
    _check_alpha(alpha)
    t = grid.nodes
    u = np.asarray(samples(t), dtype=float)
    exact = np.asarray(exact_caputo(t[1:]), dtype=float) * np.ones(grid.N)
    approx = np.array([discrete_caputo(u[:n + 1], d_row(grid, n, alpha))
                       for n in range(1, grid.N + 1)])
    return exact - approx


def temporal_rate(alpha: float, r: float) -> float:
    """Expected temporal order ``min(2 - alpha, r * alpha)``."""
    return min(2.0 - alpha, r * alpha)


def optimal_grading(alpha: float) -> float:
    return (2.0 - alpha) / alpha
