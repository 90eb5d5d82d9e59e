"""Closed-form manufactured solutions ``u(x, t) = T(t) S(x)``.

Examples 1 and 2 live on ``(0, pi)``, example 3 on the unit square.  All
use the diffusion coefficient ``a(xi) = 3 + sin(xi)`` and a forcing chosen
so that ``u`` solves the nonlocal problem exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.special import gamma

FORCING_MODES = ("pure", "reactive")


def caputo_power(t, alpha, p):
    """Caputo derivative of ``t**p``: ``Gamma(p+1)/Gamma(p+1-alpha) t**(p-alpha)``."""
    if p == 0:
        return np.zeros_like(np.asarray(t, dtype=float))
    if p < 0:
        raise ValueError(f"power must be nonnegative, got {p}")
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("Caputo derivative defined for t >= 0 only")
    coef = gamma(p + 1.0) / gamma(p + 1.0 - alpha)
    if p == alpha:
        return np.full_like(t, coef)
    with np.errstate(divide="ignore"):
        return coef * t ** (p - alpha)


def diffusion(xi):
    return 3.0 + np.sin(xi)


def diffusion_prime(xi):
    return np.cos(xi)


@dataclass(frozen=True, eq=False)
class ManufacturedCase:
    id: int
    alpha: float
    domain: str                 # "interval" or "unit-square"
    length: float               # side length of the domain
    temporal: Callable          # T(t)
    temporal_caputo: Callable   # Caputo derivative of T
    spatial: Callable           # S(x)
    spatial_grad: Callable      # grad S, shape (..., dim)
    spatial_lap: Callable       # Laplacian of S
    spatial_integral: float     # integral of S over the domain
    forcing_mode: str = "pure"

    def a(self, xi):
        return diffusion(xi)

    def da(self, xi):
        return diffusion_prime(xi)

    def u(self, x, t):
        return self.temporal(t) * self.spatial(x)

    def grad(self, x, t):
        return self.temporal(t) * self.spatial_grad(x)

    def laplacian(self, x, t):
        return self.temporal(t) * self.spatial_lap(x)

    def caputo(self, x, t):
        return self.temporal_caputo(t) * self.spatial(x)

    def l_exact(self, t):
        return self.temporal(t) * self.spatial_integral

    def g(self, x, t):
        """Forcing with ``caputo(u) - a(l(u)) lap(u) = g``."""
        return self.caputo(x, t) - self.a(self.l_exact(t)) * self.laplacian(x, t)

    def f(self, x, t, u):
        if self.forcing_mode == "pure":
            return np.broadcast_to(self.g(x, t), np.shape(u))
        return u + self.g(x, t) - self.u(x, t)

    @property
    def df(self):
        """``df/du`` as a callable, or ``None`` when ``f`` ignores ``u``."""
        if self.forcing_mode == "pure":
            return None
        return lambda x, t, u: np.ones_like(u)


def _sin_x(x):
    return np.sin(x[..., 0])


def _sin_x_grad(x):
    return np.cos(x[..., 0])[..., None]


def _sin_x_lap(x):
    return -np.sin(x[..., 0])


def _bubble(x):
    X, Y = x[..., 0], x[..., 1]
    return (X - X * X) * (Y - Y * Y)


def _bubble_grad(x):
    X, Y = x[..., 0], x[..., 1]
    return np.stack([(1 - 2 * X) * (Y - Y * Y), (X - X * X) * (1 - 2 * Y)], axis=-1)


def _bubble_lap(x):
    X, Y = x[..., 0], x[..., 1]
    return -2.0 * ((Y - Y * Y) + (X - X * X))


def case(id: int, alpha: float, forcing_mode: str = "pure") -> ManufacturedCase:
    if not 0.0 < alpha < 1.0:
        raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
    if forcing_mode not in FORCING_MODES:
        raise ValueError(f"unknown forcing mode {forcing_mode!r}")

    if id == 1:
        def T(t):
            return np.asarray(t, dtype=float) ** 3

        def DT(t):
            return caputo_power(t, alpha, 3)
    elif id in (2, 3):
        def T(t):
            t = np.asarray(t, dtype=float)
            return t ** 3 + t ** alpha

        def DT(t):
            return caputo_power(t, alpha, 3) + caputo_power(t, alpha, alpha)
    else:
        raise ValueError(f"unknown example id {id}; expected 1, 2 or 3")

    if id in (1, 2):
        return ManufacturedCase(id, float(alpha), "interval", math.pi, T, DT,
                                _sin_x, _sin_x_grad, _sin_x_lap, 2.0, forcing_mode)
    return ManufacturedCase(id, float(alpha), "unit-square", 1.0, T, DT,
                            _bubble, _bubble_grad, _bubble_lap, 1.0 / 36.0,
                            forcing_mode)


def problem_from_case(mc: ManufacturedCase):
    """Solver problem with ``u0 = 0`` for a manufactured case."""
    from .stepper import ProblemSpec
    return ProblemSpec(alpha=mc.alpha, a=mc.a, da=mc.da, f=mc.f, df=mc.df,
                       grad_u0=None, a_bounds=(2.0, 4.0))


def mesh_for_case(mc: ManufacturedCase, M_s: int):
    from .meshes import build_interval_mesh, build_square_mesh
    if mc.domain == "interval":
        return build_interval_mesh(mc.length, M_s)
    return build_square_mesh(M_s)
