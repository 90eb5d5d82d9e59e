"""Error norms, observed orders and convergence tables."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .fem import element_data, error_rule
from .meshes import SpatialMesh

NORMS = ("Linf_time_L2", "L2_final_family", "H1_semi")


def l2_error(mesh: SpatialMesh, U, u_exact) -> float:
    """``||u_exact - U_h||_{L2}``; ``u_exact(x)`` is evaluated at quadrature points."""
    ed = element_data(mesh, error_rule(mesh))
    diff = u_exact(ed.qpoints) - ed.interpolate(U)
    return math.sqrt(float(np.sum(ed.jxw * diff ** 2)))


def h1_semi_error(mesh: SpatialMesh, U, grad_exact) -> float:
    """``||grad(u_exact - U_h)||_{L2}``."""
    ed = element_data(mesh, error_rule(mesh))
    diff = grad_exact(ed.qpoints) - ed.gradient(U)[:, None, :]
    return math.sqrt(float(np.sum(ed.jxw * np.sum(diff ** 2, axis=-1))))


def error_history(result, exact, norm="L2"):
    """Spatial error at every level ``n = 1..N``.

    ``exact`` is a manufactured case (anything with ``u(x, t)`` and
    ``grad(x, t)``).
    """
    mesh, t = result.mesh, result.grid.nodes
    out = np.empty(result.grid.N)
    for n in range(1, result.grid.N + 1):
        if norm == "L2":
            out[n - 1] = l2_error(mesh, result.history[n], lambda x: exact.u(x, t[n]))
        elif norm == "H1_semi":
            out[n - 1] = h1_semi_error(mesh, result.history[n],
                                       lambda x: exact.grad(x, t[n]))
        else:
            raise ValueError(f"unknown spatial norm {norm!r}")
    return out


def max_over_time(result, exact, norm="L2") -> float:
    """``max_{1<=n<=N}`` of the chosen spatial error norm."""
    errs = error_history(result, exact, norm)
    return float(errs.max()) if len(errs) else 0.0


def observed_order(errors: Sequence[float], resolutions: Sequence[float]) -> list:
    """Two-point orders ``ln(e_i/e_{i+1}) / ln(m_{i+1}/m_i)``; ``None`` where
    an error is not positive."""
    if len(errors) != len(resolutions) or len(errors) < 2:
        raise ValueError("need at least two (error, resolution) pairs")
    if any(b <= a for a, b in zip(resolutions, resolutions[1:])):
        raise ValueError("resolutions must be strictly increasing")
    orders = []
    for (e0, e1), (m0, m1) in zip(zip(errors, errors[1:]),
                                  zip(resolutions, resolutions[1:])):
        if e0 > 0 and e1 > 0:
            orders.append(math.log(e0 / e1) / math.log(m1 / m0))
        else:
            orders.append(None)
    return orders


@dataclass(frozen=True)
class ErrorRecord:
    example: int
    alpha: float
    r: float
    N: int
    Ms: int
    norm: str
    error: float
    order: Optional[float] = None


def convergence_table(records: Sequence[ErrorRecord], by: str) -> list:
    """Fill in orders along the resolution ``by`` (``"N"`` or ``"Ms"``).

    Records are grouped by (example, alpha, norm), sorted by the resolution
    and returned in that deterministic order; the finest row has no order.
    """
    groups = {}
    for rec in records:
        groups.setdefault((rec.example, rec.alpha, rec.norm), []).append(rec)
    out = []
    for key in sorted(groups):
        rows = sorted(groups[key], key=lambda rec: getattr(rec, by))
        res = [getattr(rec, by) for rec in rows]
        orders = observed_order([rec.error for rec in rows], res) if len(rows) > 1 else []
        for i, rec in enumerate(rows):
            order = orders[i] if i < len(orders) else None
            out.append(ErrorRecord(rec.example, rec.alpha, rec.r, rec.N, rec.Ms,
                                   rec.norm, rec.error, order))
    return out
