"""P1 finite element assembly on interior degrees of freedom.

Homogeneous Dirichlet conditions are eliminated: every matrix and vector
here is indexed by the interior dofs of a :class:`SpatialMesh` only.
Callables evaluated at quadrature points receive coordinates as an array
whose last axis is the space dimension.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .meshes import SpatialMesh

log = logging.getLogger(__name__)


class LinearSolveError(RuntimeError):
    """A sparse factorisation hit a zero pivot."""

    def __init__(self, msg, row=None):
        super().__init__(msg)
        self.row = row


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Rule on the reference simplex (``[0, 1]`` or the unit right triangle).

    ``weights`` sum to the reference measure; ``degree`` is the highest
    polynomial degree integrated exactly.
    """

    name: str
    dim: int
    points: np.ndarray
    weights: np.ndarray
    degree: int


def _gauss_interval(n):
    x, w = np.polynomial.legendre.leggauss(n)
    return QuadratureRule(f"gauss{n}", 1, (0.5 * (x + 1.0))[:, None], 0.5 * w,
                          2 * n - 1)


GAUSS3 = _gauss_interval(3)
GAUSS5 = _gauss_interval(5)

EDGE_MIDPOINTS = QuadratureRule(
    "edge-midpoints", 2,
    np.array([[0.5, 0.0], [0.5, 0.5], [0.0, 0.5]]),
    np.full(3, 1.0 / 6.0), 2)


def _dunavant6():
    a, wa = 0.445948490915965, 0.223381589678011
    b, wb = 0.091576213509771, 0.109951743655322
    pts = np.array([[a, a], [1 - 2 * a, a], [a, 1 - 2 * a],
                    [b, b], [1 - 2 * b, b], [b, 1 - 2 * b]])
    w = 0.5 * np.array([wa, wa, wa, wb, wb, wb])
    return QuadratureRule("dunavant6", 2, pts, w, 4)


DUNAVANT6 = _dunavant6()


def system_rule(mesh: SpatialMesh) -> QuadratureRule:
    """Rule used for assembling the discrete system."""
    return GAUSS3 if mesh.dim == 1 else EDGE_MIDPOINTS


def error_rule(mesh: SpatialMesh) -> QuadratureRule:
    """Refined rule used for error norms."""
    return GAUSS5 if mesh.dim == 1 else DUNAVANT6


def _reference_basis(dim, xi):
    if dim == 1:
        s = xi[:, 0]
        vals = np.column_stack([1.0 - s, s])
        grads = np.array([[-1.0], [1.0]])
    else:
        s, t = xi[:, 0], xi[:, 1]
        vals = np.column_stack([1.0 - s - t, s, t])
        grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return vals, grads


class ElementData:
    """Geometry of every cell evaluated for one quadrature rule."""

    def __init__(self, mesh: SpatialMesh, rule: QuadratureRule):
        if rule.dim != mesh.dim:
            raise ValueError(f"{rule.name} is a {rule.dim}D rule, mesh is {mesh.dim}D")
        self.mesh = mesh
        self.rule = rule
        verts = mesh.points[mesh.cells]                  # (E, nloc, dim)
        jac = np.swapaxes(verts[:, 1:] - verts[:, :1], 1, 2)   # (E, dim, dim)
        det = np.linalg.det(jac) if mesh.dim > 1 else jac[:, 0, 0]
        inv = np.linalg.inv(jac)
        self.vals, ref_grads = _reference_basis(mesh.dim, rule.points)  # (q, nloc)
        # grad phi = J^{-T} grad_ref phi
        self.grads = np.einsum("kd,edc->ekc", ref_grads, inv)           # (E, nloc, dim)
        self.jxw = np.abs(det)[:, None] * rule.weights[None, :]         # (E, q)
        self.qpoints = verts[:, :1] + np.einsum("qd,ecd->eqc", rule.points, jac)
        self.dofs = mesh.dof_of_node[mesh.cells]                        # (E, nloc)

    def interpolate(self, U):
        """Values of the P1 function with interior coefficients ``U`` at
        the quadrature points, shape ``(E, q)``."""
        nodal = self.mesh.to_nodal(U)[self.mesh.cells]
        return nodal @ self.vals.T

    def gradient(self, U):
        """Constant gradient of the P1 function on each cell, ``(E, dim)``."""
        nodal = self.mesh.to_nodal(U)[self.mesh.cells]
        return np.einsum("ek,ekc->ec", nodal, self.grads)

    def scatter_vector(self, local):
        """Sum element vectors ``(E, nloc)`` into the interior dof vector."""
        mask = self.dofs >= 0
        return np.bincount(self.dofs[mask], weights=local[mask],
                           minlength=self.mesh.num_dofs)

    def scatter_matrix(self, local):
        """Sum element matrices ``(E, nloc, nloc)`` into a CSR matrix."""
        nloc = self.dofs.shape[1]
        rows = np.repeat(self.dofs, nloc, axis=1).ravel()
        cols = np.tile(self.dofs, (1, nloc)).ravel()
        vals = local.reshape(len(local), -1).ravel()
        keep = (rows >= 0) & (cols >= 0)
        M = self.mesh.num_dofs
        A = sp.coo_matrix((vals[keep], (rows[keep], cols[keep])), shape=(M, M)).tocsr()
        A.sum_duplicates()
        A.sort_indices()
        return A


@lru_cache(maxsize=64)
def element_data(mesh: SpatialMesh, rule: QuadratureRule) -> ElementData:
    return ElementData(mesh, rule)


def _weighted_mass(ed, weight):
    # weight: (E, q) values multiplying phi_j phi_i
    return np.einsum("eq,qi,qj->eij", ed.jxw * weight, ed.vals, ed.vals)


def assemble_mass(mesh: SpatialMesh) -> sp.csr_matrix:
    ed = element_data(mesh, system_rule(mesh))
    return ed.scatter_matrix(_weighted_mass(ed, 1.0))


def assemble_stiffness(mesh: SpatialMesh) -> sp.csr_matrix:
    ed = element_data(mesh, system_rule(mesh))
    area = ed.jxw.sum(axis=1)
    local = area[:, None, None] * np.einsum("eic,ejc->eij", ed.grads, ed.grads)
    return ed.scatter_matrix(local)


def assemble_nodal_integrals(mesh: SpatialMesh) -> np.ndarray:
    """``c_j = integral of phi_j`` over the domain."""
    ed = element_data(mesh, system_rule(mesh))
    return ed.scatter_vector(ed.jxw @ ed.vals)


def assemble_load(mesh: SpatialMesh, g, t=None, rule=None) -> np.ndarray:
    """``(g(., t), phi_i)`` by quadrature; ``g`` is called as ``g(x, t)``."""
    ed = element_data(mesh, rule or system_rule(mesh))
    gq = np.broadcast_to(g(ed.qpoints, t), ed.jxw.shape)
    return ed.scatter_vector((ed.jxw * gq) @ ed.vals)


def assemble_reaction(mesh: SpatialMesh, s, U, rule=None) -> np.ndarray:
    """``(s(x, U_h), phi_i)`` with ``U_h`` interpolated at quadrature points."""
    ed = element_data(mesh, rule or system_rule(mesh))
    sq = np.broadcast_to(s(ed.qpoints, ed.interpolate(U)), ed.jxw.shape)
    return ed.scatter_vector((ed.jxw * sq) @ ed.vals)


def assemble_reaction_jacobian(mesh: SpatialMesh, ds, U, rule=None) -> sp.csr_matrix:
    """``(ds(x, U_h) phi_j, phi_i)``."""
    ed = element_data(mesh, rule or system_rule(mesh))
    dq = np.broadcast_to(ds(ed.qpoints, ed.interpolate(U)), ed.jxw.shape)
    return ed.scatter_matrix(_weighted_mass(ed, dq))


def assemble_gradient_load(mesh: SpatialMesh, grad_w, rule=None) -> np.ndarray:
    """``(grad w, grad phi_i)``; ``grad_w(x)`` returns ``(..., dim)``."""
    ed = element_data(mesh, rule or system_rule(mesh))
    gw = grad_w(ed.qpoints)                                     # (E, q, dim)
    integ = np.einsum("eq,eqc->ec", ed.jxw, gw)                 # (E, dim)
    return ed.scatter_vector(np.einsum("ec,ekc->ek", integ, ed.grads))


def ritz_projection(mesh: SpatialMesh, grad_w, rule=None) -> np.ndarray:
    """Coefficients of the energy projection of ``w`` onto the P1 space."""
    rhs = assemble_gradient_load(mesh, grad_w, rule or error_rule(mesh))
    return solve_sparse(assemble_stiffness(mesh), rhs)


def interpolate(mesh: SpatialMesh, w) -> np.ndarray:
    """Nodal interpolant coefficients of ``w(x)`` on the interior dofs."""
    return np.asarray(w(mesh.points[mesh.interior_nodes]), dtype=float)


def _bandwidth(A):
    A = A.tocoo()
    if A.nnz == 0:
        return 0
    return int(np.max(np.abs(A.row - A.col)))


def _factorize(A):
    n = A.shape[0]
    if _bandwidth(A) <= 1:
        ab = np.zeros((3, n))
        ab[0, 1:] = A.diagonal(1)
        ab[1] = A.diagonal(0)
        ab[2, :-1] = A.diagonal(-1)

        def apply(b):
            try:
                return scipy.linalg.solve_banded((1, 1), ab, b, check_finite=False)
            except np.linalg.LinAlgError as exc:
                row = _tridiagonal_zero_pivot(ab)
                raise LinearSolveError(f"zero pivot in banded solve at row {row}",
                                       row=row) from exc
        return apply
    try:
        lu = spla.splu(A.tocsc())
    except RuntimeError as exc:
        raise LinearSolveError(f"sparse LU failed: {exc}", row=_pivot_row(str(exc))) from exc
    return lu.solve


def _tridiagonal_zero_pivot(ab):
    # first vanishing pivot of unpivoted elimination, for diagnostics only
    piv = ab[1, 0]
    for i in range(ab.shape[1]):
        if i:
            piv = ab[1, i] - ab[2, i - 1] * ab[0, i] / piv
        if piv == 0.0:
            return i
    return None


def _pivot_row(msg):
    digits = [int(tok) for tok in msg.replace(",", " ").replace(".", " ").split()
              if tok.isdigit()]
    return digits[0] - 1 if digits else None


def solve_sparse(A, rhs, refine=2) -> np.ndarray:
    """Direct solve of ``A x = rhs``; tridiagonal matrices use a banded LU.

    ``rhs`` may be a vector or an ``(M, k)`` block.  Up to ``refine`` steps
    of iterative refinement are taken when the residual misses
    ``1e-13 * (1 + |rhs|_inf)``.
    """
    A = sp.csr_matrix(A)
    if A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    rhs = np.asarray(rhs, dtype=float)
    solve = _factorize(A)
    x = solve(rhs)
    tol = 1e-13 * (1.0 + np.max(np.abs(rhs), initial=0.0))
    for _ in range(refine + 1):
        res = rhs - A @ x
        if np.max(np.abs(res), initial=0.0) <= tol:
            break
        if _ == refine:
            log.warning("linear solve residual %.3e above %.3e",
                        np.max(np.abs(res)), tol)
            break
        x = x + solve(res)
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("non-finite solution (singular matrix)")
    return x
