"""Fully discrete L1 / P1 time stepping with a bordered Newton iteration.

At level ``n`` the unknowns are the coefficients ``U`` and the scalar
``d`` standing in for ``l(U)``.  With ``s = Gamma(2-alpha) / d[n,1]`` and
``H`` the L1 history term, the residuals are

    F     = M U + M H + s a(d) K U - s (f(t_n, U_h), phi)
    F_end = c . U - d

and the Jacobian keeps the sparse block ``A = M + s a(d) K - s (f' phi, phi)``
bordered by ``b = s a'(d) K U``, ``c`` and ``gamma = -1``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp
from scipy.special import gamma

from . import fem
from .l1 import L1Row, d_row
from .meshes import SpatialMesh, TimeGrid

log = logging.getLogger(__name__)

GAMMA_BORDER = -1.0


class StepFailure(RuntimeError):
    """The solver gave up at time level ``level``."""

    def __init__(self, level, msg):
        super().__init__(msg)
        self.level = level


class NewtonError(StepFailure):
    """Newton iteration failed to converge at some time level."""

    def __init__(self, level, residual, iterations):
        super().__init__(level,
                         f"Newton did not converge at time level n={level} after "
                         f"{iterations} iterations (last residual {residual:.3e})")
        self.residual = residual
        self.iterations = iterations


class SingularBorderError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """Data of ``D^alpha u - a(l(u)) lap u = f(x, t, u)`` with zero Dirichlet data.

    ``f`` and ``df`` are called as ``f(x, t, u)`` with quadrature-point
    coordinates ``x``.  ``df=None`` declares that ``f`` does not depend on
    ``u``.  ``grad_u0=None`` means ``u0 = 0``.
    """

    alpha: float
    a: Callable
    da: Callable
    f: Callable
    df: Optional[Callable] = None
    grad_u0: Optional[Callable] = None
    a_bounds: Optional[tuple] = None


@dataclass
class SolverConfig:
    newton_tol: float = 1e-12
    max_newton: int = 25
    debug: bool = False


@dataclass(frozen=True, eq=False)
class Assembled:
    """Level-independent pieces: mass, stiffness and nodal integrals."""

    mesh: SpatialMesh
    mass: sp.csr_matrix
    stiffness: sp.csr_matrix
    c: np.ndarray


def assemble_pieces(mesh: SpatialMesh) -> Assembled:
    return Assembled(mesh, fem.assemble_mass(mesh), fem.assemble_stiffness(mesh),
                     fem.assemble_nodal_integrals(mesh))


@dataclass
class BorderedSystem:
    A: sp.csr_matrix
    b: np.ndarray
    c: np.ndarray
    gamma: float
    F: np.ndarray
    F_end: float

    def dense(self):
        """The full ``(M+1) x (M+1)`` Jacobian, for checks on small systems."""
        M = len(self.b)
        J = np.zeros((M + 1, M + 1))
        J[:M, :M] = self.A.toarray()
        J[:M, M] = self.b
        J[M, :M] = self.c
        J[M, M] = self.gamma
        return J


def history_term(row: L1Row, history) -> np.ndarray:
    """``(-d[n,n] U^0 + sum_k (d[n,k+1] - d[n,k]) U^{n-k}) / d[n,1]``."""
    history = np.asarray(history, dtype=float)
    if history.shape[0] != row.n:
        raise ValueError(f"history has {history.shape[0]} levels, expected {row.n}")
    w = row.history_weights()[:row.n]
    return (w @ history) / row.d[0]


class StepContext:
    """Everything the residual and Jacobian need at one time level."""

    def __init__(self, problem: ProblemSpec, pieces: Assembled, row: L1Row,
                 t: float, H: np.ndarray):
        self.problem = problem
        self.pieces = pieces
        self.row = row
        self.t = t
        self.scale = gamma(2.0 - problem.alpha) / row.d[0]
        self.MH = pieces.mass @ H
        self._fixed_reaction = None
        if problem.df is None:
            self._fixed_reaction = self.reaction(np.zeros(pieces.mesh.num_dofs))

    def reaction(self, U):
        if self._fixed_reaction is not None:
            return self._fixed_reaction
        f, t = self.problem.f, self.t
        return fem.assemble_reaction(self.pieces.mesh, lambda x, u: f(x, t, u), U)

    def reaction_jacobian(self, U):
        df, t = self.problem.df, self.t
        return fem.assemble_reaction_jacobian(self.pieces.mesh,
                                              lambda x, u: df(x, t, u), U)


def newton_residual(ctx: StepContext, U, d):
    p = ctx.pieces
    F = (p.mass @ U + ctx.MH + ctx.scale * ctx.problem.a(d) * (p.stiffness @ U)
         - ctx.scale * ctx.reaction(U))
    return F, float(p.c @ U - d)


def newton_jacobian(ctx: StepContext, U, d) -> BorderedSystem:
    p = ctx.pieces
    A = p.mass + (ctx.scale * ctx.problem.a(d)) * p.stiffness
    if ctx.problem.df is not None:
        A = A - ctx.scale * ctx.reaction_jacobian(U)
    b = ctx.scale * ctx.problem.da(d) * (p.stiffness @ U)
    F, F_end = newton_residual(ctx, U, d)
    return BorderedSystem(sp.csr_matrix(A), b, p.c, GAMMA_BORDER, F, F_end)


def schur_solve(system: BorderedSystem):
    """Solve ``[[A, b], [c, gamma]] [dU; dd] = [F; F_end]`` with two solves in ``A``."""
    z = fem.solve_sparse(system.A, np.column_stack([system.F, system.b]))
    z1, z2 = z[:, 0], z[:, 1]
    schur = system.gamma - system.c @ z2
    if abs(schur) < 1e-14:
        raise SingularBorderError(f"Schur complement {schur:.3e} is singular")
    dd = (system.F_end - system.c @ z1) / schur
    return z1 - dd * z2, float(dd)


@dataclass
class StepStats:
    n: int
    iterations: int
    residuals: list
    constraint_gap: float
    unbordered_residual: float
    monotone: bool
    d: float = 0.0

    @property
    def formulation_ok(self):
        """Bordered and plain formulations agree at this level."""
        return (self.constraint_gap <= 1e-12 * (1.0 + abs(self.d))
                and self.unbordered_residual <= 1e-10)


@dataclass
class SolveResult:
    problem: ProblemSpec
    mesh: SpatialMesh
    grid: TimeGrid
    history: np.ndarray                   # (N+1, M)
    stats: list = field(default_factory=list)

    @property
    def final(self):
        return self.history[-1]

    @property
    def max_iterations(self):
        return max((s.iterations for s in self.stats), default=0)


def _max_abs(v):
    return float(np.max(np.abs(v), initial=0.0))


def step(problem: ProblemSpec, pieces: Assembled, grid: TimeGrid, history,
         n: int, config: SolverConfig):
    """Advance to level ``n`` given ``history[0..n-1]``; returns ``(U^n, stats)``."""
    row = d_row(grid, n, problem.alpha)
    ctx = StepContext(problem, pieces, row, grid.nodes[n], history_term(row, history[:n]))
    U = np.array(history[n - 1], dtype=float)
    d = float(pieces.c @ U)
    residuals = []
    for it in range(1, config.max_newton + 1):
        system = newton_jacobian(ctx, U, d)
        residuals.append(max(_max_abs(system.F), abs(system.F_end)))
        dU, dd = schur_solve(system)
        U -= dU
        d -= dd
        if _max_abs(dU) + abs(dd) <= config.newton_tol * (1.0 + _max_abs(U)):
            break
    else:
        F, F_end = newton_residual(ctx, U, d)
        raise NewtonError(n, max(_max_abs(F), abs(F_end)), config.max_newton)

    gap = abs(float(pieces.c @ U) - d)
    F_plain, _ = newton_residual(ctx, U, float(pieces.c @ U))
    monotone = all(b < a for a, b in zip(residuals, residuals[1:]))
    if not monotone:
        log.debug("level %d: Newton residuals not strictly decreasing: %s", n, residuals)
    if gap > 1e-12 * (1.0 + abs(d)):
        log.warning("level %d: |l(U) - d| = %.3e", n, gap)
    if problem.a_bounds is not None:
        lo, hi = problem.a_bounds
        ad = problem.a(d)
        if not lo <= ad <= hi:
            log.warning("level %d: a(l(U)) = %g outside [%g, %g]", n, ad, lo, hi)
            if config.debug:
                raise AssertionError(f"a(l(U)) = {ad} outside [{lo}, {hi}]")
    return U, StepStats(n, it, residuals, gap, _max_abs(F_plain), monotone, d)


def solve(problem: ProblemSpec, mesh: SpatialMesh, grid: TimeGrid,
          config: Optional[SolverConfig] = None) -> SolveResult:
    config = config or SolverConfig()
    pieces = assemble_pieces(mesh)
    history = np.zeros((grid.N + 1, mesh.num_dofs))
    if problem.grad_u0 is not None:
        history[0] = fem.ritz_projection(mesh, problem.grad_u0)
    result = SolveResult(problem, mesh, grid, history)
    for n in range(1, grid.N + 1):
        try:
            history[n], stats = step(problem, pieces, grid, history, n, config)
        except (fem.LinearSolveError, SingularBorderError) as exc:
            raise StepFailure(n, f"linear solve failed at time level n={n}: {exc}") from exc
        result.stats.append(stats)
    return result
