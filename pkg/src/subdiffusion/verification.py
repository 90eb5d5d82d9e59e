"""Property suites for the L1 weights, assembly and Newton solver.

Each ``check_*`` function returns a :class:`CheckResult`; the ``verify``
command runs them all.  They are also imported by the test-suite.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gamma

from . import fem
from .l1 import (d_row, discrete_caputo, optimal_grading, p_table, temporal_rate,
                 truncation_probe)
from .manufactured import case, mesh_for_case, problem_from_case
from .meshes import build_interval_mesh, build_square_mesh, build_time_grid
from .oracle import dense_solve
from .stepper import (StepContext, assemble_pieces, history_term, newton_jacobian,
                      newton_residual, solve)

ALPHAS = tuple(round(0.1 * k, 1) for k in range(1, 10))


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        self.passed = bool(self.passed)

    def line(self):
        return f"{'PASS' if self.passed else 'FAIL'} {self.name} {self.detail}"


def _grids_for(alpha, N):
    return [build_time_grid(1.0, N, r) for r in (1.0, 2.0, optimal_grading(alpha))]


def check_d_rows(N=1024, alphas=ALPHAS, row_fn=d_row):
    """``d[n,1] = tau_n^-alpha`` and nonincreasing rows on several grids."""
    worst_identity = 0.0
    for alpha in alphas:
        for grid in _grids_for(alpha, N):
            for n in range(1, N + 1):
                d = row_fn(grid, n, alpha).d
                ref = grid.steps[n - 1] ** (-alpha)
                rel = abs(d[0] - ref) / ref
                worst_identity = max(worst_identity, rel)
                if rel > 1e-13:
                    return CheckResult("d_rows", False, {
                        "violation": "identity", "n": n, "k": 1, "alpha": alpha,
                        "r": grid.r, "rel_err": rel})
                if not np.all(d > 0):
                    k = int(np.argmin(d > 0)) + 1
                    return CheckResult("d_rows", False, {
                        "violation": "positivity", "n": n, "k": k, "alpha": alpha,
                        "r": grid.r})
                bad = np.flatnonzero(d[1:] > d[:-1] * (1 + 1e-14))
                if len(bad):
                    return CheckResult("d_rows", False, {
                        "violation": "monotonicity", "n": n, "k": int(bad[0]) + 1,
                        "alpha": alpha, "r": grid.r})
    return CheckResult("d_rows", True, {"max_rel_identity_err": worst_identity})


def check_coercivity(cases=200, seed=0):
    """``(D v^n) v^n >= D (v^n)^2 / 2`` on random sequences and grids."""
    rng = np.random.default_rng(seed)
    worst = math.inf
    for i in range(cases):
        alpha = ALPHAS[i % len(ALPHAS)]
        N = int(rng.integers(1, 40))
        r = float(rng.uniform(1.0, 5.0))
        grid = build_time_grid(float(rng.uniform(0.1, 3.0)), N, r)
        n = int(rng.integers(1, N + 1))
        v = rng.normal(size=n + 1) * rng.uniform(0.1, 10.0)
        row = d_row(grid, n, alpha)
        lhs = discrete_caputo(v, row) * v[-1]
        rhs = 0.5 * discrete_caputo(v ** 2, row)
        scale = row.d[0] * np.max(v ** 2)
        margin = (lhs - rhs) / scale
        worst = min(worst, margin)
        if margin < -1e-13:
            return CheckResult("coercivity", False, {"case": i, "alpha": alpha,
                                                     "n": n, "margin": margin})
    return CheckResult("coercivity", True, {"cases": cases, "min_scaled_margin": worst})


def check_p_bounds(alphas=ALPHAS, rs=(1.0, 2.0, 4.0), Ns=(8, 64, 256)):
    """Both complementary-kernel bounds.

    ``sum_s p_{n-s} t_s^-alpha / Gamma(1-alpha) <= 1`` for every level, and
    ``max_n N^beta sum_s p_{n-s} s^-beta`` stays bounded as ``N`` grows
    (taken as: at most twice its value on the coarsest grid).
    """
    worst_sum = 0.0
    worst_growth = 0.0
    for alpha in alphas:
        for r in rs:
            beta = temporal_rate(alpha, r)
            consts = []
            for N in Ns:
                grid = build_time_grid(1.0, N, r)
                tab = p_table(grid, alpha)
                C = 0.0
                for pc in tab:
                    n = pc.n
                    if np.any(pc.p < 0):
                        return CheckResult("p_bounds", False, {
                            "violation": "negative p", "alpha": alpha, "r": r,
                            "N": N, "n": n})
                    s1 = float(np.sum(pc.p * grid.nodes[1:n + 1] ** (-alpha))
                               / gamma(1.0 - alpha))
                    worst_sum = max(worst_sum, s1)
                    if s1 > 1.0 + 1e-12:
                        return CheckResult("p_bounds", False, {
                            "violation": "sum > 1", "alpha": alpha, "r": r, "N": N,
                            "n": n, "value": s1})
                    s = np.arange(1, n + 1, dtype=float)
                    C = max(C, float(np.sum(pc.p * s ** (-beta))) * N ** beta)
                consts.append(C)
            growth = max(consts) / consts[0]
            worst_growth = max(worst_growth, growth)
            if growth > 2.0:
                return CheckResult("p_bounds", False, {
                    "violation": "constant grows", "alpha": alpha, "r": r,
                    "constants": consts})
    return CheckResult("p_bounds", True, {"max_sum": worst_sum,
                                          "max_constant_growth": worst_growth})


def check_truncation(alphas=(0.3, 0.5, 0.7), Ns=(64, 128, 256, 512)):
    """``max_n n^beta |zeta^n|`` for ``u = t^alpha`` on the optimally graded
    grid stays within a factor 2 as ``N`` doubles."""
    out = {}
    for alpha in alphas:
        r = optimal_grading(alpha)
        beta = temporal_rate(alpha, r)
        scaled = []
        for N in Ns:
            grid = build_time_grid(1.0, N, r)
            zeta = truncation_probe(lambda t: np.full_like(t, gamma(1 + alpha)),
                                    lambda t: t ** alpha, grid, alpha)
            n = np.arange(1, N + 1)
            scaled.append(float(np.max(n ** beta * np.abs(zeta))))
        out[alpha] = scaled
        if max(scaled) > 2.0 * min(scaled):
            return CheckResult("truncation", False, {"alpha": alpha, "scaled": scaled})
    return CheckResult("truncation", True, {"scaled": out})


def check_linearity(trials=50, seed=1):
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(trials):
        alpha = float(rng.uniform(0.05, 0.95))
        grid = build_time_grid(1.0, int(rng.integers(1, 30)), float(rng.uniform(1, 4)))
        n = int(rng.integers(1, grid.N + 1))
        row = d_row(grid, n, alpha)
        v, w = rng.normal(size=(2, n + 1))
        a, b = rng.normal(size=2)
        lhs = discrete_caputo(a * v + b * w, row)
        rhs = a * discrete_caputo(v, row) + b * discrete_caputo(w, row)
        scale = row.d[0] * (abs(a) * np.abs(v).max() + abs(b) * np.abs(w).max())
        worst = max(worst, abs(lhs - rhs) / scale)
    return CheckResult("linearity", worst <= 1e-12, {"max_rel_err": worst})


def _monomial_exact_interval(p):
    return 1.0 / (p + 1)


def _monomial_exact_triangle(i, j):
    return math.factorial(i) * math.factorial(j) / math.factorial(i + j + 2)


def check_quadrature():
    """Every rule integrates monomials up to its degree exactly."""
    worst = 0.0
    for rule in (fem.GAUSS3, fem.GAUSS5):
        for p in range(rule.degree + 1):
            err = abs(rule.weights @ rule.points[:, 0] ** p - _monomial_exact_interval(p))
            worst = max(worst, err)
    for rule in (fem.EDGE_MIDPOINTS, fem.DUNAVANT6):
        for i in range(rule.degree + 1):
            for j in range(rule.degree + 1 - i):
                val = rule.weights @ (rule.points[:, 0] ** i * rule.points[:, 1] ** j)
                worst = max(worst, abs(val - _monomial_exact_triangle(i, j)))
    return CheckResult("quadrature", worst <= 1e-14, {"max_err": worst})


def check_ritz_orthogonality():
    """``(grad(w - R_h w), grad phi_i) = 0`` evaluated with the refined rule."""
    worst = 0.0
    cases = [
        (build_interval_mesh(math.pi, 64), lambda x: np.cos(x)),
        (build_square_mesh(12),
         lambda x: np.stack([np.pi * np.cos(np.pi * x[..., 0]) * np.sin(np.pi * x[..., 1]),
                             np.pi * np.sin(np.pi * x[..., 0]) * np.cos(np.pi * x[..., 1])],
                            axis=-1)),
    ]
    for mesh, grad_w in cases:
        R = fem.ritz_projection(mesh, grad_w)
        exact = fem.assemble_gradient_load(mesh, grad_w, fem.error_rule(mesh))
        discrete = fem.assemble_stiffness(mesh) @ R
        worst = max(worst, float(np.max(np.abs(exact - discrete))))
    return CheckResult("ritz_orthogonality", worst <= 1e-11, {"max_residual": worst})


def jacobian_fd_deviation(seed=3, eps=1e-7):
    """Largest gap between finite-difference columns and the analytic ``A`` and ``b``."""
    rng = np.random.default_rng(seed)
    mc = case(2, 0.6, "reactive")
    problem = problem_from_case(mc)
    mesh = mesh_for_case(mc, 7)
    grid = build_time_grid(1.0, 5, 2.0)
    pieces = assemble_pieces(mesh)
    M = mesh.num_dofs
    history = rng.normal(size=(4, M))
    n = 4
    row = d_row(grid, n, problem.alpha)
    ctx = StepContext(problem, pieces, row, grid.nodes[n], history_term(row, history))
    U = rng.normal(size=M)
    d = float(rng.normal())
    system = newton_jacobian(ctx, U, d)
    F0, _ = newton_residual(ctx, U, d)
    A = system.A.toarray()
    dev_A = 0.0
    for j in range(M):
        Up = U.copy()
        Up[j] += eps
        Fp, _ = newton_residual(ctx, Up, d)
        dev_A = max(dev_A, float(np.max(np.abs((Fp - F0) / eps - A[:, j]))))
    Fd, _ = newton_residual(ctx, U, d + eps)
    dev_b = float(np.max(np.abs((Fd - F0) / eps - system.b)))
    return dev_A, dev_b


def check_jacobian():
    dev_A, dev_b = jacobian_fd_deviation()
    return CheckResult("jacobian_fd", max(dev_A, dev_b) <= 1e-5,
                       {"max_dev_A": dev_A, "max_dev_b": dev_b})


ORACLE_CONFIGS = (
    # example, alpha, N, M_s, r
    (1, 0.5, 2, 3, 1.0),
    (2, 0.5, 3, 4, 2.0),
)


def oracle_deviation(example, alpha, N, M_s, r, forcing_mode="pure"):
    mc = case(example, alpha, forcing_mode)
    problem = problem_from_case(mc)
    grid = build_time_grid(1.0, N, r)
    result = solve(problem, mesh_for_case(mc, M_s), grid)
    ref = dense_solve(problem, mc.domain, mc.length, M_s, grid.nodes)
    return float(np.max(np.abs(result.history - ref)))


def check_oracle():
    devs = [oracle_deviation(*cfg) for cfg in ORACLE_CONFIGS]
    return CheckResult("oracle_equivalence", max(devs) <= 1e-10, {"max_dev": devs})


ALL_CHECKS = (check_d_rows, check_coercivity, check_p_bounds, check_truncation,
              check_linearity, check_quadrature, check_ritz_orthogonality,
              check_jacobian, check_oracle)


def run_all():
    return [check() for check in ALL_CHECKS]
