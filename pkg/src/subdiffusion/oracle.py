"""Dense reference implementation of the same fully discrete scheme.

Written independently of :mod:`fem`, :mod:`l1` and :mod:`stepper` so it can
serve as a cross-check on tiny problems: element loops with explicit hat
functions, the L1 sum in its unrearranged increment form, and Newton on
the unbordered system with the full (dense) Jacobian.  Only intended for a
handful of dofs and time levels.
"""

from __future__ import annotations

import math

import numpy as np


def _gauss3():
    q = math.sqrt(0.6) / 2.0
    return [(0.5 - q, 5.0 / 18.0), (0.5, 8.0 / 18.0), (0.5 + q, 5.0 / 18.0)]


def _edge_midpoints():
    return [((0.5, 0.0), 1.0 / 6.0), ((0.5, 0.5), 1.0 / 6.0), ((0.0, 0.5), 1.0 / 6.0)]


class _DenseSpace:
    """Nodes, elements and quadrature data in plain Python lists."""

    def __init__(self, domain, length, M_s):
        self.dim = 1 if domain == "interval" else 2
        if self.dim == 1:
            h = length / M_s
            nodes = [(i * h,) for i in range(M_s + 1)]
            interior = list(range(1, M_s))
            elems = [(i, i + 1) for i in range(M_s)]
        else:
            h = 1.0 / M_s
            nodes = [(i * h, j * h) for j in range(M_s + 1) for i in range(M_s + 1)]
            interior = [j * (M_s + 1) + i for j in range(1, M_s) for i in range(1, M_s)]
            elems = []
            for j in range(M_s):
                for i in range(M_s):
                    a = j * (M_s + 1) + i
                    b, c, d = a + 1, a + M_s + 2, a + M_s + 1
                    elems += [(a, b, c), (a, c, d)]
        self.nodes = np.array(nodes)
        self.index = {node: k for k, node in enumerate(interior)}
        self.M = len(interior)
        # per element: dofs, basis gradients, [(point, weight, basis values)], measure
        self.qdata = []
        for el in elems:
            P = self.nodes[list(el)]
            if self.dim == 1:
                x0, x1 = P[0, 0], P[1, 0]
                meas = x1 - x0
                grads = [np.array([-1.0 / meas]), np.array([1.0 / meas])]
                pts = [(np.array([x0 + s * meas]), w * meas, [1.0 - s, s])
                       for s, w in _gauss3()]
            else:
                B = np.array([P[1] - P[0], P[2] - P[0]]).T
                meas = abs(np.linalg.det(B))   # Jacobian determinant
                Binv = np.linalg.inv(B)
                grads = [Binv.T @ g for g in (np.array([-1.0, -1.0]),
                                             np.array([1.0, 0.0]),
                                             np.array([0.0, 1.0]))]
                pts = [(P[0] + B @ np.array(xi), w * meas,
                        [1.0 - xi[0] - xi[1], xi[0], xi[1]])
                       for xi, w in _edge_midpoints()]
                meas = 0.5 * meas   # triangle area
            dofs = [self.index.get(v, -1) for v in el]
            self.qdata.append((dofs, grads, pts, meas))

    def matrices(self):
        M = np.zeros((self.M, self.M))
        K = np.zeros((self.M, self.M))
        c = np.zeros(self.M)
        for dofs, grads, pts, meas in self.qdata:
            for a, da in enumerate(dofs):
                if da < 0:
                    continue
                for x, w, phi in pts:
                    c[da] += w * phi[a]
                for b, db in enumerate(dofs):
                    if db < 0:
                        continue
                    K[da, db] += meas * float(grads[a] @ grads[b])
                    for x, w, phi in pts:
                        M[da, db] += w * phi[a] * phi[b]
        return M, K, c

    def value(self, U, dofs, phi):
        return sum(U[d] * p for d, p in zip(dofs, phi) if d >= 0)

    def reaction(self, f, U):
        F = np.zeros(self.M)
        for dofs, grads, pts, meas in self.qdata:
            for x, w, phi in pts:
                fx = float(f(x, self.value(U, dofs, phi)))
                for a, da in enumerate(dofs):
                    if da >= 0:
                        F[da] += w * fx * phi[a]
        return F

    def reaction_jacobian(self, df, U):
        J = np.zeros((self.M, self.M))
        for dofs, grads, pts, meas in self.qdata:
            for x, w, phi in pts:
                dfx = float(df(x, self.value(U, dofs, phi)))
                for a, da in enumerate(dofs):
                    for b, db in enumerate(dofs):
                        if da >= 0 and db >= 0:
                            J[da, db] += w * dfx * phi[a] * phi[b]
        return J


def dense_solve(problem, domain, length, M_s, nodes, tol=1e-14, max_iter=50):
    """Run the scheme with dense algebra; returns the ``(N+1, M)`` history.

    ``nodes`` are the time nodes ``t_0..t_N``.  ``problem`` supplies
    ``alpha``, ``a``, ``da``, ``f(x, t, u)`` and optionally ``df``; the
    initial value is zero.
    """
    alpha = problem.alpha
    g2 = math.gamma(2.0 - alpha)
    space = _DenseSpace(domain, length, M_s)
    Mm, K, c = space.matrices()
    t = [float(v) for v in nodes]
    N = len(t) - 1
    U = [np.zeros(space.M)]
    for n in range(1, N + 1):
        # D v^n = sum_{k<n} kappa_k (v^{k+1} - v^k) / Gamma(2 - alpha)
        kappa = [((t[n] - t[k]) ** (1 - alpha) - (t[n] - t[k + 1]) ** (1 - alpha))
                 / (t[k + 1] - t[k]) for k in range(n)]
        lead = kappa[n - 1] / g2        # coefficient of v^n
        known = np.zeros(space.M)       # D v^n minus lead * v^n
        for k in range(n):
            if k + 1 < n:
                known += kappa[k] * U[k + 1] / g2
            known -= kappa[k] * U[k] / g2

        def f_at(x, u, _t=t[n]):
            return problem.f(np.asarray(x), _t, np.asarray(u))

        def df_at(x, u, _t=t[n]):
            return problem.df(np.asarray(x), _t, np.asarray(u))

        V = U[-1].copy()
        for _ in range(max_iter):
            ell = float(c @ V)
            G = (Mm @ (lead * V + known) + problem.a(ell) * (K @ V)
                 - space.reaction(f_at, V))
            J = lead * Mm + problem.a(ell) * K + np.outer(problem.da(ell) * (K @ V), c)
            if problem.df is not None:
                J -= space.reaction_jacobian(df_at, V)
            step = np.linalg.solve(J, G)
            V = V - step
            if np.max(np.abs(step)) <= tol * (1.0 + np.max(np.abs(V))):
                break
        U.append(V)
    return np.array(U)
