"""Graded time grids and structured P1 spatial meshes."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True, eq=False)
class TimeGrid:
    """Graded temporal mesh ``t_n = T (n/N)**r`` on ``[0, T]``."""

    T: float
    N: int
    r: float
    nodes: np.ndarray = field(repr=False)
    steps: np.ndarray = field(repr=False)

    def __len__(self):
        return self.N + 1


def build_time_grid(T: float, N: int, r: float) -> TimeGrid:
    if not T > 0:
        raise ValueError(f"final time must be positive, got T={T}")
    if int(N) != N or N < 1:
        raise ValueError(f"need at least one time step, got N={N}")
    if not r >= 1:
        raise ValueError(f"grading exponent must satisfy r >= 1, got r={r}")
    N = int(N)
    n = np.arange(N + 1, dtype=float)
    nodes = T * (n / N) ** r
    # pin the endpoints; never accumulate steps
    nodes[0] = 0.0
    nodes[-1] = T
    nodes.setflags(write=False)
    steps = np.diff(nodes)
    steps.setflags(write=False)
    return TimeGrid(T=float(T), N=N, r=float(r), nodes=nodes, steps=steps)


@dataclass(frozen=True, eq=False)
class SpatialMesh:
    """Structured simplicial mesh of an interval or the unit square.

    ``cells`` holds element connectivity into ``points`` (2 vertices per
    interval, 3 per triangle).  ``dof_of_node`` maps every node to its
    interior degree of freedom, or -1 for boundary nodes.
    """

    kind: str
    extent: tuple
    cells_per_side: int
    points: np.ndarray = field(repr=False)
    cells: np.ndarray = field(repr=False)
    dof_of_node: np.ndarray = field(repr=False)

    @property
    def dim(self) -> int:
        return 1 if self.kind == "interval" else 2

    @property
    def h(self) -> float:
        return (self.extent[1] - self.extent[0]) / self.cells_per_side

    @property
    def num_dofs(self) -> int:
        return int(np.count_nonzero(self.dof_of_node >= 0))

    @property
    def interior_nodes(self) -> np.ndarray:
        """Node indices of the interior dofs, in dof order."""
        return np.flatnonzero(self.dof_of_node >= 0)

    @property
    def measure(self) -> float:
        a, b = self.extent
        return (b - a) ** self.dim

    def cell_measures(self) -> np.ndarray:
        v = self.points[self.cells]
        if self.dim == 1:
            return v[:, 1, 0] - v[:, 0, 0]
        e1 = v[:, 1] - v[:, 0]
        e2 = v[:, 2] - v[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    def to_nodal(self, U: np.ndarray) -> np.ndarray:
        """Extend interior coefficients by zero to all mesh nodes."""
        full = np.zeros(len(self.points))
        full[self.interior_nodes] = U
        return full


def build_interval_mesh(b: float, M_s: int) -> SpatialMesh:
    if not b > 0:
        raise ValueError(f"interval length must be positive, got b={b}")
    if M_s < 2:
        raise ValueError(f"need at least 2 cells for an interior dof, got M_s={M_s}")
    x = np.linspace(0.0, b, M_s + 1)
    x[-1] = b
    points = x[:, None]
    cells = np.column_stack([np.arange(M_s), np.arange(1, M_s + 1)])
    dof = np.full(M_s + 1, -1, dtype=np.int64)
    dof[1:-1] = np.arange(M_s - 1)
    return SpatialMesh("interval", (0.0, float(b)), int(M_s), points, cells, dof)


def build_square_mesh(M_s: int) -> SpatialMesh:
    """Unit square split into ``M_s**2`` cells, each cut along its
    lower-left to upper-right diagonal."""
    if M_s < 2:
        raise ValueError(f"need at least 2 cells per side, got M_s={M_s}")
    s = np.linspace(0.0, 1.0, M_s + 1)
    X, Y = np.meshgrid(s, s, indexing="xy")
    points = np.column_stack([X.ravel(), Y.ravel()])

    def node(i, j):
        return j * (M_s + 1) + i

    i, j = np.meshgrid(np.arange(M_s), np.arange(M_s), indexing="xy")
    i, j = i.ravel(), j.ravel()
    ll, lr = node(i, j), node(i + 1, j)
    ul, ur = node(i, j + 1), node(i + 1, j + 1)
    lower = np.column_stack([ll, lr, ur])
    upper = np.column_stack([ll, ur, ul])
    cells = np.empty((2 * M_s * M_s, 3), dtype=np.int64)
    cells[0::2] = lower
    cells[1::2] = upper

    ii, jj = np.meshgrid(np.arange(M_s + 1), np.arange(M_s + 1), indexing="xy")
    interior = ((ii > 0) & (ii < M_s) & (jj > 0) & (jj < M_s)).ravel()
    dof = np.full(len(points), -1, dtype=np.int64)
    # lexicographic: x fastest, then y
    dof[interior] = np.arange(int(interior.sum()))
    return SpatialMesh("unit-square", (0.0, 1.0), int(M_s), points, cells, dof)
