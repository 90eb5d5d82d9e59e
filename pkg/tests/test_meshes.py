import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subdiffusion.meshes import build_interval_mesh, build_square_mesh, build_time_grid


def test_uniform_grid_nodes():
    g = build_time_grid(1.0, 4, 1.0)
    np.testing.assert_array_equal(g.nodes, [0, 0.25, 0.5, 0.75, 1.0])
    np.testing.assert_allclose(g.steps, 0.25, rtol=0, atol=1e-16)


def test_graded_grid_small():
    np.testing.assert_array_equal(build_time_grid(1.0, 2, 2.0).nodes, [0, 0.25, 1.0])


def test_first_node_strong_grading():
    # (1/512)^4 is a power of two, so it is exact in binary
    exact = float(Fraction(1, 512) ** 4)
    assert build_time_grid(1.0, 512, 4.0).nodes[1] == exact


@settings(max_examples=60, deadline=None)
@given(T=st.floats(0.1, 10.0), N=st.integers(1, 300), r=st.floats(1.0, 8.0))
def test_grid_invariants(T, N, r):
    g = build_time_grid(T, N, r)
    t = g.nodes
    assert t[0] == 0.0 and t[-1] == T
    assert np.all(np.diff(t) > 0)
    assert np.all(np.diff(g.steps) >= -4 * np.spacing(T))
    n = np.arange(N + 1)
    assert np.all(np.abs(t - T * (n / N) ** r) <= 4 * np.spacing(T))
    if N >= 2:
        k = np.arange(2, N + 1)
        np.testing.assert_allclose(t[2:] / t[1:-1], (k / (k - 1)) ** r, rtol=1e-12)


def test_uniform_steps_equal():
    g = build_time_grid(2.0, 7, 1.0)
    np.testing.assert_allclose(g.steps, 2.0 / 7, rtol=1e-14)


@pytest.mark.parametrize("T,N,r", [(1.0, 0, 1.0), (1.0, 4, 0.5), (0.0, 4, 1.0)])
def test_grid_rejects_bad_input(T, N, r):
    with pytest.raises(ValueError):
        build_time_grid(T, N, r)


def test_grid_arrays_readonly():
    g = build_time_grid(1.0, 4, 2.0)
    with pytest.raises(ValueError):
        g.nodes[1] = 0.3


def test_interval_small():
    m = build_interval_mesh(math.pi, 2)
    np.testing.assert_allclose(m.points[:, 0], [0, math.pi / 2, math.pi])
    assert m.num_dofs == 1


def test_interval_counts():
    m = build_interval_mesh(1.0, 4)
    assert m.h == 0.25 and m.num_dofs == 3
    m = build_interval_mesh(math.pi, 1000)
    assert m.h == pytest.approx(math.pi / 1000, rel=1e-15)
    assert m.num_dofs == 999
    assert abs(m.cell_measures().sum() - math.pi) <= 1e-12 * math.pi
    # interior dofs numbered left to right
    assert np.all(np.diff(m.points[m.interior_nodes, 0]) > 0)


@pytest.mark.parametrize("Ms,tri,dofs", [(2, 8, 1), (4, 32, 9), (32, 2048, 961)])
def test_square_counts(Ms, tri, dofs):
    m = build_square_mesh(Ms)
    assert len(m.cells) == tri
    assert m.num_dofs == dofs
    assert len(m.points) == (Ms + 1) ** 2
    areas = m.cell_measures()
    assert np.all(areas > 0)
    assert abs(areas.sum() - 1.0) <= 1e-12


def test_square_diagonal_and_numbering():
    m = build_square_mesh(3)
    # every cell contains the lower-left and upper-right corner of its square
    for cell in m.cells:
        p = m.points[cell]
        lo, hi = p.min(axis=0), p.max(axis=0)
        assert any(np.allclose(q, lo) for q in p) and any(np.allclose(q, hi) for q in p)
    inner = m.points[m.interior_nodes]
    # lexicographic: x fastest, then y
    keys = [(y, x) for x, y in inner]
    assert keys == sorted(keys)


@pytest.mark.parametrize("builder", [lambda: build_interval_mesh(1.0, 1),
                                     lambda: build_square_mesh(1)])
def test_mesh_rejects_single_cell(builder):
    with pytest.raises(ValueError):
        builder()
