import itertools

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as st

from elasticqmc.mesh import (build_dofmap, build_uniform_mesh, reference_basis,
                             triangle_quadrature)


def sympy_monomial(i, j):
    x, y = sp.symbols("x y")
    return float(sp.integrate(sp.integrate(x ** i * y ** j, (y, 0, 1 - x)), (x, 0, 1)))


@pytest.mark.parametrize("J, ntri, nvert, nint", [(1, 2, 4, 0), (2, 8, 9, 1), (8, 128, 81, 49)])
def test_mesh_counts(J, ntri, nvert, nint):
    m = build_uniform_mesh(J)
    assert m.n_triangles == ntri
    assert m.n_vertices == nvert
    assert m.interior_vertices.size == nint


def test_mesh_rejects_zero():
    with pytest.raises(ValueError):
        build_uniform_mesh(0)


@given(st.integers(min_value=1, max_value=40))
@settings(max_examples=25, deadline=None)
def test_mesh_areas_tile_the_square(J):
    m = build_uniform_mesh(J)
    a = m.signed_areas()
    assert np.all(a > 0)
    np.testing.assert_allclose(a, 0.5 / J ** 2, rtol=1e-13)
    assert abs(a.sum() - 1.0) <= 1e-14 * max(1, J)


def test_diagonal_runs_bottom_left_to_top_right():
    m = build_uniform_mesh(1)
    p = m.vertices[m.triangles]
    # both triangles share the edge (0,0)-(1,1)
    for tri in p:
        pts = {tuple(v) for v in tri}
        assert (0.0, 0.0) in pts and (1.0, 1.0) in pts


def test_boundary_vertices():
    m = build_uniform_mesh(4)
    v = m.vertices[m.boundary_vertices]
    on = (np.isclose(v, 0) | np.isclose(v, 1)).any(axis=1)
    assert on.all() and len(v) == 16


@pytest.mark.parametrize("J, r, nodes", [(2, 1, 1), (2, 2, 9), (8, 1, 49), (5, 2, 81)])
def test_dofmap_counts(J, r, nodes):
    d = build_dofmap(build_uniform_mesh(J), r)
    assert d.n_free_nodes == nodes
    assert d.total_free_dofs == 2 * nodes


def test_p2_interior_nodes_by_enumeration():
    # independent enumeration of interior vertices and edge midpoints for J = 2
    J = 2
    m = build_uniform_mesh(J)
    pts = set()
    for tri in m.vertices[m.triangles]:
        for a, b in itertools.combinations(range(3), 2):
            pts.add(tuple(np.round((tri[a] + tri[b]) / 2, 12)))
        for a in range(3):
            pts.add(tuple(np.round(tri[a], 12)))
    interior = [p for p in pts if 0 < p[0] < 1 and 0 < p[1] < 1]
    d = build_dofmap(m, 2)
    assert len(interior) == d.n_free_nodes == 9


def test_dofmap_free_nodes_exclude_boundary_and_are_deterministic():
    m = build_uniform_mesh(6)
    for r in (1, 2):
        d1, d2 = build_dofmap(m, r), build_dofmap(m, r)
        c = d1.scalar_node_coords[d1.free_nodes]
        assert np.all((c > 0) & (c < 1))
        np.testing.assert_array_equal(d1.free_nodes, d2.free_nodes)
        np.testing.assert_array_equal(d1.cell_nodes, d2.cell_nodes)
        # lexicographic in (x2, x1)
        order = np.lexsort((c[:, 0], c[:, 1]))
        np.testing.assert_array_equal(order, np.arange(len(c)))


def test_dofmap_rejects_degree():
    with pytest.raises(ValueError):
        build_dofmap(build_uniform_mesh(2), 3)


def test_centroid_rule():
    q = triangle_quadrature(1)
    np.testing.assert_allclose(q.points, [[1 / 3, 1 / 3, 1 / 3]])
    np.testing.assert_allclose(q.weights, [0.5])


@pytest.mark.parametrize("deg", [1, 2, 4])
def test_quadrature_exactness_against_symbolic_integrals(deg):
    q = triangle_quadrature(deg)
    assert q.exact_degree == deg
    assert abs(q.weights.sum() - 0.5) < 1e-15
    x, y = q.xi[:, 0], q.xi[:, 1]
    for i in range(deg + 1):
        for j in range(deg + 1 - i):
            assert abs(q.weights @ (x ** i * y ** j) - sympy_monomial(i, j)) < 1e-14


def test_quadrature_examples():
    q2 = triangle_quadrature(2)
    assert abs(q2.weights @ q2.xi[:, 0] - 1 / 6) < 1e-15
    q4 = triangle_quadrature(4)
    assert abs(q4.weights @ (q4.xi[:, 0] ** 2 * q4.xi[:, 1] ** 2) - 1 / 180) < 1e-14


def test_quadrature_rejects_degree():
    with pytest.raises(ValueError):
        triangle_quadrature(3)


@pytest.mark.parametrize("r", [1, 2])
def test_reference_basis_is_nodal_and_partition_of_unity(r):
    nodes = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]])[: 3 * r]
    phi, dphi = reference_basis(r, nodes)
    np.testing.assert_allclose(phi, np.eye(3 * r), atol=1e-15)
    xi = np.random.default_rng(0).random((10, 2)) * 0.5
    phi, dphi = reference_basis(r, xi)
    np.testing.assert_allclose(phi.sum(axis=1), 1.0, atol=1e-14)
    np.testing.assert_allclose(dphi.sum(axis=1), 0.0, atol=1e-13)


def test_reference_gradients_match_finite_differences():
    xi = np.array([[0.2, 0.3]])
    eps = 1e-6
    _, d = reference_basis(2, xi)
    for k in range(2):
        e = np.zeros(2)
        e[k] = eps
        fd = (reference_basis(2, xi + e)[0] - reference_basis(2, xi - e)[0]) / (2 * eps)
        np.testing.assert_allclose(d[0, :, k], fd[0], atol=1e-8)
