"""Reference bases, degree-of-freedom maps, and the multiplier spaces."""
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from crplate import quadrature
from crplate.mesh import neighbor_sets, unit_square_mesh
from crplate.spaces import (AllBoundaryTriangleError, build_dof_map,
                            build_modified_multiplier, cr_basis, dual_basis,
                            multiplier_space, p1_basis, rotation_space)


# --- quadrature ---------------------------------------------------------

@pytest.mark.parametrize("rule,degree", [
    (quadrature.midpoint_rule(), 2),
    (quadrature.degree4_rule(), 4),
    (quadrature.degree6_rule(), 6),
])
def test_rules_integrate_monomials_exactly(rule, degree):
    """Exact reference-triangle values: int x^a y^b = a! b! / (a+b+2)!."""
    from math import factorial
    pts, wts = rule
    assert np.isclose(wts.sum(), 0.5)            # reference area
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = factorial(a) * factorial(b) / factorial(a + b + 2)
            approx = np.sum(wts * pts[:, 0] ** a * pts[:, 1] ** b)
            assert abs(approx - exact) < 1e-14


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_midpoint_rule_exact_on_random_quadratics(seed):
    rng = np.random.default_rng(seed)
    c = rng.uniform(-2, 2, 6)
    pts, wts = quadrature.midpoint_rule()

    def poly(x, y):
        return (c[0] + c[1] * x + c[2] * y + c[3] * x * x
                + c[4] * x * y + c[5] * y * y)

    exact = (c[0] / 2 + (c[1] + c[2]) / 6 + (c[3] + c[5]) / 12 + c[4] / 24)
    assert np.isclose(np.sum(wts * poly(pts[:, 0], pts[:, 1])), exact)


def test_map_to_physical():
    coords = np.array([[[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]])
    pts = np.array([[0.5, 0.5], [0.0, 0.0]])
    phys = quadrature.map_to_physical(coords, pts)
    assert np.allclose(phys[0], [[1.0, 1.0], [0.0, 0.0]])


# --- reference bases ----------------------------------------------------

def test_p1_basis_nodal():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    assert np.allclose(p1_basis().tabulate(nodes), np.eye(3))


def test_cr_basis_nodal_at_midpoints():
    """CR function i equals one at the midpoint of the edge opposite
    vertex i and zero at the other midpoints."""
    mids = np.array([[0.5, 0.5], [0.0, 0.5], [0.5, 0.0]])
    assert np.allclose(cr_basis().tabulate(mids), np.eye(3))


def test_partitions_of_unity():
    pts, _ = quadrature.degree4_rule()
    for basis in (p1_basis(), cr_basis(), dual_basis()):
        assert np.allclose(basis.tabulate(pts).sum(axis=1), 1.0)


def test_dual_basis_biorthogonality_reference():
    """int xi_i phi_j = delta_ij * int phi_j on the reference triangle."""
    pts, wts = quadrature.degree4_rule()
    xi = dual_basis().tabulate(pts)
    phi = p1_basis().tabulate(pts)
    gram = np.einsum("q,qi,qj->ij", wts, xi, phi)
    assert np.allclose(gram, np.eye(3) / 6.0, atol=1e-15)


def test_dual_basis_vertex_values():
    nodes = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    vals = dual_basis().tabulate(nodes)
    assert np.allclose(vals, 4.0 * np.eye(3) - 1.0)


def test_gradients_sum_to_zero():
    for basis in (p1_basis(), cr_basis()):
        assert np.allclose(basis.gradients.sum(axis=0), 0.0)
    # the dual basis is only ever integrated, never differentiated
    with pytest.raises(ValueError):
        dual_basis().gradient(0)


# --- dof maps -----------------------------------------------------------

def test_dof_map_dimensions():
    m = unit_square_mesh(4)
    nb = int(m.edge_is_boundary.sum())
    assert build_dof_map(m, "S").dim == m.num_edges
    assert build_dof_map(m, "W").dim == m.num_edges - nb
    assert build_dof_map(m, "K").dim == m.num_vertices
    assert build_dof_map(m, "K0").dim == m.num_vertices - 16
    assert build_dof_map(m, "K0").vector_dim == 2 * 9


def test_constrained_extension_zero_on_boundary():
    m = unit_square_mesh(3)
    dm = build_dof_map(m, "W")
    full = dm.full_coefficients(np.ones(dm.dim))
    assert np.allclose(full[m.edge_is_boundary], 0.0)
    assert np.allclose(full[~m.edge_is_boundary], 1.0)


def test_rotation_space_dimensions():
    m = unit_square_mesh(4)
    assert rotation_space(m, "clamped").vector_dim == 2 * 9
    assert rotation_space(m, "simply_supported").vector_dim \
        == 2 * m.num_vertices
    with pytest.raises(ValueError):
        rotation_space(m, "welded")


@pytest.mark.parametrize("bc", ["clamped", "simply_supported"])
@pytest.mark.parametrize("base", ["p1", "dual"])
def test_multiplier_matches_rotation_dimension(bc, base):
    m = unit_square_mesh(4)
    assert multiplier_space(m, bc, base).vector_dim \
        == rotation_space(m, bc).vector_dim


# --- modified multiplier space ------------------------------------------

@pytest.mark.parametrize("n", [2, 3, 4, 8])
def test_modified_basis_sums_to_one(n):
    """The boundary-absorbing modification preserves the partition of
    unity: row sums of the extension matrix are exactly one."""
    m = unit_square_mesh(n)
    dm = build_modified_multiplier(m, neighbor_sets(m))
    rows = np.asarray(dm.extension.sum(axis=1)).ravel()
    assert np.abs(rows - 1.0).max() < 1e-12


def test_modified_basis_weights_sum_per_boundary_vertex():
    m = unit_square_mesh(4)
    dm = build_modified_multiplier(m, neighbor_sets(m))
    sums = {}
    for (j, _i), a in dm.weights.items():
        sums[j] = sums.get(j, 0.0) + a
    assert set(sums) == set(neighbor_sets(m).boundary)
    assert all(np.isclose(s, 1.0) for s in sums.values())


def test_modified_basis_coarsest_mesh():
    """On the 2x2 grid the single interior vertex absorbs every boundary
    function with weight one."""
    m = unit_square_mesh(2)
    dm = build_modified_multiplier(m, neighbor_sets(m))
    assert dm.dim == 1
    assert np.allclose(dm.extension.toarray(), 1.0)


def test_modified_basis_rejects_interiorless_mesh():
    with pytest.raises(AllBoundaryTriangleError):
        build_modified_multiplier(unit_square_mesh(1),
                                  neighbor_sets(unit_square_mesh(1)))


def test_unknown_kinds_rejected():
    m = unit_square_mesh(2)
    with pytest.raises(ValueError):
        build_dof_map(m, "Q2")
    with pytest.raises(ValueError):
        multiplier_space(m, "clamped", "p2")
