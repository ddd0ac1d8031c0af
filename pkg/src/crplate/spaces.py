"""Reference bases and global degree-of-freedom maps.

Discrete spaces:

* ``S``       Crouzeix-Raviart, one DOF per edge (midpoint values)
* ``W``       Crouzeix-Raviart with boundary edge means set to zero
* ``K``       continuous P1, one DOF per vertex
* ``K0``      continuous P1 vanishing on the boundary
* ``M-p1``    multiplier example 1: the P1 basis itself
* ``M-dual``  multiplier example 2: the biorthogonal (dual) basis, with
              int_T xi_i = int_T phi_i = |T|/3 per triangle
* ``M-mod-*`` boundary-modified multiplier for the clamped case, where each
              boundary basis function is absorbed into its interior
              edge-neighbors with nonnegative weights summing to one

Every DofMap carries an ``extension`` matrix E (entity count x dim) mapping
reduced coefficients to coefficients in the full per-entity basis, so
constrained and modified spaces assemble as congruences of full matrices.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh, VertexSets, neighbor_sets

__all__ = [
    "ReferenceBasis", "DofMap", "AllBoundaryTriangleError",
    "cr_basis", "p1_basis", "dual_basis",
    "build_dof_map", "build_modified_multiplier",
    "rotation_space", "multiplier_space",
]

_P1_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


class AllBoundaryTriangleError(ValueError):
    """Mesh has a triangle with all vertices on the boundary; the clamped
    multiplier modification requires at least one interior vertex per
    triangle."""


@dataclass(frozen=True)
class ReferenceBasis:
    """Three shape functions on the reference triangle.

    ``tabulate(points)`` returns values of shape (npoints, 3); gradients are
    constant (None for the dual basis, whose gradients are never needed).
    """

    kind: str
    coeffs: np.ndarray       # (3, 3): function i = c[i,0] + c[i,1] x + c[i,2] y
    gradients: np.ndarray | None

    def tabulate(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        ones = np.ones(points.shape[0])
        monos = np.column_stack([ones, points[:, 0], points[:, 1]])
        return monos @ self.coeffs.T

    def value(self, point, i):
        return float(self.tabulate(point)[0, i])

    def gradient(self, i):
        if self.gradients is None:
            raise ValueError(f"{self.kind} basis gradients are not defined")
        return self.gradients[i]


def p1_basis():
    """Barycentric coordinates: Kronecker at the reference vertices."""
    coeffs = np.array([[1.0, -1.0, -1.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    return ReferenceBasis("P1", coeffs, _P1_GRADS.copy())


def cr_basis():
    """psi_i = 1 - 2 lambda_i: Kronecker at the midpoint of edge i (the edge
    opposite vertex i)."""
    p1 = p1_basis()
    coeffs = -2.0 * p1.coeffs
    coeffs[:, 0] += 1.0
    return ReferenceBasis("CR", coeffs, -2.0 * _P1_GRADS)


def dual_basis():
    """Biorthogonal basis xi_i = 4 lambda_i - 1, vertex-associated."""
    p1 = p1_basis()
    coeffs = 4.0 * p1.coeffs
    coeffs[:, 0] -= 1.0
    return ReferenceBasis("DUAL", coeffs, None)


@dataclass(frozen=True)
class DofMap:
    """Global numbering for one scalar space (vector spaces use 2 components).

    dim:        number of scalar degrees of freedom
    ncomp:      1 for the displacement space, 2 for rotation/multiplier use
    entity:     'edge' or 'vertex'
    cell_dofs:  (nt, 3) reduced scalar index per local entity, -1 = constrained
    extension:  sparse (n_entities x dim), full coefficients = E @ reduced
    weights:    {(boundary vertex j, interior vertex i): A_ji} for modified
                multiplier spaces, empty otherwise
    """

    kind: str
    dim: int
    ncomp: int
    entity: str
    cell_dofs: np.ndarray
    extension: sp.csr_matrix
    weights: dict = field(default_factory=dict)

    @property
    def vector_dim(self):
        return self.ncomp * self.dim

    def full_coefficients(self, x):
        """Expand reduced coefficients into the full per-entity basis.

        For ncomp == 2, x is interleaved (2*i, 2*i+1) and so is the result.
        """
        x = np.asarray(x)
        if self.ncomp == 1:
            return self.extension @ x
        full = np.empty((self.extension.shape[0], 2))
        full[:, 0] = self.extension @ x[0::2]
        full[:, 1] = self.extension @ x[1::2]
        return full.reshape(-1)


def _selection(n, keep):
    keep = np.asarray(keep, dtype=np.int64)
    data = np.ones(keep.size)
    return sp.csr_matrix((data, (keep, np.arange(keep.size))),
                         shape=(n, keep.size))


def _vertex_cell_dofs(mesh, reduced_of_full):
    return reduced_of_full[mesh.triangles]


def build_dof_map(mesh: Mesh, kind: str, bc: str = "clamped") -> DofMap:
    """Build the DofMap for a space kind.

    kind is one of ``S``, ``W``, ``K``, ``K0``, ``M-p1``, ``M-dual``,
    ``M-mod-p1``, ``M-mod-dual``.  Multiplier and rotation maps have
    ncomp=2.  bc only matters for the convenience wrappers below.
    """
    nv, ne = mesh.num_vertices, mesh.num_edges
    if kind == "S":
        ident = sp.identity(ne, format="csr")
        return DofMap("S", ne, 1, "edge", mesh.tri_edges.copy(), ident)
    if kind == "W":
        keep = np.flatnonzero(~mesh.edge_is_boundary)
        reduced = np.full(ne, -1, dtype=np.int64)
        reduced[keep] = np.arange(keep.size)
        return DofMap("W", keep.size, 1, "edge", reduced[mesh.tri_edges],
                      _selection(ne, keep))
    if kind in ("K", "M-p1", "M-dual"):
        ncomp = 1 if kind == "K" else 2
        ident = sp.identity(nv, format="csr")
        return DofMap(kind, nv, ncomp, "vertex", mesh.triangles.copy(), ident)
    if kind == "K0":
        on_bdry = np.zeros(nv, dtype=bool)
        on_bdry[mesh.boundary_vertices] = True
        keep = np.flatnonzero(~on_bdry)
        reduced = np.full(nv, -1, dtype=np.int64)
        reduced[keep] = np.arange(keep.size)
        return DofMap("K0", keep.size, 2, "vertex",
                      _vertex_cell_dofs(mesh, reduced), _selection(nv, keep))
    if kind in ("M-mod-p1", "M-mod-dual"):
        base = kind.rsplit("-", 1)[1]
        return build_modified_multiplier(mesh, neighbor_sets(mesh), base)
    raise ValueError(f"unknown space kind {kind!r}")


def build_modified_multiplier(mesh: Mesh, sets: VertexSets,
                              base: str = "dual") -> DofMap:
    """Clamped-boundary multiplier space: boundary basis functions are
    distributed onto neighboring interior ones.

    The modified scalar basis is indexed by the interior vertices; for a
    collar vertex i the basis function is

        phi~_i = phi_i + sum_{j in boundary & stencil(i)} A[j, i] * phi_j

    with A[j, i] = 1 / (number of absorbers of j), so each boundary function
    is fully absorbed and the basis still sums to one pointwise.

    A boundary vertex normally distributes onto its interior edge-neighbors.
    A boundary vertex all of whose neighbors are themselves on the boundary
    (the two corner vertices cut off by an all-boundary triangle on the
    built-in meshes) falls back to the interior vertices within two edges.
    If even that fails the mesh is too coarse and is rejected.
    """
    if base not in ("p1", "dual"):
        raise ValueError(f"unknown multiplier base {base!r}")

    nv = mesh.num_vertices
    interior = np.array(sorted(sets.interior), dtype=np.int64)
    reduced = np.full(nv, -1, dtype=np.int64)
    reduced[interior] = np.arange(interior.size)

    rows = list(interior)
    cols = list(range(interior.size))
    vals = [1.0] * interior.size
    weights = {}
    for j in sorted(sets.boundary):
        absorbers = sorted(sets.interior_neighbors[j])
        if not absorbers:
            two_ring = set()
            for k in sets.stencil[j]:
                two_ring.update(sets.interior_neighbors[k])
            absorbers = sorted(two_ring)
        if not absorbers:
            raise AllBoundaryTriangleError(
                f"boundary vertex {j} has no interior vertex within two "
                "edges (all-boundary triangles everywhere); refine the mesh")
        a = 1.0 / len(absorbers)
        for i in absorbers:
            weights[(j, i)] = a
            rows.append(j)
            cols.append(int(reduced[i]))
            vals.append(a)
    ext = sp.csr_matrix((vals, (rows, cols)), shape=(nv, interior.size))
    return DofMap(f"M-mod-{base}", interior.size, 2, "vertex",
                  _vertex_cell_dofs(mesh, reduced), ext, weights)


def rotation_space(mesh: Mesh, bc: str) -> DofMap:
    """V_h: P1 vector rotations, vanishing on the boundary when clamped."""
    if bc == "clamped":
        return build_dof_map(mesh, "K0")
    if bc == "simply_supported":
        dm = build_dof_map(mesh, "K")
        return DofMap("K", dm.dim, 2, "vertex", dm.cell_dofs, dm.extension)
    raise ValueError(f"unknown boundary condition {bc!r}")


def multiplier_space(mesh: Mesh, bc: str, base: str) -> DofMap:
    """M_h (simply supported) or the modified space (clamped)."""
    if base not in ("p1", "dual"):
        raise ValueError(f"unknown multiplier base {base!r}")
    if bc == "clamped":
        return build_dof_map(mesh, f"M-mod-{base}")
    if bc == "simply_supported":
        return build_dof_map(mesh, f"M-{base}")
    raise ValueError(f"unknown boundary condition {bc!r}")
