"""Assembly of the sparse block saddle-point system.

Unknowns are ordered (rotation, displacement, multiplier).  Rotation and
multiplier vector DOFs interleave components: dof = 2 * entity + component.
All element integrands are at most quadratic, so the 3-point edge-midpoint
rule assembles them exactly up to roundoff.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.sparse as sp

from . import quadrature
from .mesh import Mesh
from .spaces import DofMap, cr_basis, dual_basis, p1_basis

__all__ = [
    "PlateModel", "BlockSystem", "bending_tensor_apply", "bending_voigt",
    "element_matrices", "assemble", "load_vector",
]

SHEAR_CORRECTION = 5.0 / 6.0


@dataclass(frozen=True)
class PlateModel:
    """Material and geometry parameters.

    The shear parameter is lambda = E * kappa / (2 (1 + nu)) with shear
    correction kappa = 5/6.  ``transverse_load`` maps (npts, 2) points to
    values; ``moment_load``, used by manufactured solutions, maps points to
    (npts, 2) vectors.
    """

    youngs_modulus: float = 1.0
    poisson_ratio: float = 0.3
    thickness: float = 0.1
    transverse_load: Callable | None = None
    moment_load: Callable | None = None
    # prescribed bending traction on the boundary, (points, normals) ->
    # (npts, 2); only active where the rotations are unconstrained
    boundary_moment: Callable | None = None

    def __post_init__(self):
        if self.youngs_modulus <= 0:
            raise ValueError("Young's modulus must be positive")
        if not 0.0 <= self.poisson_ratio < 0.5:
            raise ValueError("Poisson ratio must lie in [0, 0.5)")
        if not 0.0 < self.thickness < 1.0:
            raise ValueError("thickness must lie in (0, 1)")

    @property
    def shear_parameter(self):
        return self.youngs_modulus * SHEAR_CORRECTION \
            / (2.0 * (1.0 + self.poisson_ratio))

    @property
    def penalty_coefficient(self):
        """t^2 / (lambda (1 - t^2)): the multiplier mass scaling."""
        t = self.thickness
        return t * t / (self.shear_parameter * (1.0 - t * t))


def bending_tensor_apply(eps, E, nu):
    """Apply the isotropic plate bending tensor to a symmetric 2x2 tensor:

        C eps = E / (12 (1 - nu^2)) * ((1 - nu) eps + nu tr(eps) I)
    """
    eps = np.asarray(eps, dtype=float)
    if not np.allclose(eps, eps.T):
        raise ValueError("strain tensor must be symmetric")
    alpha = E / (12.0 * (1.0 - nu * nu))
    return alpha * ((1.0 - nu) * eps + nu * np.trace(eps) * np.eye(2))


def bending_voigt(E, nu):
    """Voigt form of the bending tensor for strain (e11, e22, 2 e12)."""
    alpha = E / (12.0 * (1.0 - nu * nu))
    return alpha * np.array([[1.0, nu, 0.0],
                             [nu, 1.0, 0.0],
                             [0.0, 0.0, (1.0 - nu) / 2.0]])


@dataclass
class BlockSystem:
    """Assembled sparse blocks of the saddle-point system.

    With A = K_b + M_s the full symmetric system reads

        [ A      -G      D_c   ] [phi ]   [rhs_rot ]
        [ -G^T    H      -E_c  ] [u   ] = [rhs_disp]
        [ D_c^T  -E_c^T  -e M_m] [zeta]   [0       ]

    where e = t^2 / (lambda (1 - t^2)).
    """

    K_b: sp.csr_matrix
    M_s: sp.csr_matrix
    G: sp.csr_matrix
    H: sp.csr_matrix
    D_c: sp.csr_matrix
    E_c: sp.csr_matrix
    M_m: sp.csr_matrix
    rhs_rot: np.ndarray
    rhs_disp: np.ndarray
    model: PlateModel
    multiplier: str
    bc: str
    mesh: Mesh
    dof_rot: DofMap
    dof_disp: DofMap
    dof_mult: DofMap

    @property
    def dims(self):
        return (self.dof_rot.vector_dim, self.dof_disp.dim,
                self.dof_mult.vector_dim)

    @property
    def A(self):
        """Rotation block K_b + M_s."""
        return (self.K_b + self.M_s).tocsr()

    def saddle_matrix(self):
        eps = self.model.penalty_coefficient
        return sp.bmat([
            [self.A, -self.G, self.D_c],
            [-self.G.T, self.H, -self.E_c],
            [self.D_c.T, -self.E_c.T, -eps * self.M_m],
        ], format="csr")

    def saddle_rhs(self):
        nm = self.dof_mult.vector_dim
        return np.concatenate([self.rhs_rot, self.rhs_disp, np.zeros(nm)])


def _geometry(coords):
    """Per-triangle areas and physical P1/CR gradients.

    coords: (nt, 3, 2).  Returns (areas, grad_p1 (nt,3,2), grad_cr (nt,3,2)).
    """
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    areas = 0.5 * det
    inv = np.empty((coords.shape[0], 2, 2))
    inv[:, 0, 0] = e2[:, 1]
    inv[:, 0, 1] = -e2[:, 0]
    inv[:, 1, 0] = -e1[:, 1]
    inv[:, 1, 1] = e1[:, 0]
    inv /= det[:, None, None]
    ghat = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    grad_p1 = np.einsum("kj,tji->tki", ghat, inv)
    return areas, grad_p1, -2.0 * grad_p1


def _reference_grams(rule):
    """Reference mass-type matrices under the given quadrature rule."""
    pts, wts = rule
    p1 = p1_basis().tabulate(pts)
    du = dual_basis().tabulate(pts)
    mass_p1 = np.einsum("q,qi,qj->ij", wts, p1, p1)
    cross = np.einsum("q,qi,qj->ij", wts, p1, du)   # rows P1, cols dual
    mass_du = np.einsum("q,qi,qj->ij", wts, du, du)
    ints_p1 = wts @ p1
    ints_du = wts @ du
    return mass_p1, cross, mass_du, ints_p1, ints_du


def element_matrices(coords, model: PlateModel, multiplier: str = "dual",
                     rule=None):
    """Local blocks for one triangle, in full (unconstrained) local bases.

    Vector-valued blocks interleave components (local dof = 2*k + c).
    Returns a dict with keys K_b (6x6), M_s (6x6), G (6x3), H (3x3),
    D_c (6x6), E_c (3x6), M_m (6x6), and area.
    """
    coords = np.asarray(coords, dtype=float)
    out = _assemble_local(coords[None, ...], model, multiplier, rule)
    if out["area"][0] <= 0.0:
        raise ValueError("degenerate (non-positive area) triangle")
    return {k: v[0] for k, v in out.items()}


def _interleave(scalar):
    """(..., m, n) scalar block -> (..., 2m, 2n) vector block (kron with I2)."""
    m, n = scalar.shape[-2:]
    out = np.zeros(scalar.shape[:-2] + (2 * m, 2 * n))
    out[..., 0::2, 0::2] = scalar
    out[..., 1::2, 1::2] = scalar
    return out


def _assemble_local(coords, model, multiplier, rule):
    if multiplier not in ("p1", "dual"):
        raise ValueError(f"unknown multiplier choice {multiplier!r}")
    if rule is None:
        rule = quadrature.midpoint_rule()
    areas, grad_p1, grad_cr = _geometry(coords)
    lam = model.shear_parameter
    mass_p1, cross, mass_du, ints_p1, ints_du = _reference_grams(rule)
    two_a = 2.0 * areas

    nt = coords.shape[0]
    # bending: B-matrix per vertex, Voigt strain (e11, e22, 2 e12)
    B = np.zeros((nt, 3, 3, 2))           # (tri, voigt, vertex, comp)
    B[:, 0, :, 0] = grad_p1[:, :, 0]
    B[:, 1, :, 1] = grad_p1[:, :, 1]
    B[:, 2, :, 0] = grad_p1[:, :, 1]
    B[:, 2, :, 1] = grad_p1[:, :, 0]
    Dv = bending_voigt(model.youngs_modulus, model.poisson_ratio)
    Bf = B.reshape(nt, 3, 6)              # local vector dof = 2*vertex + comp
    K_b = np.einsum("t,tik,ij,tjl->tkl", areas, Bf, Dv, Bf)

    M_s = lam * _interleave(two_a[:, None, None] * mass_p1[None, :, :])

    # G[(k,c), j] = lam * int phi_k d_c CR_j = lam * (2A * ints_p1[k]) * grad_cr[j,c]
    G = np.zeros((nt, 6, 3))
    for c in range(2):
        G[:, c::2, :] = lam * two_a[:, None, None] \
            * ints_p1[None, :, None] * grad_cr[:, None, :, c]

    H = lam * np.einsum("t,tki,tli->tkl", areas, grad_cr, grad_cr)

    mult_scalar = cross if multiplier == "dual" else mass_p1
    D_c = _interleave(two_a[:, None, None] * mult_scalar[None, :, :])

    ints_m = ints_du if multiplier == "dual" else ints_p1
    # E_c[j, (i,c)] = int d_c CR_j mu_i = grad_cr[j,c] * 2A * ints_m[i]
    E_c = np.zeros((nt, 3, 6))
    for c in range(2):
        E_c[:, :, c::2] = two_a[:, None, None] \
            * grad_cr[:, :, c:c + 1] * ints_m[None, None, :]

    mm_scalar = mass_du if multiplier == "dual" else mass_p1
    M_m = _interleave(two_a[:, None, None] * mm_scalar[None, :, :])

    return {"K_b": K_b, "M_s": M_s, "G": G, "H": H,
            "D_c": D_c, "E_c": E_c, "M_m": M_m, "area": areas}


def _scatter(local, row_dofs, col_dofs, shape):
    """Sum duplicate-triplet scatter of (nt, m, n) local blocks."""
    nt, m, n = local.shape
    rows = np.repeat(row_dofs, n, axis=1).reshape(nt, m, n)
    cols = np.repeat(col_dofs[:, None, :], m, axis=1)
    mat = sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())),
                        shape=shape)
    return mat.tocsr()


def _vector_dofs(entity_dofs):
    """(nt, m) entity indices -> (nt, 2m) interleaved component indices."""
    nt, m = entity_dofs.shape
    out = np.empty((nt, 2 * m), dtype=np.int64)
    out[:, 0::2] = 2 * entity_dofs
    out[:, 1::2] = 2 * entity_dofs + 1
    return out


def _vector_extension(ext):
    """Scalar extension matrix -> interleaved vector extension."""
    return sp.kron(ext, sp.identity(2), format="csr")


def assemble(mesh: Mesh, dof_rot: DofMap, dof_disp: DofMap, dof_mult: DofMap,
             model: PlateModel, multiplier: str, bc: str,
             rule=None) -> BlockSystem:
    """Assemble all global blocks and reduce them to the constrained spaces.

    Full-entity matrices are assembled by triplet accumulation and the
    homogeneous constraints / boundary modification are applied through the
    DofMap extension matrices (row/column elimination as a congruence).
    """
    if dof_mult.vector_dim != dof_rot.vector_dim:
        raise ValueError(
            f"multiplier dimension {dof_mult.vector_dim} does not match "
            f"rotation dimension {dof_rot.vector_dim}")
    coords = mesh.triangle_coords()
    loc = _assemble_local(coords, model, multiplier, rule)

    nv, ne = mesh.num_vertices, mesh.num_edges
    vtx = _vector_dofs(mesh.triangles)
    edg = mesh.tri_edges

    K_b = _scatter(loc["K_b"], vtx, vtx, (2 * nv, 2 * nv))
    M_s = _scatter(loc["M_s"], vtx, vtx, (2 * nv, 2 * nv))
    G = _scatter(loc["G"], vtx, edg, (2 * nv, ne))
    H = _scatter(loc["H"], edg, edg, (ne, ne))
    D_c = _scatter(loc["D_c"], vtx, vtx, (2 * nv, 2 * nv))
    E_c = _scatter(loc["E_c"], edg, vtx, (ne, 2 * nv))
    M_m = _scatter(loc["M_m"], vtx, vtx, (2 * nv, 2 * nv))

    R = _vector_extension(dof_rot.extension)
    Wd = dof_disp.extension
    M = _vector_extension(dof_mult.extension)

    rhs_disp = Wd.T @ load_vector(mesh, None, model, rule)
    rhs_rot_full = _moment_vector(mesh, model, rule)
    if model.boundary_moment is not None:
        rhs_rot_full = rhs_rot_full + _boundary_moment_vector(mesh, model)
    rhs_rot = R.T @ rhs_rot_full

    return BlockSystem(
        K_b=(R.T @ K_b @ R).tocsr(),
        M_s=(R.T @ M_s @ R).tocsr(),
        G=(R.T @ G @ Wd).tocsr(),
        H=(Wd.T @ H @ Wd).tocsr(),
        D_c=(R.T @ D_c @ M).tocsr(),
        E_c=(Wd.T @ E_c @ M).tocsr(),
        M_m=(M.T @ M_m @ M).tocsr(),
        rhs_rot=rhs_rot, rhs_disp=rhs_disp,
        model=model, multiplier=multiplier, bc=bc, mesh=mesh,
        dof_rot=dof_rot, dof_disp=dof_disp, dof_mult=dof_mult,
    )


def load_vector(mesh: Mesh, dofs: DofMap | None = None,
                model: PlateModel | None = None, rule=None):
    """Transverse load vector: entries int g v_h for the CR basis.

    With a DofMap the constrained (reduced) vector is returned; otherwise
    the full per-edge vector.
    """
    if rule is None:
        rule = quadrature.midpoint_rule()
    pts, wts = rule
    coords = mesh.triangle_coords()
    areas = mesh.triangle_areas()
    full = np.zeros(mesh.num_edges)
    if model is not None and model.transverse_load is not None:
        phys = quadrature.map_to_physical(coords, pts)      # (nt, q, 2)
        gvals = _eval_scalar(model.transverse_load, phys)   # (nt, q)
        crv = cr_basis().tabulate(pts)                      # (q, 3)
        local = 2.0 * areas[:, None] * np.einsum("q,tq,qk->tk", wts, gvals, crv)
        np.add.at(full, mesh.tri_edges.ravel(), local.ravel())
    if dofs is None:
        return full
    return dofs.extension.T @ full


def _moment_vector(mesh, model, rule=None):
    """Full rotation-row load: entries int m . psi_h for the vector P1 basis."""
    nv = mesh.num_vertices
    full = np.zeros(2 * nv)
    if model is None or model.moment_load is None:
        return full
    if rule is None:
        rule = quadrature.midpoint_rule()
    pts, wts = rule
    coords = mesh.triangle_coords()
    areas = mesh.triangle_areas()
    phys = quadrature.map_to_physical(coords, pts)
    mvals = _eval_vector(model.moment_load, phys)           # (nt, q, 2)
    p1 = p1_basis().tabulate(pts)
    local = 2.0 * areas[:, None, None] \
        * np.einsum("q,tqc,qk->tkc", wts, mvals, p1)        # (nt, 3, 2)
    dofs = _vector_dofs(mesh.triangles)
    np.add.at(full, dofs.ravel(), local.reshape(len(areas), 6).ravel())
    return full


def _boundary_moment_vector(mesh, model):
    """Boundary line integral int_Gamma (M n) . psi_h for the vector P1
    basis, with the prescribed traction M n from model.boundary_moment.

    Uses 5-point Gauss per edge (exact for polynomial tractions up to
    degree 8 against the linear trace of the basis)."""
    nv = mesh.num_vertices
    full = np.zeros(2 * nv)
    bidx = np.flatnonzero(mesh.edge_is_boundary)
    if bidx.size == 0:
        return full
    gp, gw = np.polynomial.legendre.leggauss(5)
    s = 0.5 * (gp + 1.0)                                   # on [0, 1]
    w = 0.5 * gw

    edges = mesh.edges[bidx]                               # (nb, 2)
    x0 = mesh.vertices[edges[:, 0]]
    x1 = mesh.vertices[edges[:, 1]]
    tang = x1 - x0
    length = np.linalg.norm(tang, axis=1)
    normal = np.column_stack([tang[:, 1], -tang[:, 0]]) / length[:, None]
    # orient outward: away from the third vertex of the adjacent triangle
    tri = mesh.edge_tris[bidx, 0]
    opp = mesh.triangles[tri].sum(axis=1) - edges.sum(axis=1)
    flip = np.einsum("ec,ec->e",
                     mesh.vertices[opp] - x0, normal) > 0.0
    normal[flip] *= -1.0

    pts = x0[:, None, :] + s[None, :, None] * tang[:, None, :]  # (nb, q, 2)
    nrm = np.broadcast_to(normal[:, None, :], pts.shape)
    vals = np.asarray(model.boundary_moment(pts.reshape(-1, 2),
                                            nrm.reshape(-1, 2)), dtype=float)
    vals = vals.reshape(pts.shape)                          # (nb, q, 2)
    # linear trace of the vertex basis along the edge: 1-s at x0, s at x1
    trace = np.stack([1.0 - s, s], axis=1)                  # (q, 2 vertices)
    local = length[:, None, None] \
        * np.einsum("q,eqc,qk->ekc", w, vals, trace)        # (nb, 2, 2)
    dofs = _vector_dofs(edges)
    np.add.at(full, dofs.ravel(), local.reshape(bidx.size, 4).ravel())
    return full


def _eval_scalar(f, phys):
    nt, q, _ = phys.shape
    flat = phys.reshape(-1, 2)
    vals = np.asarray(f(flat), dtype=float)
    if vals.shape != (nt * q,):
        vals = np.broadcast_to(vals, (nt * q,))
    return vals.reshape(nt, q)


def _eval_vector(f, phys):
    nt, q, _ = phys.shape
    flat = phys.reshape(-1, 2)
    vals = np.asarray(f(flat), dtype=float)
    return vals.reshape(nt, q, 2)
