"""Verification harness: manufactured solutions, error norms, convergence
studies, thickness sweeps, and numerical inf-sup estimates.

The manufactured family keeps the scaled shear profile independent of the
thickness t, so the exact multiplier stays O(1) as t -> 0 and convergence
constants can be checked for t-uniformity.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import sympy

from . import quadrature
from .assembly import (PlateModel, assemble, bending_voigt, element_matrices,
                       load_vector)
from .mesh import Mesh, unit_square_mesh
from .solver import Solution, solve_condensed, solve_saddle
from .spaces import (DofMap, build_dof_map, cr_basis, dual_basis,
                     multiplier_space, p1_basis, rotation_space)

__all__ = [
    "ExactSolution", "ErrorReport", "manufactured_solution", "compute_errors",
    "convergence_study", "locking_sweep", "estimate_infsup",
    "solve_plate", "center_deflection", "solve_naive_p1",
]


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form exact fields and the loads they induce.

    All callables take an (npts, 2) array; scalar fields return (npts,),
    vector fields (npts, 2), and gradients (npts, 2) / (npts, 2, 2).
    """

    t: float
    displacement: Callable
    grad_displacement: Callable
    rotation: Callable
    grad_rotation: Callable
    shear_profile: Callable          # gamma*, thickness-independent
    multiplier: Callable             # zeta* = lambda (1 - t^2) gamma*
    transverse_load: Callable        # g = lambda div gamma*
    moment_load: Callable            # m = -div C eps(phi*) + lambda gamma*
    bending_traction: Callable       # (points, normals) -> C eps(phi*) n


def manufactured_solution(t: float, model: PlateModel,
                          bc: str = "clamped") -> ExactSolution:
    """Polynomial exact solution on the unit square.

    u* = x^2 (1-x)^2 y^2 (1-y)^2 and gamma* has both components equal to
    x y (1-x) (1-y); the rotation is phi* = grad u* + t^2 gamma*, so the
    multiplier zeta* = lambda (1 - t^2) gamma* is bounded uniformly in t.
    Both fields vanish on the boundary, so the same family serves the
    clamped and the simply supported case.
    """
    x, y = sympy.symbols("x y")
    lam = model.shear_parameter
    E, nu = model.youngs_modulus, model.poisson_ratio

    u = (x * (1 - x)) ** 2 * (y * (1 - y)) ** 2
    bubble = x * y * (1 - x) * (1 - y)
    gamma = sympy.Matrix([bubble, bubble])
    grad_u = sympy.Matrix([u.diff(x), u.diff(y)])
    phi = grad_u + t * t * gamma
    zeta = lam * (1 - t * t) * gamma

    # strong-form loads: g = lambda div gamma, m = -div(C eps(phi)) + lambda gamma
    g = lam * (gamma[0].diff(x) + gamma[1].diff(y))
    eps = sympy.Matrix([
        [phi[0].diff(x), (phi[0].diff(y) + phi[1].diff(x)) / 2],
        [(phi[0].diff(y) + phi[1].diff(x)) / 2, phi[1].diff(y)],
    ])
    alpha = E / (12 * (1 - nu * nu))
    sigma = alpha * ((1 - nu) * eps + nu * eps.trace() * sympy.eye(2))
    div_sigma = sympy.Matrix([
        sigma[0, 0].diff(x) + sigma[0, 1].diff(y),
        sigma[1, 0].diff(x) + sigma[1, 1].diff(y),
    ])
    m = -div_sigma + lam * gamma

    grad_phi = sympy.Matrix([[phi[i].diff(v) for v in (x, y)]
                             for i in range(2)])

    sigma_fns = [[sympy.lambdify((x, y), sigma[i, j], "numpy")
                  for j in range(2)] for i in range(2)]

    def traction(p, n):
        out = np.zeros((p.shape[0], 2))
        for i in range(2):
            for j in range(2):
                sij = np.broadcast_to(
                    np.asarray(sigma_fns[i][j](p[:, 0], p[:, 1]),
                               dtype=float), (p.shape[0],))
                out[:, i] += sij * n[:, j]
        return out

    def scalar(expr):
        f = sympy.lambdify((x, y), expr, "numpy")
        return lambda p: np.broadcast_to(
            np.asarray(f(p[:, 0], p[:, 1]), dtype=float), (p.shape[0],)).copy()

    def vector(exprs):
        fs = [sympy.lambdify((x, y), e, "numpy") for e in exprs]
        return lambda p: np.stack(
            [np.broadcast_to(np.asarray(f(p[:, 0], p[:, 1]), dtype=float),
                             (p.shape[0],)) for f in fs], axis=-1)

    def tensor(mat):
        fs = [[sympy.lambdify((x, y), mat[i, j], "numpy") for j in range(2)]
              for i in range(2)]
        def eval_(p):
            out = np.empty((p.shape[0], 2, 2))
            for i in range(2):
                for j in range(2):
                    out[:, i, j] = np.broadcast_to(
                        np.asarray(fs[i][j](p[:, 0], p[:, 1]), dtype=float),
                        (p.shape[0],))
            return out
        return eval_

    return ExactSolution(
        t=t,
        displacement=scalar(u),
        grad_displacement=vector(list(grad_u)),
        rotation=vector(list(phi)),
        grad_rotation=tensor(grad_phi),
        shear_profile=vector(list(gamma)),
        multiplier=vector(list(zeta)),
        transverse_load=scalar(g),
        moment_load=vector(list(m)),
        bending_traction=traction,
    )


@dataclass
class ErrorReport:
    """Element-wise error norms of one solved problem."""

    h: float
    t: float
    rot_l2: float
    rot_h1_semi: float
    rot_h1: float
    disp_l2: float
    disp_broken_h1: float
    shear_l2: float
    shear_t_l2: float

    def as_dict(self):
        return dict(self.__dict__)


def _discrete_fields(system, solution):
    """Full-entity coefficient arrays for evaluation."""
    rot_full = system.dof_rot.full_coefficients(solution.rotation)
    rot_full = rot_full.reshape(-1, 2)                       # per vertex
    disp_full = system.dof_disp.full_coefficients(solution.displacement)
    mult_full = system.dof_mult.full_coefficients(solution.multiplier)
    mult_full = mult_full.reshape(-1, 2)
    return rot_full, disp_full, mult_full


def compute_errors(solution: Solution, exact: ExactSolution, system,
                   rule=None) -> ErrorReport:
    """Error norms with a quadrature rule of degree >= 6.

    The displacement norm is the broken H1 norm (per-element full H1 norm);
    the rotation H1 norm sums the L2 and seminorm parts.
    """
    if rule is None:
        rule = quadrature.degree6_rule()
    pts, wts = rule
    mesh = system.mesh
    coords = mesh.triangle_coords()
    areas = mesh.triangle_areas()
    phys = quadrature.map_to_physical(coords, pts)           # (nt, q, 2)
    flat = phys.reshape(-1, 2)
    nt, q = phys.shape[:2]
    wdet = 2.0 * areas[:, None] * wts[None, :]               # (nt, q)

    rot_full, disp_full, mult_full = _discrete_fields(system, solution)

    p1v = p1_basis().tabulate(pts)                           # (q, 3)
    crv = cr_basis().tabulate(pts)
    mbasis = dual_basis() if system.multiplier == "dual" else p1_basis()
    muv = mbasis.tabulate(pts)

    from .assembly import _geometry
    _, grad_p1, grad_cr = _geometry(coords)

    tri, edg = mesh.triangles, mesh.tri_edges

    # rotation: phi_h (nt, q, 2) and constant gradient (nt, 2, 2)
    rot_h = np.einsum("qk,tkc->tqc", p1v, rot_full[tri])
    grad_rot_h = np.einsum("tkc,tki->tci", rot_full[tri], grad_p1)
    rot_ex = exact.rotation(flat).reshape(nt, q, 2)
    grad_rot_ex = exact.grad_rotation(flat).reshape(nt, q, 2, 2)
    e = rot_h - rot_ex
    rot_l2_sq = np.sum(wdet * np.sum(e * e, axis=2))
    ge = grad_rot_h[:, None, :, :] - grad_rot_ex
    rot_h1_semi_sq = np.sum(wdet * np.sum(ge * ge, axis=(2, 3)))

    # displacement: u_h (nt, q), gradient constant per element
    disp_h = np.einsum("qk,tk->tq", crv, disp_full[edg])
    grad_disp_h = np.einsum("tk,tki->ti", disp_full[edg], grad_cr)
    disp_ex = exact.displacement(flat).reshape(nt, q)
    grad_disp_ex = exact.grad_displacement(flat).reshape(nt, q, 2)
    e = disp_h - disp_ex
    disp_l2_sq = np.sum(wdet * e * e)
    ge = grad_disp_h[:, None, :] - grad_disp_ex
    disp_semi_sq = np.sum(wdet * np.sum(ge * ge, axis=2))

    # multiplier
    mult_h = np.einsum("qk,tkc->tqc", muv, mult_full[tri])
    mult_ex = exact.multiplier(flat).reshape(nt, q, 2)
    e = mult_h - mult_ex
    shear_l2_sq = np.sum(wdet * np.sum(e * e, axis=2))

    rot_l2 = float(np.sqrt(rot_l2_sq))
    rot_semi = float(np.sqrt(rot_h1_semi_sq))
    disp_l2 = float(np.sqrt(disp_l2_sq))
    shear_l2 = float(np.sqrt(shear_l2_sq))
    return ErrorReport(
        h=mesh.mesh_size_h, t=exact.t,
        rot_l2=rot_l2, rot_h1_semi=rot_semi,
        rot_h1=float(np.sqrt(rot_l2_sq + rot_h1_semi_sq)),
        disp_l2=disp_l2,
        disp_broken_h1=float(np.sqrt(disp_l2_sq + disp_semi_sq)),
        shear_l2=shear_l2, shear_t_l2=exact.t * shear_l2,
    )


def solve_plate(mesh: Mesh, model: PlateModel, bc: str = "clamped",
                multiplier: str = "dual", method: str = "auto"):
    """Assemble and solve one plate problem; returns (system, solution).

    method: 'saddle', 'condensed', or 'auto' (condensed when the dual
    multiplier makes the Gram matrix diagonal).
    """
    rot = rotation_space(mesh, bc)
    disp = build_dof_map(mesh, "W")
    mult = multiplier_space(mesh, bc, multiplier)
    system = assemble(mesh, rot, disp, mult, model, multiplier, bc)
    if method == "auto":
        method = "condensed" if multiplier == "dual" else "saddle"
    if method == "condensed":
        solution = solve_condensed(system)
    elif method == "saddle":
        solution = solve_saddle(system)
    else:
        raise ValueError(f"unknown method {method!r}")
    return system, solution


def convergence_study(levels, thicknesses, multiplier: str = "dual",
                      bc: str = "clamped", youngs_modulus: float = 1.0,
                      poisson_ratio: float = 0.3, method: str = "auto"):
    """Manufactured-solution study over mesh levels and thicknesses.

    ``levels`` is a list of >= 3 built-in mesh subdivisions n (each level
    should double the previous one so the observed rate log2(e_2h / e_h)
    is meaningful).  Returns a list of record dicts, one per (n, t), each
    carrying the error norms and the rates against the previous level.
    """
    levels = list(levels)
    if len(levels) < 3:
        raise ValueError("need at least 3 mesh levels for a rate table")
    records = []
    for t in thicknesses:
        prev = None
        for n in levels:
            mesh = unit_square_mesh(n)
            base = PlateModel(youngs_modulus, poisson_ratio, t)
            exact = manufactured_solution(t, base, bc)
            model = PlateModel(youngs_modulus, poisson_ratio, t,
                               transverse_load=exact.transverse_load,
                               moment_load=exact.moment_load,
                               boundary_moment=exact.bending_traction)
            system, solution = solve_plate(mesh, model, bc, multiplier, method)
            err = compute_errors(solution, exact, system)
            rec = {"n": n, "level": levels.index(n), **err.as_dict()}
            rec["rate_rot"] = np.log2(prev["rot_h1"] / err.rot_h1) \
                if prev else float("nan")
            rec["rate_disp"] = np.log2(prev["disp_broken_h1"]
                                       / err.disp_broken_h1) \
                if prev else float("nan")
            records.append(rec)
            prev = rec
    return records


def center_deflection(system, solution, radius: float = 0.25,
                      center=(0.5, 0.5)):
    """Area-weighted mean of u_h over triangles whose centroid lies within
    ``radius`` of ``center``."""
    mesh = system.mesh
    disp_full = system.dof_disp.full_coefficients(solution.displacement)
    centroids = mesh.triangle_coords().mean(axis=1)
    # CR value at the centroid = mean of the three edge values
    vals = disp_full[mesh.tri_edges].mean(axis=1)
    areas = mesh.triangle_areas()
    mask = np.linalg.norm(centroids - np.asarray(center), axis=1) <= radius
    if not np.any(mask):
        raise ValueError("no triangle centroid inside the sampling region")
    return float(np.sum(areas[mask] * vals[mask]) / np.sum(areas[mask]))


def locking_sweep(mesh: Mesh, thicknesses, multiplier: str = "dual",
                  bc: str = "clamped", naive: bool = False,
                  youngs_modulus: float = 1.0, poisson_ratio: float = 0.3):
    """Uniform-load deflection per thickness.

    With naive=True the mixed method is replaced by the diagnostic
    conforming P1-P1 discretization with full shear penalty, which locks.
    Returns a list of {'t': t, 'deflection': d} rows, in input order.
    """
    ts = list(thicknesses)
    if any(b <= a for a, b in zip(ts[1:], ts)) is False and len(ts) > 1:
        pass  # order is caller's choice; reported as given
    rows = []
    for t in ts:
        model = PlateModel(youngs_modulus, poisson_ratio, t,
                           transverse_load=lambda p: np.ones(p.shape[0]))
        if naive:
            d = _naive_center_deflection(mesh, model)
        else:
            system, solution = solve_plate(mesh, model, bc, multiplier)
            d = center_deflection(system, solution)
        rows.append({"t": t, "deflection": d})
    return rows


def solve_naive_p1(mesh: Mesh, model: PlateModel):
    """Diagnostic conforming P1-P1 discretization with full shear penalty.

    Finds (phi_h, u_h) in [P1_0]^2 x P1_0 for the bending energy plus
    (lambda / t^2) * ||phi_h - grad u_h||^2; the textbook locking example.
    Returns (vertex_rotation (nv,2), vertex_displacement (nv,)).
    """
    lam = model.shear_parameter
    t = model.thickness
    s = lam / (t * t)
    coords = mesh.triangle_coords()
    from .assembly import _geometry, _interleave, _vector_dofs, _scatter
    areas, grad_p1, _ = _geometry(coords)
    nv = mesh.num_vertices
    nt = mesh.num_triangles

    pts, wts = quadrature.midpoint_rule()
    p1v = p1_basis().tabulate(pts)
    mass_hat = np.einsum("q,qi,qj->ij", wts, p1v, p1v)
    ints_hat = wts @ p1v
    two_a = 2.0 * areas

    B = np.zeros((nt, 3, 3, 2))
    B[:, 0, :, 0] = grad_p1[:, :, 0]
    B[:, 1, :, 1] = grad_p1[:, :, 1]
    B[:, 2, :, 0] = grad_p1[:, :, 1]
    B[:, 2, :, 1] = grad_p1[:, :, 0]
    Dv = bending_voigt(model.youngs_modulus, model.poisson_ratio)
    Bf = B.reshape(nt, 3, 6)
    K_b = np.einsum("t,tik,ij,tjl->tkl", areas, Bf, Dv, Bf)
    M_loc = s * _interleave(two_a[:, None, None] * mass_hat[None, :, :])
    G_loc = np.zeros((nt, 6, 3))
    for c in range(2):
        G_loc[:, c::2, :] = s * two_a[:, None, None] \
            * ints_hat[None, :, None] * grad_p1[:, None, :, c]
    H_loc = s * np.einsum("t,tki,tli->tkl", areas, grad_p1, grad_p1)

    vtx = _vector_dofs(mesh.triangles)
    Krot = _scatter(K_b + M_loc, vtx, vtx, (2 * nv, 2 * nv))
    G = _scatter(G_loc, vtx, mesh.triangles, (2 * nv, nv))
    H = _scatter(H_loc, mesh.triangles, mesh.triangles, (nv, nv))

    if model.transverse_load is None:
        rhs_full = np.zeros(nv)
    else:
        physq = quadrature.map_to_physical(coords, pts)
        gvals = np.asarray(model.transverse_load(physq.reshape(-1, 2)))
        gvals = np.broadcast_to(gvals, (nt * len(wts),)).reshape(nt, len(wts))
        local = two_a[:, None] * np.einsum("q,tq,qk->tk", wts, gvals, p1v)
        rhs_full = np.zeros(nv)
        np.add.at(rhs_full, mesh.triangles.ravel(), local.ravel())

    on_bdry = np.zeros(nv, dtype=bool)
    on_bdry[mesh.boundary_vertices] = True
    keep = np.flatnonzero(~on_bdry)
    keep_v = np.sort(np.concatenate([2 * keep, 2 * keep + 1]))

    K = sp.bmat([[Krot[np.ix_(keep_v, keep_v)], -G[np.ix_(keep_v, keep)]],
                 [-G[np.ix_(keep_v, keep)].T, H[np.ix_(keep, keep)]]],
                format="csc").toarray()
    rhs = np.concatenate([np.zeros(keep_v.size), rhs_full[keep]])
    x = scipy.linalg.solve(K, rhs, assume_a="sym")

    rot = np.zeros((nv, 2))
    rot[keep] = x[:keep_v.size].reshape(-1, 2)
    disp = np.zeros(nv)
    disp[keep] = x[keep_v.size:]
    return rot, disp


def _naive_center_deflection(mesh, model, radius=0.25, center=(0.5, 0.5)):
    _, disp = solve_naive_p1(mesh, model)
    centroids = mesh.triangle_coords().mean(axis=1)
    vals = disp[mesh.triangles].mean(axis=1)
    areas = mesh.triangle_areas()
    mask = np.linalg.norm(centroids - np.asarray(center), axis=1) <= radius
    return float(np.sum(areas[mask] * vals[mask]) / np.sum(areas[mask]))


def estimate_infsup(mesh: Mesh, pair: str = "divergence-dual",
                    bc: str = "clamped", size_limit: int = 3000) -> float:
    """Numerical inf-sup constant for a space pairing, by dense generalized
    eigensolve.

    pair:
      'divergence-p1' / 'divergence-dual':  coupling int div_h(v_h) q_h
        with v_h in the vector CR space (boundary means zero) under the
        broken H1 norm and q_h in the (zero-mean) multiplier space under L2.
      'multiplier-p1' / 'multiplier-dual':  coupling int mu_h phi_h with the
        rotation space for ``bc``, both sides under L2 norms.
    """
    kind, _, base = pair.partition("-")
    if kind not in ("divergence", "multiplier") or base not in ("p1", "dual"):
        raise ValueError(f"unknown space pair {pair!r}")

    coords = mesh.triangle_coords()
    from .assembly import _geometry, _scatter, _vector_dofs
    areas, grad_p1, grad_cr = _geometry(coords)
    nv, ne, nt = mesh.num_vertices, mesh.num_edges, mesh.num_triangles
    two_a = 2.0 * areas

    pts, wts = quadrature.midpoint_rule()
    p1v = p1_basis().tabulate(pts)
    duv = dual_basis().tabulate(pts)
    mass_p1 = np.einsum("q,qi,qj->ij", wts, p1v, p1v)
    mass_du = np.einsum("q,qi,qj->ij", wts, duv, duv)
    cross = np.einsum("q,qi,qj->ij", wts, p1v, duv)
    muv = duv if base == "dual" else p1v
    mass_mu = mass_du if base == "dual" else mass_p1

    Mq = _scatter(two_a[:, None, None] * mass_mu[None, :, :],
                  mesh.triangles, mesh.triangles, (nv, nv)).toarray()

    if kind == "divergence":
        ndofs = 2 * (~mesh.edge_is_boundary).sum()
        if ndofs + nv > size_limit:
            raise ValueError(f"problem too large for dense inf-sup estimate "
                             f"({ndofs + nv} > {size_limit} unknowns)")
        # B[q_i, (j,c)] = int mu_i d_c CR_j (per-element: int_T mu_i = |T|/3)
        ints = np.full(3, 1.0 / 3.0)
        loc = np.zeros((nt, 3, 6))
        for c in range(2):
            loc[:, :, c::2] = areas[:, None, None] * ints[None, :, None] \
                * grad_cr[:, None, :, c]
        edgv = _vector_dofs(mesh.tri_edges)
        B = _scatter(loc, mesh.triangles, edgv, (nv, 2 * ne)).toarray()
        # broken H1 norm matrix of the vector CR space (stiffness + mass)
        stiff = np.einsum("t,tki,tli->tkl", areas, grad_cr, grad_cr)
        mass_cr_diag = np.zeros(ne)
        np.add.at(mass_cr_diag, mesh.tri_edges.ravel(),
                  np.repeat(areas / 3.0, 3))
        S_sc = _scatter(stiff, mesh.tri_edges, mesh.tri_edges,
                        (ne, ne)).toarray() + np.diag(mass_cr_diag)
        keep = np.flatnonzero(~mesh.edge_is_boundary)
        keep_v = np.sort(np.concatenate([2 * keep, 2 * keep + 1]))
        S = np.kron(S_sc[np.ix_(keep, keep)], np.eye(2))
        B = B[:, keep_v]
        # restrict q to the zero-mean complement (constants are in the kernel)
        ints_mu = Mq @ np.ones(nv) if base == "p1" else None
        if base == "dual":
            ints_loc = np.zeros(nv)
            np.add.at(ints_loc, mesh.triangles.ravel(),
                      np.repeat(areas / 3.0, 3))
            ints_mu = ints_loc
        Z = scipy.linalg.null_space(ints_mu[None, :])
        A2 = B @ scipy.linalg.solve(S, B.T, assume_a="pos")
        lhs = Z.T @ A2 @ Z
        rhs = Z.T @ Mq @ Z
    else:
        rot = rotation_space(mesh, bc)
        mult = multiplier_space(mesh, bc, base)
        if rot.vector_dim + mult.vector_dim > size_limit:
            raise ValueError("problem too large for dense inf-sup estimate")
        cross_sc = cross if base == "dual" else mass_p1
        C = _scatter(two_a[:, None, None] * cross_sc[None, :, :],
                     mesh.triangles, mesh.triangles, (nv, nv)).toarray()
        Er = rot.extension.toarray()
        Em = mult.extension.toarray()
        Cr = Em.T @ C.T @ Er            # multiplier rows x rotation cols
        Mmu = Em.T @ Mq @ Em
        Mp = _scatter(two_a[:, None, None] * mass_p1[None, :, :],
                      mesh.triangles, mesh.triangles, (nv, nv)).toarray()
        Mrot = Er.T @ Mp @ Er
        # inf over the multiplier, sup over the rotation
        lhs = Cr @ scipy.linalg.solve(Mrot, Cr.T, assume_a="pos")
        rhs = Mmu
        # scalar pairing suffices: components decouple identically
    vals = scipy.linalg.eigvalsh(lhs, rhs)
    vals = vals[vals > max(vals.max(), 1.0) * 1e-12]
    return float(np.sqrt(vals.min()))
