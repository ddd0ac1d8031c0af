"""Manufactured solutions, error integration, studies, and inf-sup."""
import numpy as np
import pytest
import sympy

from crplate.assembly import PlateModel, assemble
from crplate.mesh import unit_square_mesh
from crplate.solver import Solution
from crplate.spaces import build_dof_map, multiplier_space, rotation_space
from crplate.verify import (center_deflection, compute_errors,
                            convergence_study, estimate_infsup,
                            locking_sweep, manufactured_solution, solve_plate,
                            solve_naive_p1)

MODEL = PlateModel(youngs_modulus=1.0, poisson_ratio=0.3, thickness=0.1)


def test_manufactured_fields_are_consistent():
    """Cross-check the generated callables against their definitions:
    phi = grad u + t^2 gamma and zeta = lambda (1 - t^2) gamma."""
    t = 0.05
    model = PlateModel(thickness=t)
    ex = manufactured_solution(t, model)
    rng = np.random.default_rng(3)
    p = rng.uniform(0.05, 0.95, (50, 2))
    gamma = ex.shear_profile(p)
    assert np.allclose(ex.rotation(p),
                       ex.grad_displacement(p) + t * t * gamma)
    assert np.allclose(ex.multiplier(p),
                       model.shear_parameter * (1 - t * t) * gamma)
    # gradient by central differences
    h = 1e-6
    dx = (ex.displacement(p + [h, 0]) - ex.displacement(p - [h, 0])) / (2 * h)
    assert np.allclose(ex.grad_displacement(p)[:, 0], dx, atol=1e-8)
    # boundary traces vanish (same family serves both bcs)
    edge = np.array([[0.0, 0.3], [1.0, 0.7], [0.4, 0.0], [0.9, 1.0]])
    assert np.allclose(ex.displacement(edge), 0.0)
    assert np.allclose(ex.rotation(edge), 0.0)


def test_manufactured_loads_satisfy_strong_form():
    """g = lambda div gamma checked against symbolic differentiation done
    independently of the implementation."""
    x, y = sympy.symbols("x y")
    bubble = x * y * (1 - x) * (1 - y)
    div_gamma = sympy.lambdify((x, y), bubble.diff(x) + bubble.diff(y))
    ex = manufactured_solution(0.1, MODEL)
    p = np.random.default_rng(5).uniform(0, 1, (40, 2))
    assert np.allclose(ex.transverse_load(p),
                       MODEL.shear_parameter * div_gamma(p[:, 0], p[:, 1]))


def test_zero_solution_errors_match_symbolic_norms():
    """With the zero discrete solution every error norm equals the norm of
    the exact field; sympy integration is the independent oracle.  The
    degree-6 error quadrature is not exact for the degree-16 squared
    fields, hence the loose relative tolerance; the shear integrand is
    degree 4 and must match tightly."""
    t = 0.1
    mesh = unit_square_mesh(3)
    system = assemble(mesh, rotation_space(mesh, "clamped"),
                      build_dof_map(mesh, "W"),
                      multiplier_space(mesh, "clamped", "dual"),
                      MODEL, "dual", "clamped")
    nr, nd, nm = system.dims
    zero = Solution(np.zeros(nr), np.zeros(nd), np.zeros(nm))
    ex = manufactured_solution(t, MODEL)
    err = compute_errors(zero, ex, system)

    x, y = sympy.symbols("x y")
    u = (x * (1 - x)) ** 2 * (y * (1 - y)) ** 2
    box = ((x, 0, 1), (y, 0, 1))
    u_l2 = sympy.sqrt(sympy.integrate(u ** 2, *box))
    u_h1 = sympy.sqrt(sympy.integrate(u ** 2 + u.diff(x) ** 2
                                      + u.diff(y) ** 2, *box))
    assert np.isclose(err.disp_l2, float(u_l2), rtol=1e-4)
    assert np.isclose(err.disp_broken_h1, float(u_h1), rtol=1e-4)

    bubble = x * y * (1 - x) * (1 - y)
    z_l2 = MODEL.shear_parameter * (1 - t * t) \
        * sympy.sqrt(2 * sympy.integrate(bubble ** 2, *box))
    assert np.isclose(err.shear_l2, float(z_l2), rtol=1e-13)
    assert np.isclose(err.shear_t_l2, t * err.shear_l2)

    phi = sympy.Matrix([u.diff(x) + t ** 2 * bubble,
                        u.diff(y) + t ** 2 * bubble])
    semi = sum(phi[i].diff(v) ** 2 for i in range(2) for v in (x, y))
    l2 = phi[0] ** 2 + phi[1] ** 2
    rot_h1 = sympy.sqrt(sympy.integrate(l2 + semi, *box))
    assert np.isclose(err.rot_h1, float(rot_h1), rtol=1e-4)


@pytest.mark.parametrize("bc", ["clamped", "simply_supported"])
@pytest.mark.parametrize("multiplier", ["p1", "dual"])
def test_errors_shrink_under_refinement(bc, multiplier):
    t = 0.01
    errs = []
    for n in (2, 4, 8):
        mesh = unit_square_mesh(n)
        ex = manufactured_solution(t, MODEL, bc)
        model = PlateModel(thickness=t, transverse_load=ex.transverse_load,
                           moment_load=ex.moment_load,
                           boundary_moment=ex.bending_traction)
        system, sol = solve_plate(mesh, model, bc, multiplier)
        errs.append(compute_errors(sol, ex, system))
    assert errs[2].rot_h1 < errs[1].rot_h1 < errs[0].rot_h1
    assert errs[2].disp_broken_h1 < errs[1].disp_broken_h1


def test_convergence_study_rates_near_one():
    recs = convergence_study([4, 8, 16], [0.1], multiplier="dual")
    finest = recs[-1]
    assert 0.85 <= finest["rate_rot"] <= 1.3
    assert 0.85 <= finest["rate_disp"] <= 1.3
    assert np.isnan(recs[0]["rate_rot"])
    assert len(recs) == 3


def test_convergence_study_needs_three_levels():
    with pytest.raises(ValueError):
        convergence_study([4, 8], [0.1])


def test_l2_rates_are_higher_order():
    recs = convergence_study([4, 8, 16], [0.1])
    r = np.log2(recs[-2]["disp_l2"] / recs[-1]["disp_l2"])
    assert r >= 1.0


def test_locking_sweep_stabilizes():
    mesh = unit_square_mesh(8)
    rows = locking_sweep(mesh, [1e-1, 1e-2, 1e-4, 1e-6])
    d = [r["deflection"] for r in rows]
    assert all(v > 0 for v in d)
    assert abs(d[-1] - d[-2]) / abs(d[-1]) < 0.01


def test_naive_discretization_locks():
    mesh = unit_square_mesh(8)
    rows = locking_sweep(mesh, [1e-1, 1e-2, 1e-3], naive=True)
    d = [r["deflection"] for r in rows]
    assert d[2] < d[1] < d[0]
    assert d[2] < 0.01 * d[0]


def test_naive_solver_satisfies_boundary_conditions():
    mesh = unit_square_mesh(4)
    model = PlateModel(transverse_load=lambda p: np.ones(p.shape[0]))
    rot, disp = solve_naive_p1(mesh, model)
    assert np.allclose(disp[mesh.boundary_vertices], 0.0)
    assert np.allclose(rot[mesh.boundary_vertices], 0.0)
    assert np.abs(disp).max() > 0


def test_single_thickness_sweep():
    rows = locking_sweep(unit_square_mesh(4), [0.1])
    assert len(rows) == 1


def test_center_deflection_empty_region():
    mesh = unit_square_mesh(2)
    model = PlateModel(transverse_load=lambda p: np.ones(p.shape[0]))
    system, sol = solve_plate(mesh, model)
    with pytest.raises(ValueError):
        center_deflection(system, sol, radius=1e-9, center=(0.01, 0.01))


def test_infsup_multiplier_pairing_positive_and_stable():
    vals = [estimate_infsup(unit_square_mesh(n), "multiplier-dual")
            for n in (2, 4, 8)]
    assert all(v > 0 for v in vals)
    assert min(vals) / max(vals) >= 0.5


def test_infsup_p1_multiplier_pairing_is_identity():
    """With M_h = V_h componentwise the pairing is the L2 inner product, so
    the constant is exactly one."""
    assert np.isclose(
        estimate_infsup(unit_square_mesh(4), "multiplier-p1",
                        bc="simply_supported"), 1.0, atol=1e-10)


def test_infsup_size_limit():
    with pytest.raises(ValueError):
        estimate_infsup(unit_square_mesh(24), "divergence-dual")


def test_infsup_unknown_pair():
    with pytest.raises(ValueError):
        estimate_infsup(unit_square_mesh(2), "pressure-p0")
