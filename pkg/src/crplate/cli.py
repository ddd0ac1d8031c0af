"""Command-line interface: solve single plates, run convergence and
thickness studies, check method properties, and inspect meshes.

Configuration is resolved as CLI option > config-file entry > built-in
default.  Config files are flat ``key = value`` text; keys match the long
option names.  All artifacts are written only after a run fully succeeds,
so a failing run leaves no partial files behind.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .assembly import PlateModel
from .mesh import MeshFormatError, load_mesh, unit_square_mesh
from .solver import solve_condensed
from .spaces import AllBoundaryTriangleError
from .verify import (center_deflection, convergence_study, estimate_infsup,
                     locking_sweep, manufactured_solution, solve_plate)

__all__ = ["main"]

DEFAULTS = {
    "bc": "clamped",
    "multiplier": "dual",
    "E": 1.0,
    "nu": 0.3,
    "t": 0.1,
    "mesh": "n=8",
    "levels": "4,8,16",
    "load": 1.0,
}

CSV_COLUMNS = ["level", "n", "h", "t", "err_rot_h1", "err_disp_broken_h1",
               "err_disp_l2", "err_shear_tl2", "rate_rot", "rate_disp"]


class CliError(Exception):
    """Configuration or run failure reported with a nonzero exit."""


def _read_config_file(path):
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, start=1):
                line = raw.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise CliError(f"{path}:{lineno}: expected 'key = value'")
                key, _, val = line.partition("=")
                key = key.strip()
                if key not in DEFAULTS:
                    raise CliError(f"{path}:{lineno}: unknown key {key!r}")
                values[key] = val.strip()
    except OSError as exc:
        raise CliError(f"cannot read config file: {exc}") from exc
    return values


def _resolve(args, key, cast=str):
    cli_val = getattr(args, key.replace("-", "_"), None)
    if cli_val is not None:
        raw = cli_val
    elif args.config_values and key in args.config_values:
        raw = args.config_values[key]
    else:
        raw = DEFAULTS[key]
    try:
        return cast(raw)
    except (TypeError, ValueError) as exc:
        raise CliError(f"bad value for {key!r}: {raw!r}") from exc


def _parse_bc(s):
    s = str(s).replace("-", "_")
    if s not in ("clamped", "simply_supported"):
        raise ValueError(s)
    return s


def _parse_mesh(spec):
    """'n=8' builds the structured unit-square mesh; anything else is a
    mesh file path."""
    spec = str(spec)
    if spec.startswith("n="):
        try:
            n = int(spec[2:])
        except ValueError:
            raise CliError(f"bad mesh spec {spec!r}: expected n=<int>")
        if n < 1:
            raise CliError("mesh subdivision must be >= 1")
        return unit_square_mesh(n)
    try:
        with open(spec) as fh:
            return load_mesh(fh.read())
    except (OSError, MeshFormatError) as exc:
        raise CliError(f"cannot load mesh {spec!r}: {exc}")


def _parse_floats(s):
    vals = [float(tok) for tok in str(s).split(",") if tok.strip()]
    if not vals:
        raise ValueError(s)
    return vals


def _parse_levels(s):
    """Comma list of subdivisions, or a single count doubling from n=4."""
    toks = [int(tok) for tok in str(s).split(",") if tok.strip()]
    if not toks:
        raise ValueError(s)
    if len(toks) == 1:
        return [4 * 2 ** k for k in range(toks[0])]
    return toks


def _model_from(args, t=None, load=None):
    return PlateModel(
        youngs_modulus=_resolve(args, "E", float),
        poisson_ratio=_resolve(args, "nu", float),
        thickness=t if t is not None else _resolve(args, "t", float),
        transverse_load=load,
    )


def _write_vtk(path, mesh, rotation, displacement, shear):
    """Legacy ASCII VTK: rotation as point data, CR displacement and shear
    evaluated at centroids as cell data."""
    buf = io.StringIO()
    buf.write("# vtk DataFile Version 3.0\n")
    buf.write("plate solution\nASCII\nDATASET UNSTRUCTURED_GRID\n")
    nv, nt = mesh.num_vertices, mesh.num_triangles
    buf.write(f"POINTS {nv} double\n")
    for x, y in mesh.vertices:
        buf.write(f"{x:.16e} {y:.16e} 0.0\n")
    buf.write(f"CELLS {nt} {4 * nt}\n")
    for tri in mesh.triangles:
        buf.write(f"3 {tri[0]} {tri[1]} {tri[2]}\n")
    buf.write(f"CELL_TYPES {nt}\n")
    buf.write("\n".join(["5"] * nt) + "\n")
    buf.write(f"POINT_DATA {nv}\n")
    buf.write("VECTORS rotation double\n")
    for rx, ry in rotation:
        buf.write(f"{rx:.16e} {ry:.16e} 0.0\n")
    buf.write(f"CELL_DATA {nt}\n")
    buf.write("SCALARS displacement double 1\nLOOKUP_TABLE default\n")
    for v in displacement:
        buf.write(f"{v:.16e}\n")
    buf.write("VECTORS shear double\n")
    for sx, sy in shear:
        buf.write(f"{sx:.16e} {sy:.16e} 0.0\n")
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _write_csv(path, records):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow({
            "level": rec["level"], "n": rec["n"],
            "h": repr(float(rec["h"])), "t": repr(float(rec["t"])),
            "err_rot_h1": repr(float(rec["rot_h1"])),
            "err_disp_broken_h1": repr(float(rec["disp_broken_h1"])),
            "err_disp_l2": repr(float(rec["disp_l2"])),
            "err_shear_tl2": repr(float(rec["shear_t_l2"])),
            "rate_rot": repr(float(rec["rate_rot"])),
            "rate_disp": repr(float(rec["rate_disp"])),
        })
    with open(path, "w") as fh:
        fh.write(buf.getvalue())


def _write_json(path, payload):
    text = json.dumps(payload, indent=2, sort_keys=True, default=float) + "\n"
    with open(path, "w") as fh:
        fh.write(text)


def _config_echo(args, **extra):
    echo = {
        "bc": _resolve(args, "bc", _parse_bc),
        "multiplier": _resolve(args, "multiplier"),
        "E": _resolve(args, "E", float),
        "nu": _resolve(args, "nu", float),
    }
    echo.update(extra)
    return echo


def cmd_solve(args):
    mesh = _parse_mesh(_resolve(args, "mesh"))
    bc = _resolve(args, "bc", _parse_bc)
    multiplier = _resolve(args, "multiplier")
    if multiplier not in ("p1", "dual"):
        raise CliError(f"unknown multiplier {multiplier!r}")
    load_val = _resolve(args, "load", float)
    model = _model_from(args, load=lambda p: np.full(p.shape[0], load_val))
    system, solution = solve_plate(mesh, model, bc, multiplier)

    rot = system.dof_rot.full_coefficients(solution.rotation).reshape(-1, 2)
    disp_full = system.dof_disp.full_coefficients(solution.displacement)
    disp_cell = disp_full[mesh.tri_edges].mean(axis=1)
    mult = system.dof_mult.full_coefficients(solution.multiplier)
    shear_cell = mult.reshape(-1, 2)[mesh.triangles].mean(axis=1)

    summary = {
        "config": _config_echo(args, t=model.thickness, load=load_val,
                               mesh=_resolve(args, "mesh")),
        "unknowns": dict(zip(("rotation", "displacement", "multiplier"),
                             system.dims)),
        "solver": solution.metadata,
        "center_deflection": center_deflection(system, solution),
        "max_displacement": float(np.abs(disp_full).max()),
    }
    out = args.output or "solution"
    _write_vtk(out + ".vtk", mesh, rot, disp_cell, shear_cell)
    _write_json(out + ".json", summary)
    print(f"wrote {out}.vtk and {out}.json "
          f"(center deflection {summary['center_deflection']:.6e})")
    return 0


def cmd_converge(args):
    levels = _resolve(args, "levels", _parse_levels)
    if len(levels) < 3:
        raise CliError("converge needs at least 3 levels")
    ts = _resolve(args, "t", _parse_floats)
    bc = _resolve(args, "bc", _parse_bc)
    multiplier = _resolve(args, "multiplier")
    records = convergence_study(
        levels, ts, multiplier=multiplier, bc=bc,
        youngs_modulus=_resolve(args, "E", float),
        poisson_ratio=_resolve(args, "nu", float))
    out = args.output or "convergence"
    _write_csv(out + ".csv", records)
    _write_json(out + ".json", {
        "config": _config_echo(args, levels=levels, t=ts),
        "records": records,
    })
    print(f"wrote {out}.csv and {out}.json ({len(records)} rows)")
    for rec in records:
        if rec["n"] == max(levels):
            print(f"  t={rec['t']:.0e}: rate_rot={rec['rate_rot']:.2f} "
                  f"rate_disp={rec['rate_disp']:.2f}")
    return 0


def cmd_lock(args):
    mesh = _parse_mesh(_resolve(args, "mesh"))
    ts = _resolve(args, "t", _parse_floats)
    if len(ts) == 1:
        rows_arg = ts
    else:
        if any(b >= a for a, b in zip(ts, ts[1:])):
            raise CliError("thickness list must be strictly decreasing")
        rows_arg = ts
    rows = locking_sweep(mesh, rows_arg,
                         multiplier=_resolve(args, "multiplier"),
                         bc=_resolve(args, "bc", _parse_bc),
                         naive=args.naive,
                         youngs_modulus=_resolve(args, "E", float),
                         poisson_ratio=_resolve(args, "nu", float))
    out = args.output or "locking"
    _write_json(out + ".json", {
        "config": _config_echo(args, t=ts, naive=bool(args.naive)),
        "rows": rows,
    })
    print(f"wrote {out}.json")
    for row in rows:
        print(f"  t={row['t']:.3e}  deflection={row['deflection']:.6e}")
    return 0


def cmd_check(args):
    mesh = _parse_mesh(_resolve(args, "mesh"))
    bc = _resolve(args, "bc", _parse_bc)
    multiplier = _resolve(args, "multiplier")
    model = _model_from(args, load=lambda p: np.ones(p.shape[0]))
    verdicts = {}

    # biorthogonality / partition of unity of the multiplier basis
    from . import quadrature
    from .spaces import dual_basis, p1_basis
    pts, wts = quadrature.degree4_rule()
    duv = dual_basis().tabulate(pts)
    p1v = p1_basis().tabulate(pts)
    cross = np.einsum("q,qi,qj->ij", wts, duv, p1v)
    ints = wts @ p1v
    verdicts["biorthogonality"] = float(
        np.abs(cross - np.diag(ints)).max()) < 1e-12
    verdicts["partition_of_unity"] = float(
        np.abs(duv.sum(axis=1) - 1.0).max()) < 1e-12

    # saddle vs condensed agreement (needs the diagonal-Gram multiplier)
    system, sol_saddle = solve_plate(mesh, model, bc, "dual", "saddle")
    sol_cond = solve_condensed(system)
    za = np.concatenate([sol_saddle.rotation, sol_saddle.displacement,
                         sol_saddle.multiplier])
    zb = np.concatenate([sol_cond.rotation, sol_cond.displacement,
                         sol_cond.multiplier])
    rel = np.linalg.norm(za - zb) / max(np.linalg.norm(za), 1e-300)
    verdicts["saddle_condensed_agreement"] = bool(rel < 1e-8)

    # positive definiteness of the symmetrized reduced operator
    from .solver import condense
    import scipy.linalg
    reduced = condense(system)
    sym = reduced.symmetrized().toarray()
    verdicts["reduced_symmetric_pd"] = bool(
        scipy.linalg.eigvalsh(sym).min() > 0.0)

    # inf-sup estimates positive on this mesh
    try:
        b_div = estimate_infsup(mesh, f"divergence-{multiplier}", bc)
        b_mul = estimate_infsup(mesh, f"multiplier-{multiplier}", bc)
        verdicts["infsup_positive"] = bool(b_div > 0 and b_mul > 0)
    except ValueError as exc:
        raise CliError(str(exc))

    report = {
        "config": _config_echo(args, mesh=_resolve(args, "mesh"),
                               t=model.thickness),
        "verdicts": verdicts,
        "saddle_condensed_rel_diff": rel,
        "infsup": {"divergence": b_div, "multiplier_pairing": b_mul},
    }
    if args.output:
        _write_json(args.output + ".json", report)
    ok = all(verdicts.values())
    for name, passed in verdicts.items():
        print(f"  {name}: {'pass' if passed else 'FAIL'}")
    print("all checks passed" if ok else "some checks FAILED")
    return 0 if ok else 1


def cmd_mesh_info(args):
    mesh = _parse_mesh(_resolve(args, "mesh"))
    areas = mesh.triangle_areas()
    coords = mesh.triangle_coords()
    e0 = np.linalg.norm(coords[:, 1] - coords[:, 0], axis=1)
    e1 = np.linalg.norm(coords[:, 2] - coords[:, 1], axis=1)
    e2 = np.linalg.norm(coords[:, 0] - coords[:, 2], axis=1)
    longest = np.maximum(e0, np.maximum(e1, e2))
    # radius-ratio style quality: 4*sqrt(3)*A / (sum of squared edges)
    quality = 4.0 * np.sqrt(3.0) * areas / (e0 ** 2 + e1 ** 2 + e2 ** 2)
    print(f"vertices:  {mesh.num_vertices}")
    print(f"triangles: {mesh.num_triangles}")
    print(f"edges:     {mesh.num_edges} "
          f"({int(mesh.edge_is_boundary.sum())} on the boundary)")
    print(f"mesh size h: {mesh.mesh_size_h:.6e}")
    print(f"area: total={areas.sum():.6e} "
          f"min={areas.min():.3e} max={areas.max():.3e}")
    print(f"quality (1=equilateral): min={quality.min():.3f} "
          f"mean={quality.mean():.3f}")
    print(f"longest edge: {longest.max():.6e}")
    print(f"all-boundary triangle present: "
          f"{mesh.has_all_boundary_triangle()}")
    return 0


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="crplate",
        description="Locking-free mixed finite elements for moderately "
                    "thick plates.")
    parser.add_argument("--config", help="flat key=value config file")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, mesh=True):
        p.add_argument("--bc", help="clamped or simply-supported")
        p.add_argument("--multiplier", help="p1 or dual")
        p.add_argument("--E", help="Young's modulus")
        p.add_argument("--nu", help="Poisson ratio")
        p.add_argument("--output", help="output path stem")
        if mesh:
            p.add_argument("--mesh", help="n=<int> or mesh file path")

    p = sub.add_parser("solve", help="solve one plate under uniform load")
    common(p)
    p.add_argument("--t", help="thickness")
    p.add_argument("--load", help="uniform transverse load value")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("converge", help="manufactured-solution rate study")
    common(p, mesh=False)
    p.add_argument("--levels", help="comma list of subdivisions, or count")
    p.add_argument("--t", help="comma list of thicknesses")
    p.set_defaults(func=cmd_converge)

    p = sub.add_parser("lock", help="thickness sweep of the deflection")
    common(p)
    p.add_argument("--t", help="strictly decreasing thickness list")
    p.add_argument("--naive", action="store_true",
                   help="diagnostic conforming P1-P1 mode (locks)")
    p.set_defaults(func=cmd_lock)

    p = sub.add_parser("check", help="verify method properties on a mesh")
    common(p)
    p.add_argument("--t", help="thickness")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("mesh-info", help="mesh counts and quality stats")
    p.add_argument("--mesh", help="n=<int> or mesh file path")
    p.set_defaults(func=cmd_mesh_info)
    return parser


def main(argv=None):
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        args.config_values = _read_config_file(args.config) if args.config \
            else {}
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except AllBoundaryTriangleError as exc:
        print(f"error: {exc}\nhint: refine the mesh (n >= 2) so every "
              f"boundary vertex can reach an interior vertex within two "
              f"edges", file=sys.stderr)
        return 2
    except (ValueError, MeshFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
