"""Direct solution of the discrete system.

Two paths: the full symmetric indefinite saddle-point system, and (for the
dual multiplier, whose rotation/multiplier Gram matrix is diagonal) a
statically condensed reduced system in (rotation, displacement) with the
multiplier recovered afterwards.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import BlockSystem, PlateModel

__all__ = [
    "Solution", "CondensedSystem", "SingularSystemError",
    "NonDiagonalGramError", "solve_saddle", "condense", "solve_condensed",
    "recover_shear",
]

DENSE_CUTOFF = 2000
# relative Frobenius asymmetry below which the reduced matrix is treated as
# symmetric and averaged with its transpose before factorization
SYMMETRIZE_TOL = 1e-10


class SingularSystemError(RuntimeError):
    """Factorization failed or produced a meaningless solution."""


class NonDiagonalGramError(ValueError):
    """Static condensation requested but the rotation/multiplier Gram matrix
    is not diagonal (P1 multiplier space)."""


@dataclass
class Solution:
    """Coefficient vectors for (rotation, displacement, multiplier)."""

    rotation: np.ndarray
    displacement: np.ndarray
    multiplier: np.ndarray
    metadata: dict = field(default_factory=dict)


def _direct_solve(mat, rhs):
    n = mat.shape[0]
    if rhs.ndim == 1 and not np.any(rhs):
        return np.zeros(n)
    try:
        if n < DENSE_CUTOFF:
            x = scipy.linalg.solve(mat.toarray(), rhs)
        else:
            x = spla.splu(mat.tocsc()).solve(rhs)
    except (RuntimeError, scipy.linalg.LinAlgError, ValueError) as exc:
        raise SingularSystemError(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystemError("factorization produced non-finite values")
    return x


def _check_residual(mat, rhs, x, metadata):
    residual = mat @ x - rhs
    scale = np.linalg.norm(rhs)
    rel = np.linalg.norm(residual) / scale if scale > 0 \
        else np.linalg.norm(residual)
    if not np.isfinite(rel):
        raise SingularSystemError("solve produced non-finite values")
    metadata["residual"] = float(rel)
    return rel


def solve_saddle(system: BlockSystem, model: PlateModel | None = None) -> Solution:
    """Solve the full symmetric indefinite system by direct factorization."""
    model = model or system.model
    nr, nd, nm = system.dims
    mat = system.saddle_matrix()
    rhs = system.saddle_rhs()
    x = _direct_solve(mat, rhs)
    meta = {"path": "saddle", "dims": system.dims, "unknowns": mat.shape[0]}
    _check_residual(mat, rhs, x, meta)
    return Solution(x[:nr], x[nr:nr + nd], x[nr + nd:], meta)


@dataclass
class CondensedSystem:
    """Reduced system in (rotation, displacement) after eliminating the
    multiplier through the rotation-test equations:

        zeta = D^{-1} (rhs_rot - A phi + G u)

    ``matrix`` keeps the naturally derived reduced operator; ``asymmetry``
    is its relative Frobenius departure from symmetry.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    diag: np.ndarray            # diagonal of the Gram matrix D
    system: BlockSystem
    asymmetry: float

    def symmetrized(self):
        return 0.5 * (self.matrix + self.matrix.T)

    def recover_multiplier(self, rotation, displacement):
        resid = self.system.rhs_rot - self.system.A @ rotation \
            + self.system.G @ displacement
        return resid / self.diag


def _gram_diagonal(system):
    D = system.D_c
    if D.shape[0] != D.shape[1]:
        raise NonDiagonalGramError("rotation/multiplier Gram is not square")
    d = D.diagonal()
    off = D - sp.diags(d)
    scale = np.abs(d).max() if d.size else 1.0
    if off.nnz and np.abs(off.data).max() > 1e-10 * scale:
        raise NonDiagonalGramError(
            "rotation/multiplier Gram matrix is not diagonal; static "
            "condensation needs the dual multiplier space")
    if d.size and np.abs(d).min() <= 0.0:
        raise NonDiagonalGramError("Gram matrix has a zero diagonal entry")
    return d


def condense(system: BlockSystem) -> CondensedSystem:
    """Statically condense the multiplier out of the saddle-point system.

    The remaining multiplier-test and displacement-test equations become a
    square reduced system in (rotation, displacement).
    """
    if system.multiplier != "dual":
        raise NonDiagonalGramError(
            "static condensation requires the dual multiplier space")
    d = _gram_diagonal(system)
    Dinv = sp.diags(1.0 / d)
    A = system.A
    G = system.G
    eps = system.model.penalty_coefficient

    MmDinv = (system.M_m @ Dinv).tocsr()

    # multiplier-test rows paired with the rotation unknowns
    R11 = sp.diags(d) + eps * (MmDinv @ A)
    R12 = -system.E_c.T - eps * (MmDinv @ G)
    # displacement-test rows paired with the displacement unknowns
    R21 = -G.T + system.E_c @ (Dinv @ A)
    R22 = system.H - system.E_c @ (Dinv @ G)
    R = sp.bmat([[R11, R12], [R21, R22]], format="csr")

    r1 = eps * (MmDinv @ system.rhs_rot)
    r2 = system.rhs_disp + system.E_c @ (Dinv @ system.rhs_rot)
    rhs = np.concatenate([r1, r2])

    norm = spla.norm(R)
    asym = spla.norm(R - R.T) / norm if norm > 0 else 0.0
    return CondensedSystem(R, rhs, d, system, float(asym))


def solve_condensed(system: BlockSystem, model: PlateModel | None = None) -> Solution:
    """Solve via static condensation and recover the multiplier.

    When the reduced operator is symmetric to within SYMMETRIZE_TOL it is
    averaged with its transpose before factorization; otherwise it is
    factored as-is (LU), which still reproduces the saddle-point solution.
    """
    reduced = condense(system)
    nr, nd, _ = system.dims
    mat = reduced.matrix
    if reduced.asymmetry <= SYMMETRIZE_TOL:
        mat = reduced.symmetrized().tocsr()
    x = _direct_solve(mat, reduced.rhs)
    rotation, displacement = x[:nr], x[nr:]
    multiplier = reduced.recover_multiplier(rotation, displacement)
    meta = {"path": "condensed", "dims": system.dims,
            "unknowns": mat.shape[0], "asymmetry": reduced.asymmetry}
    full = np.concatenate([rotation, displacement, multiplier])
    rel = _check_residual(system.saddle_matrix(), system.saddle_rhs(), full,
                          meta)
    if rel > 1e-6:
        raise SingularSystemError(
            f"condensed solve failed to satisfy the full system "
            f"(relative residual {rel:.2e})")
    return Solution(rotation, displacement, multiplier, meta)


def recover_shear(solution: Solution, system: BlockSystem,
                  model: PlateModel | None = None) -> np.ndarray:
    """Multiplier coefficients from (rotation, displacement).

    For a saddle-path solution this reproduces the solved multiplier; for
    the condensed path it is the recovery map itself.
    """
    if system.multiplier != "dual":
        return solution.multiplier.copy()
    d = _gram_diagonal(system)
    resid = system.rhs_rot - system.A @ solution.rotation \
        + system.G @ solution.displacement
    return resid / d
