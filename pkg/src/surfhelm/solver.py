"""Direct sparse solution of the assembled complex systems."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse.linalg as spla

from .errors import ResidualNotMet, SingularSystem

RESIDUAL_TOL = 1e-8


@dataclass
class SolveResult:
    solution: np.ndarray
    relative_residual: float
    fill_nnz: int  # nonzeros of the L and U factors


def solve(system):
    """Solve with a sparse complex LU factorization.

    Raises SingularSystem on factorization breakdown (typically a missing
    stabilization at a resonant wave number) and ResidualNotMet if the
    relative residual exceeds the 1e-8 contract.
    """
    a = system.matrix.tocsc()
    b = np.asarray(system.rhs, dtype=complex)
    if system.n < 1:
        raise ValueError("empty system")
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return SolveResult(np.zeros(system.n, dtype=complex), 0.0, 0)
    try:
        lu = spla.splu(a)
        x = lu.solve(b)
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc
    if not np.all(np.isfinite(x)):
        raise SingularSystem("factorization produced non-finite values")
    residual = np.linalg.norm(a @ x - b) / bnorm
    if residual > RESIDUAL_TOL:
        raise ResidualNotMet(
            f"relative residual {residual:.3e} exceeds {RESIDUAL_TOL}")
    fill = int(lu.L.nnz + lu.U.nnz)
    return SolveResult(x, float(residual), fill)
