import numpy as np
import pytest
import scipy.sparse as sparse

from surfhelm.errors import SingularSystem
from surfhelm.fem import ComplexSparseSystem, StabilizationParams, assemble_system
from surfhelm.solver import RESIDUAL_TOL, solve


def system_from_dense(a, b):
    a = np.asarray(a, dtype=complex)
    return ComplexSparseSystem(n=len(b), matrix=sparse.csr_matrix(a),
                               rhs=np.asarray(b, dtype=complex))


class TestSolve:
    def test_identity(self):
        b = np.array([1.0, 2.0, -3.0])
        res = solve(system_from_dense(np.eye(3), b))
        np.testing.assert_allclose(res.solution, b)
        assert res.relative_residual <= RESIDUAL_TOL

    def test_closed_form_complex_2x2(self):
        # [[2, i], [i, 1]] x = (1, 0): det = 3, x = (1/3, -i/3)
        a = [[2.0, 1j], [1j, 1.0]]
        res = solve(system_from_dense(a, [1.0, 0.0]))
        np.testing.assert_allclose(res.solution, [1 / 3, -1j / 3], atol=1e-14)

    def test_zero_rhs(self):
        res = solve(system_from_dense(np.eye(4), np.zeros(4)))
        np.testing.assert_array_equal(res.solution, np.zeros(4))
        assert res.relative_residual == 0.0

    def test_singular_matrix(self):
        a = [[1.0, 1.0], [1.0, 1.0]]
        with pytest.raises(SingularSystem):
            solve(system_from_dense(a, [1.0, 0.0]))

    def test_empty_system(self):
        with pytest.raises(ValueError):
            solve(ComplexSparseSystem(n=0, matrix=sparse.csr_matrix((0, 0)),
                                      rhs=np.zeros(0)))

    def test_fill_reported(self):
        a = np.diag(np.arange(1.0, 6.0))
        res = solve(system_from_dense(a, np.ones(5)))
        assert res.fill_nnz >= 5

    def test_deterministic_on_assembled_system(self):
        from surfhelm.cut import extract_surface_cells
        from surfhelm.geometry import Sphere
        from surfhelm.mesh import (build_background_mesh,
                                   extract_active_mesh, interpolate_level_set)
        m = build_background_mesh(((-1.5,) * 3, (1.5,) * 3), 8)
        act = extract_active_mesh(
            interpolate_level_set(m, Sphere(radius=0.5, delta=10.0)))
        cells = extract_surface_cells(act)
        p = StabilizationParams.default(2.0)
        sys = assemble_system(act, cells, p, lambda pts: np.ones(len(pts)))
        x1 = solve(sys).solution
        x2 = solve(sys).solution
        assert np.array_equal(x1, x2)
        assert solve(sys).relative_residual <= RESIDUAL_TOL
