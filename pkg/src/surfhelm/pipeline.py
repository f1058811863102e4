"""End-to-end driver: mesh -> cut -> assemble -> solve -> errors.

A GeometryCase bundles everything that depends only on the surface and the
mesh resolution; sweeping over wave numbers then only recombines matrices,
rescales the load, and re-solves.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import cut, fem, mesh, mms, solver
from .geometry import AmbientScalarField, PolyIsoline, surface_from_json

DEFAULT_BOX = ((-1.5, -1.5, -1.5), (1.5, 1.5, 1.5))
POLY_BOX = ((-2.6, -2.6, -2.6), (2.6, 2.6, 2.6))


def default_box(surface):
    return POLY_BOX if isinstance(surface, PolyIsoline) else DEFAULT_BOX


@dataclass
class GeometryCase:
    surface: object
    u: AmbientScalarField
    n: int
    h: float
    active: object
    cells: list
    stiffness: object
    mass: object
    jump: object
    load_lap: np.ndarray   # integrals of (-lap_surface u)^e against the basis
    load_u: np.ndarray     # integrals of u^e against the basis
    flap_at_q: np.ndarray  # (-lap_surface u) at the degree-4 points
    u_at_q: np.ndarray     # u at the degree-4 points
    weights_q: np.ndarray
    err_eval: mms.ErrorEvaluator

    @property
    def num_dofs(self):
        return self.active.num_dofs


@dataclass
class RunResult:
    k2: float
    h: float
    ndof: int
    residual: float
    err_l2: float
    err_h1t: float
    err_energy: float
    norm_uh: float         # discrete L2 norm via the surface mass matrix
    norm_f: float          # L2 norm of the extended forcing on Sigma_h
    stability_rhs: float   # Im(gamma_s)^-1 ((hk)^-2 + 1) * norm_f, inf if unstabilized
    solution: np.ndarray


def build_geometry_case(surface, n, box=None, u_expr=mms.FABRICATED_SOLUTION):
    """Build mesh, cut geometry, and all wave-number-independent data."""
    if box is None:
        box = default_box(surface)
    bg = mesh.build_background_mesh(box, n)
    levelset = mesh.interpolate_level_set(bg, surface)
    active = mesh.extract_active_mesh(levelset)
    cells = cut.extract_surface_cells(active)

    u = AmbientScalarField(u_expr)
    stiffness = fem.assemble_stiffness(active, cells)
    mass = fem.assemble_surface_mass(active, cells)
    jump = fem.assemble_jump(active)

    pts, w, owner = fem.surface_quadrature(active, cells, degree=4)
    proj = surface._project_checked(pts)
    flap = -mms.surface_laplacian(u, surface, proj)
    uvals = u.value(proj)
    v0, ainv, _, dofs = fem.tet_transforms(active)
    phi = fem.basis_at_points(pts, owner, v0, ainv)
    load_lap = np.zeros(active.num_dofs)
    load_u = np.zeros(active.num_dofs)
    np.add.at(load_lap, dofs[owner].ravel(), ((w * flap)[:, None] * phi).ravel())
    np.add.at(load_u, dofs[owner].ravel(), ((w * uvals)[:, None] * phi).ravel())

    err_eval = mms.ErrorEvaluator(u, surface, active, cells)
    return GeometryCase(surface=surface, u=u, n=n, h=bg.h, active=active,
                        cells=cells, stiffness=stiffness, mass=mass,
                        jump=jump, load_lap=load_lap, load_u=load_u,
                        flap_at_q=flap, u_at_q=uvals, weights_q=w,
                        err_eval=err_eval)


def solve_case(case, params, variant="literal"):
    """Solve one wave number on a prepared geometry case."""
    k2 = params.k2
    load = (case.load_lap - k2 * case.load_u).astype(complex)
    system = fem.combine_system(case.stiffness, case.mass, case.jump, load,
                                params, case.h, variant=variant)
    result = solver.solve(system)
    x = result.solution
    err_l2, err_h1t, err_energy = case.err_eval(x, k2)

    norm_uh = float(np.sqrt(max(np.real(np.conj(x) @ (case.mass @ x)), 0.0)))
    f_at_q = case.flap_at_q - k2 * case.u_at_q
    norm_f = float(np.sqrt(np.sum(case.weights_q * f_at_q**2)))
    if params.gamma_s.imag > 0:
        hk2 = case.h**2 * k2
        stability_rhs = (1.0 / params.gamma_s.imag) * (1.0 / hk2 + 1.0) * norm_f
    else:
        stability_rhs = float("inf")
    return RunResult(k2=k2, h=case.h, ndof=case.num_dofs,
                     residual=result.relative_residual, err_l2=err_l2,
                     err_h1t=err_h1t, err_energy=err_energy,
                     norm_uh=norm_uh, norm_f=norm_f,
                     stability_rhs=stability_rhs, solution=x)


def convergence_sweep(surface, refinements, k2_values, gamma_s_im=1.0,
                      gamma_j_im=1e-3, box=None, variant="literal",
                      collect=None):
    """ConvergenceRecords per wave number over a list of mesh resolutions.

    `collect`, if given, receives every RunResult (used for the discrete
    stability-bound audit)."""
    records = {k2: mms.ConvergenceRecord(k2=k2) for k2 in k2_values}
    for n in refinements:
        case = build_geometry_case(surface, n, box=box)
        for k2 in k2_values:
            params = fem.StabilizationParams.default(
                np.sqrt(k2), gamma_s_im, gamma_j_im)
            res = solve_case(case, params, variant=variant)
            records[k2].add(case.h, case.num_dofs, res.err_l2, res.err_h1t,
                            res.err_energy)
            if collect is not None:
                collect(res)
    return records
