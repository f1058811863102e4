"""Assembly of the stabilized system over the active mesh.

All bilinear forms are integrated on the piecewise planar discrete surface.
The P1 reduction is built in: the Galerkin least-squares term degenerates
to a weighted surface mass matrix, and its consistency correction scales
the load vector by (1 - gamma_s h^2 k^2).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sparse

from .cut import triangle_rule


@dataclass
class StabilizationParams:
    """Complex stabilization weights and the wave number."""

    gamma_s: complex
    gamma_j: complex
    k: float

    def __post_init__(self):
        self.gamma_s = complex(self.gamma_s)
        self.gamma_j = complex(self.gamma_j)
        self.k = float(self.k)
        if self.k < 0:
            raise ValueError(f"wave number must be nonnegative, got {self.k}")
        stabilized = self.gamma_s != 0 or self.gamma_j != 0
        if stabilized and not (self.gamma_s.imag > 0 and self.gamma_j.imag > 0):
            raise ValueError(
                "stabilization weights need positive imaginary parts "
                "(or both exactly zero for the unstabilized comparison)")

    @classmethod
    def default(cls, k, gamma_s_im=1.0, gamma_j_im=1e-3):
        return cls(gamma_s=1j * gamma_s_im, gamma_j=1j * gamma_j_im, k=k)

    @classmethod
    def unstabilized(cls, k):
        return cls(gamma_s=0.0, gamma_j=0.0, k=k)

    @property
    def k2(self):
        return self.k**2

    @property
    def is_stabilized(self):
        return self.gamma_s != 0 or self.gamma_j != 0


@dataclass
class ComplexSparseSystem:
    """Complex symmetric sparse matrix with its right-hand side."""

    n: int
    matrix: sparse.csr_matrix
    rhs: np.ndarray


def tet_transforms(active):
    """Per-active-tet affine data.

    Returns (v0, ainv, grads, dofs):
      v0    (A, 3)    first vertex of each tet,
      ainv  (A, 3, 3) maps x - v0 to barycentric (l1, l2, l3),
      grads (A, 4, 3) gradients of the 4 nodal basis functions,
      dofs  (A, 4)    dense dof indices of the tet vertices.
    """
    mesh = active.mesh
    tets = mesh.tets[active.tet_ids]
    verts = mesh.vertices[tets]  # (A, 4, 3)
    v0 = verts[:, 0]
    edges = np.transpose(verts[:, 1:] - verts[:, :1], (0, 2, 1))  # columns
    ainv = np.linalg.inv(edges)
    grads = np.empty((len(tets), 4, 3))
    grads[:, 1:] = ainv
    grads[:, 0] = -ainv.sum(axis=1)
    dofs = np.searchsorted(active.vertex_ids, tets)
    return v0, ainv, grads, dofs


def _stack_triangles(cells):
    """Flatten cells into triangle arrays with owner indices into `cells`."""
    tris, owners = [], []
    for i, cell in enumerate(cells):
        tris.append(cell.triangles)
        owners.append(np.full(len(cell.triangles), i))
    tri = np.concatenate(tris)
    owner = np.concatenate(owners)
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
    area = 0.5 * np.linalg.norm(cross, axis=1)
    return tri, owner, area


def _scatter(local, dofs, n):
    """Accumulate (E, 4, 4) local blocks into an n-by-n CSR matrix."""
    rows = np.repeat(dofs, 4, axis=1).ravel()
    cols = np.tile(dofs, (1, 4)).ravel()
    mat = sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n))
    return mat.tocsr()


def basis_at_points(points, owner, v0, ainv):
    """Nodal basis values of each point's owner tet; returns (N, 4)."""
    lam = np.einsum("nij,nj->ni", ainv[owner], points - v0[owner])
    phi = np.empty((len(points), 4))
    phi[:, 0] = 1.0 - lam.sum(axis=1)
    phi[:, 1:] = lam
    return phi


def surface_quadrature(active, cells, degree):
    """Quadrature over the whole discrete surface.

    Returns (points (Q, 3), weights (Q,), owner (Q,)) with owner indexing
    the active-tet order of `cells`; weights sum to the total surface area.
    """
    bary, w = triangle_rule(degree)
    tri, owner, area = _stack_triangles(cells)
    pts = np.einsum("qk,tkd->tqd", bary, tri)          # (T, Q, 3)
    weights = area[:, None] * w[None, :]               # (T, Q)
    nq = len(w)
    return (pts.reshape(-1, 3), weights.reshape(-1),
            np.repeat(owner, nq))


def assemble_stiffness(active, cells):
    """Tangential stiffness: integrals of projected gradients.

    Gradients are constant per tet and the projector constant per cell, so
    the integration is exact.
    """
    _, _, grads, dofs = tet_transforms(active)
    normals = np.array([c.normal for c in cells])
    areas = np.array([c.area for c in cells])
    pg = grads - np.einsum("ai,aki->ak", normals, grads)[:, :, None] * normals[:, None, :]
    local = areas[:, None, None] * np.einsum("akd,ald->akl", pg, pg)
    return _scatter(local, dofs, active.num_dofs)


def assemble_surface_mass(active, cells):
    """Surface mass matrix, degree-2 quadrature (exact for P1 products)."""
    v0, ainv, _, dofs = tet_transforms(active)
    pts, w, owner = surface_quadrature(active, cells, degree=2)
    phi = basis_at_points(pts, owner, v0, ainv)
    rows = np.repeat(dofs[owner], 4, axis=1).ravel()
    cols = np.tile(dofs[owner], (1, 4)).ravel()
    vals = (w[:, None, None] * phi[:, :, None] * phi[:, None, :]).ravel()
    n = active.num_dofs
    return sparse.coo_matrix((vals, (rows, cols)), shape=(n, n)).tocsr()


def assemble_jump(active):
    """Gradient-jump penalty over internal faces of the active mesh.

    The jump of a P1 gradient is constant per face, so each face contributes
    |F| * d d^T with d the normal-gradient jumps of the incident basis
    functions.
    """
    n = active.num_dofs
    if len(active.face_vertices) == 0:
        return sparse.csr_matrix((n, n))
    _, _, grads, _ = tet_transforms(active)
    pos = {int(t): i for i, t in enumerate(active.tet_ids)}
    lo = np.array([pos[int(t)] for t in active.face_tets[:, 0]])
    hi = np.array([pos[int(t)] for t in active.face_tets[:, 1]])
    nf = active.face_normals
    # n_F points from the lower- into the higher-id tet, so the higher tet
    # is the + side of the jump
    d_hi = np.einsum("fi,fki->fk", nf, grads[hi])
    d_lo = -np.einsum("fi,fki->fk", nf, grads[lo])
    d = np.concatenate([d_hi, d_lo], axis=1)  # (F, 8)
    dofs_hi = np.searchsorted(active.vertex_ids,
                              active.mesh.tets[active.face_tets[:, 1]])
    dofs_lo = np.searchsorted(active.vertex_ids,
                              active.mesh.tets[active.face_tets[:, 0]])
    slots = np.concatenate([dofs_hi, dofs_lo], axis=1)  # (F, 8)
    local = active.face_areas[:, None, None] * d[:, :, None] * d[:, None, :]
    rows = np.repeat(slots, 8, axis=1).ravel()
    cols = np.tile(slots, (1, 8)).ravel()
    return sparse.coo_matrix((local.ravel(), (rows, cols)), shape=(n, n)).tocsr()


def assemble_load(active, cells, values_fn, degree=4):
    """Load vector entries: surface integrals of values_fn times each basis
    function.  `values_fn` maps quadrature points (Q, 3) to (complex) values.
    """
    v0, ainv, _, dofs = tet_transforms(active)
    pts, w, owner = surface_quadrature(active, cells, degree)
    fvals = np.asarray(values_fn(pts))
    phi = basis_at_points(pts, owner, v0, ainv)
    contrib = (w * fvals)[:, None] * phi  # (Q, 4)
    b = np.zeros(active.num_dofs, dtype=contrib.dtype)
    np.add.at(b, dofs[owner].ravel(), contrib.ravel())
    return b


def combine_system(stiffness, mass, jump, load, params, h,
                   variant="literal"):
    """Form the stabilized matrix and scaled right-hand side.

    variant="literal" (default) uses the mass coefficient
    k^2 (1 - gamma_s h^2), whose h^2 k^2 damping keeps the rate independent
    of the wave number on coarse meshes; variant="definition" uses
    k^2 (1 - gamma_s h^2 k^2), the h^2 k^4 weighting implied by squaring
    the full strong residual.
    """
    k2 = params.k2
    if variant == "definition":
        mass_coeff = k2 * (1.0 - params.gamma_s * h**2 * k2)
    elif variant == "literal":
        mass_coeff = k2 * (1.0 - params.gamma_s * h**2)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    matrix = (stiffness.astype(complex) - mass_coeff * mass
              + params.gamma_j * jump).tocsr()
    rhs = (1.0 - params.gamma_s * h**2 * k2) * load.astype(complex)
    return ComplexSparseSystem(n=matrix.shape[0], matrix=matrix, rhs=rhs)


def assemble_system(active, cells, params, forcing_extended,
                    variant="literal"):
    """Assemble the full stabilized system.

    `forcing_extended` maps ambient quadrature points on the discrete
    surface to the closest-point extension of the forcing.
    """
    stiffness = assemble_stiffness(active, cells)
    mass = assemble_surface_mass(active, cells)
    jump = assemble_jump(active)
    load = assemble_load(active, cells, forcing_extended, degree=4)
    return combine_system(stiffness, mass, jump, load, params,
                          active.mesh.h, variant=variant)


def dump_system(system, path):
    """Plain-text triplet dump: 'row col re im' per nonzero, then 'b i re im'
    per right-hand-side entry."""
    coo = system.matrix.tocoo()
    with open(path, "w") as fh:
        for r, c, v in zip(coo.row, coo.col, coo.data):
            fh.write(f"{r} {c} {v.real:.17g} {v.imag:.17g}\n")
        for i, v in enumerate(system.rhs):
            fh.write(f"b {i} {v.real:.17g} {v.imag:.17g}\n")
