"""Structured tetrahedral background mesh and active-mesh extraction.

The bounding box is divided into n^3 cubes, each split into 6 tetrahedra
(Kuhn subdivision), which is conforming across cube faces and shape
regular.  The active mesh is the set of tetrahedra whose nodal level-set
values change sign, together with the internal faces shared by two active
tetrahedra.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyActiveSet, InvalidBox

#: vertex-insertion orders of the 6 Kuhn tetrahedra of the unit cube.
#: Each row lists the axes added in turn on the path (0,0,0) -> (1,1,1).
_KUHN_PERMS = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]

_EPS_SHIFT = 1e-10


@dataclass
class BackgroundMesh:
    box_min: np.ndarray
    box_max: np.ndarray
    n: int
    vertices: np.ndarray      # (V, 3)
    tets: np.ndarray          # (T, 4) vertex ids, positively oriented
    h: float                  # max tetrahedron diameter

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_tets(self):
        return len(self.tets)


def _perm_sign(perm):
    s = 1
    p = list(perm)
    for i in range(len(p)):
        while p[i] != i:
            j = p[i]
            p[i], p[j] = p[j], p[i]
            s = -s
    return s


def build_background_mesh(box, n):
    """Mesh the box with n cells per axis, 6 Kuhn tetrahedra per cell."""
    box_min = np.asarray(box[0], dtype=float)
    box_max = np.asarray(box[1], dtype=float)
    if n < 1:
        raise InvalidBox(f"need at least 1 cell per axis, got {n}")
    if np.any(box_max - box_min <= 0):
        raise InvalidBox(f"box has non-positive extent: {box_min} .. {box_max}")

    axes = [np.linspace(box_min[d], box_max[d], n + 1) for d in range(3)]
    gx, gy, gz = np.meshgrid(*axes, indexing="ij")
    vertices = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    def vid(i, j, k):
        return (i * (n + 1) + j) * (n + 1) + k

    ii, jj, kk = np.meshgrid(np.arange(n), np.arange(n), np.arange(n),
                             indexing="ij")
    base = np.stack([ii.ravel(), jj.ravel(), kk.ravel()], axis=1)  # (n^3, 3)

    tets = np.empty((6 * len(base), 4), dtype=np.int64)
    for t, perm in enumerate(_KUHN_PERMS):
        corners = np.zeros((4, 3), dtype=np.int64)
        for step, axis in enumerate(perm):
            corners[step + 1] = corners[step]
            corners[step + 1, axis] += 1
        if _perm_sign(perm) < 0:
            corners[[2, 3]] = corners[[3, 2]]
        ids = np.stack(
            [vid(base[:, 0] + c[0], base[:, 1] + c[1], base[:, 2] + c[2])
             for c in corners], axis=1)
        tets[t::6] = ids

    cell = (box_max - box_min) / n
    h = float(np.linalg.norm(cell))  # each Kuhn tet contains the cube diagonal
    return BackgroundMesh(box_min, box_max, n, vertices, tets, h)


def tet_volumes(mesh):
    v = mesh.vertices[mesh.tets]
    e = v[:, 1:] - v[:, :1]
    return np.linalg.det(e) / 6.0


@dataclass
class NodalLevelSet:
    mesh: BackgroundMesh
    values: np.ndarray  # (V,), epsilon-shifted away from zero


def interpolate_level_set(mesh, surface):
    """Nodal interpolant of the surface's level-set function.

    Values with |v| < eps*h are pushed to sign-preserving eps*h (zero
    treated as positive) so that no cut passes exactly through a vertex.
    """
    vals = surface.value(mesh.vertices).astype(float)
    eps = _EPS_SHIFT * mesh.h
    small = np.abs(vals) < eps
    vals[small] = np.where(vals[small] >= 0, eps, -eps)
    return NodalLevelSet(mesh, vals)


@dataclass
class ActiveMesh:
    mesh: BackgroundMesh
    levelset: NodalLevelSet
    tet_ids: np.ndarray        # (A,) background tet ids, sorted
    vertex_ids: np.ndarray     # (D,) background vertex ids, sorted
    dof_of_vertex: dict        # background vertex id -> dense dof index
    face_vertices: np.ndarray  # (F, 3) background vertex ids
    face_areas: np.ndarray     # (F,)
    face_normals: np.ndarray   # (F, 3) fixed unit normal n_F
    face_tets: np.ndarray      # (F, 2) background tet ids, lower id first

    @property
    def num_dofs(self):
        return len(self.vertex_ids)

    def dofs_of_tet(self, tet_id):
        return np.array([self.dof_of_vertex[v] for v in self.mesh.tets[tet_id]])


def extract_active_mesh(levelset):
    """Active tetrahedra (mixed-sign nodal values) and internal faces."""
    mesh = levelset.mesh
    tet_vals = levelset.values[mesh.tets]
    active = (tet_vals.min(axis=1) < 0) & (tet_vals.max(axis=1) > 0)
    tet_ids = np.flatnonzero(active)
    if len(tet_ids) == 0:
        raise EmptyActiveSet("no tetrahedron is cut by the discrete surface")

    vertex_ids = np.unique(mesh.tets[tet_ids])
    dof_of_vertex = {int(v): i for i, v in enumerate(vertex_ids)}

    # faces shared by exactly two active tets
    local_faces = [(0, 1, 2), (0, 1, 3), (0, 2, 3), (1, 2, 3)]
    tris = np.sort(mesh.tets[tet_ids][:, local_faces], axis=2)  # (A, 4, 3)
    tris_flat = tris.reshape(-1, 3)
    owner = np.repeat(tet_ids, 4)
    order = np.lexsort(tris_flat.T[::-1])
    tris_sorted = tris_flat[order]
    owner_sorted = owner[order]
    dup = np.all(tris_sorted[1:] == tris_sorted[:-1], axis=1)
    first = np.flatnonzero(dup)
    face_vertices = tris_sorted[first]
    t0 = np.minimum(owner_sorted[first], owner_sorted[first + 1])
    t1 = np.maximum(owner_sorted[first], owner_sorted[first + 1])
    face_tets = np.stack([t0, t1], axis=1)

    # geometry and orientation: n_F points from the lower-id tet into the
    # higher-id tet (away from the lower tet's off-face vertex)
    p = mesh.vertices[face_vertices]  # (F, 3, 3)
    cross = np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
    areas = 0.5 * np.linalg.norm(cross, axis=1)
    normals = cross / (2.0 * areas)[:, None]
    if len(face_vertices):
        lower_verts = mesh.tets[t0]  # (F, 4)
        in_face = (lower_verts[:, :, None] == face_vertices[:, None, :]).any(axis=2)
        opp = lower_verts[~in_face].reshape(-1)
        to_opp = mesh.vertices[opp] - p[:, 0]
        flip = np.einsum("fi,fi->f", normals, to_opp) > 0
        normals[flip] *= -1.0

    return ActiveMesh(mesh, levelset, tet_ids, vertex_ids, dof_of_vertex,
                      face_vertices, areas, normals, face_tets)


def dump_mesh(mesh, path):
    """Plain-text dump: 'v x y z' per vertex, 't i0 i1 i2 i3' per tet."""
    with open(path, "w") as fh:
        for p in mesh.vertices:
            fh.write(f"v {p[0]:.17g} {p[1]:.17g} {p[2]:.17g}\n")
        for t in mesh.tets:
            fh.write(f"t {t[0]} {t[1]} {t[2]} {t[3]}\n")
