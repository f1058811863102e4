"""Per-tetrahedron zero-set extraction and surface quadrature.

The discrete surface inside a cut tetrahedron is the zero plane of the
linear nodal interpolant: one triangle for 1-vs-3 sign patterns, a planar
quadrilateral (split into two triangles) for 2-vs-2 patterns.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NoCut, UnsupportedDegree


@dataclass
class SurfaceCell:
    tet_id: int
    triangles: np.ndarray  # (1 or 2, 3, 3) vertex coordinates
    normal: np.ndarray     # (3,) unit normal, toward increasing level set
    area: float

    @property
    def triangle_areas(self):
        a = self.triangles
        cross = np.cross(a[:, 1] - a[:, 0], a[:, 2] - a[:, 0])
        return 0.5 * np.linalg.norm(cross, axis=1)


def _p1_gradient(verts, vals):
    """Constant gradient of the linear interpolant on a tetrahedron."""
    e = verts[1:] - verts[0]
    dv = vals[1:] - vals[0]
    return np.linalg.solve(e, dv)


def intersect_tet(verts, vals, tet_id=-1):
    """Intersect one tetrahedron with the zero set of its linear interpolant.

    `verts` is (4, 3), `vals` the 4 nodal values (mixed sign, none zero).
    """
    verts = np.asarray(verts, dtype=float)
    vals = np.asarray(vals, dtype=float)
    neg = np.flatnonzero(vals < 0)
    pos = np.flatnonzero(vals > 0)
    if len(neg) == 0 or len(pos) == 0:
        raise NoCut(f"values do not change sign: {vals}")

    def crossing(i, j):
        t = vals[i] / (vals[i] - vals[j])
        return verts[i] + t * (verts[j] - verts[i])

    if len(neg) == 1 or len(pos) == 1:
        lone, others = ((neg[0], pos) if len(neg) == 1 else (pos[0], neg))
        tri = np.array([crossing(lone, j) for j in others])
        triangles = tri[None]
    else:
        a0, a1 = neg
        b0, b1 = pos
        quad = np.array([crossing(a0, b0), crossing(a0, b1),
                         crossing(a1, b1), crossing(a1, b0)])
        d02 = np.linalg.norm(quad[0] - quad[2])
        d13 = np.linalg.norm(quad[1] - quad[3])
        if d02 <= d13:
            triangles = np.array([quad[[0, 1, 2]], quad[[0, 2, 3]]])
        else:
            triangles = np.array([quad[[1, 2, 3]], quad[[1, 3, 0]]])

    g = _p1_gradient(verts, vals)
    normal = g / np.linalg.norm(g)
    cross = np.cross(triangles[:, 1] - triangles[:, 0],
                     triangles[:, 2] - triangles[:, 0])
    area = float(0.5 * np.linalg.norm(cross, axis=1).sum())
    return SurfaceCell(tet_id=tet_id, triangles=triangles, normal=normal,
                       area=area)


def extract_surface_cells(active):
    """SurfaceCells for every active tetrahedron, in tet-id order."""
    mesh = active.mesh
    vals = active.levelset.values
    cells = []
    for tid in active.tet_ids:
        vidx = mesh.tets[tid]
        cells.append(intersect_tet(mesh.vertices[vidx], vals[vidx],
                                   tet_id=int(tid)))
    return cells


def surface_area(cells):
    return float(sum(c.area for c in cells))


#: symmetric Gauss rules on the reference triangle, barycentric coordinates
#: and weights summing to one.
_A1, _W1 = 0.445948490915965, 0.223381589678011
_A2, _W2 = 0.091576213509771, 0.109951743655322
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (np.array([[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]),
        np.full(3, 1 / 3)),
    4: (np.array([[1 - 2 * _A1, _A1, _A1], [_A1, 1 - 2 * _A1, _A1],
                  [_A1, _A1, 1 - 2 * _A1],
                  [1 - 2 * _A2, _A2, _A2], [_A2, 1 - 2 * _A2, _A2],
                  [_A2, _A2, 1 - 2 * _A2]]),
        np.array([_W1, _W1, _W1, _W2, _W2, _W2])),
}


def triangle_rule(degree):
    """Barycentric points and unit-sum weights, exact to `degree`."""
    try:
        return _TRI_RULES[degree]
    except KeyError:
        raise UnsupportedDegree(f"no rule of degree {degree}; "
                                f"choose from {sorted(_TRI_RULES)}") from None


def quadrature_on_cell(cell, degree):
    """Mapped quadrature over all triangles of a cell.

    Returns (points (Q, 3), weights (Q,)); weights sum to the cell area.
    """
    bary, w = triangle_rule(degree)
    pts = np.einsum("qk,tkd->tqd", bary, cell.triangles).reshape(-1, 3)
    weights = (w[None, :] * cell.triangle_areas[:, None]).reshape(-1)
    return pts, weights


def quadrature_on_cells(cells, degree):
    """Concatenated rule over many cells.

    Returns (points (Q, 3), weights (Q,), cell_index (Q,)) with cell_index
    mapping each point back to its position in `cells`.
    """
    bary, w = triangle_rule(degree)
    nq = len(w)
    all_pts, all_w, all_idx = [], [], []
    for i, cell in enumerate(cells):
        pts = np.einsum("qk,tkd->tqd", bary, cell.triangles).reshape(-1, 3)
        weights = (w[None, :] * cell.triangle_areas[:, None]).reshape(-1)
        all_pts.append(pts)
        all_w.append(weights)
        all_idx.append(np.full(len(weights), i))
    if not cells:
        return np.empty((0, 3)), np.empty(0), np.empty(0, dtype=int)
    return (np.concatenate(all_pts), np.concatenate(all_w),
            np.concatenate(all_idx))


def dump_surface(cells, path):
    """Plain-text triangle dump: one 'x0 y0 z0 x1 y1 z1 x2 y2 z2' per line."""
    with open(path, "w") as fh:
        for cell in cells:
            for tri in cell.triangles:
                fh.write(" ".join(f"{c:.17g}" for c in tri.ravel()) + "\n")
