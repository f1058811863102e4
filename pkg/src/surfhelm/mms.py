"""Manufactured solutions, surface forcing, and discretization errors.

The forcing is derived analytically from the chosen ambient solution via
the tangential Laplacian identity

    lap_surface(u) = lap(u) - n' hess(u) n - div(n) (n . grad(u))

and extended off the surface by closest-point composition.  Errors are
measured on the discrete surface against the extension of the exact
solution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientData, NotOnSurface
from .fem import basis_at_points, surface_quadrature, tet_transforms
from .geometry import AmbientScalarField, _as_points

_ON_SURFACE_RTOL = 1e-10

#: the cubic test solution used throughout the experiments
FABRICATED_SOLUTION = "(x - 1/2)*(y - 1/2)*(z - 1/2)"


def _check_on_surface(surface, pts):
    vals = np.abs(surface.value(pts))
    tol = _ON_SURFACE_RTOL * surface.diam
    if np.any(vals > tol):
        raise NotOnSurface(
            f"|level set| = {vals.max():.3e} exceeds {tol:.3e}")


def surface_laplacian(u, surface, x):
    """Tangential Laplacian of an ambient field at on-surface points."""
    pts, single = _as_points(x)
    _check_on_surface(surface, pts)
    n = surface.unit_normal(pts)
    hess = u.hessian(pts)
    grad = u.gradient(pts)
    lap = np.trace(hess, axis1=1, axis2=2)
    nhn = np.einsum("ni,nij,nj->n", n, hess, n)
    div_n = surface.mean_curvature_divergence(pts)
    ndotg = np.einsum("ni,ni->n", n, grad)
    out = lap - nhn - div_n * ndotg
    return out[0] if single else out


@dataclass
class ManufacturedCase:
    """Exact solution, surface, and wave number of one experiment."""

    u: AmbientScalarField
    surface: object
    k2: float

    @classmethod
    def fabricated(cls, surface, k2):
        return cls(u=AmbientScalarField(FABRICATED_SOLUTION),
                   surface=surface, k2=k2)

    def forcing(self, x):
        """f = -lap_surface(u) - k^2 u at on-surface points."""
        pts, single = _as_points(x)
        _check_on_surface(self.surface, pts)
        f = -surface_laplacian(self.u, self.surface, pts) - self.k2 * self.u.value(pts)
        return f[0] if single else f

    def forcing_extended(self, x):
        """Closest-point extension of the forcing to near-surface points."""
        pts, single = _as_points(x)
        p = self.surface._project_checked(pts)
        f = self.forcing(p)
        return f[0] if single else f

    def solution_extended(self, x):
        pts, single = _as_points(x)
        p = self.surface._project_checked(pts)
        v = self.u.value(p)
        return v[0] if single else v


class ErrorEvaluator:
    """Precomputed quadrature data for repeated error evaluations.

    The closest-point projections and exact-solution samples are independent
    of the wave number, so one evaluator serves a whole scan over k^2.
    """

    def __init__(self, u, surface, active, cells, degree=4):
        v0, ainv, grads, dofs = tet_transforms(active)
        pts, w, owner = surface_quadrature(active, cells, degree)
        proj = surface._project_checked(pts)
        self.weights = w
        self.phi = basis_at_points(pts, owner, v0, ainv)
        self.grads = grads[owner]
        self.dofs = dofs[owner]
        self.normals = np.array([c.normal for c in cells])[owner]
        self.ue_vals = u.value(proj)
        self.ge_vals = u.gradient(proj)

    def __call__(self, u_h, k2):
        """Returns (L2, tangential-H1, energy) errors of a dof vector."""
        u_loc = u_h[self.dofs]
        uh_vals = np.einsum("qk,qk->q", self.phi, u_loc)
        err_l2 = np.sqrt(np.sum(self.weights
                                * np.abs(self.ue_vals - uh_vals) ** 2))
        g_h = np.einsum("qkd,qk->qd", self.grads, u_loc)
        diff = self.ge_vals - g_h
        diff_t = diff - np.einsum("qd,qd->q", self.normals,
                                  diff)[:, None] * self.normals
        err_h1t = np.sqrt(np.sum(
            self.weights * np.einsum("qd,qd->q", diff_t, diff_t.conj()).real))
        err_energy = np.sqrt(err_h1t**2 + k2 * err_l2**2)
        return float(err_l2), float(err_h1t), float(err_energy)


def error_norms(u_h, case, active, cells):
    """(L2, tangential-H1, energy) errors of a dof vector on the discrete
    surface, using degree-4 quadrature and the closest-point extension of
    the exact solution."""
    evaluator = ErrorEvaluator(case.u, case.surface, active, cells)
    return evaluator(np.asarray(u_h), case.k2)


@dataclass
class ConvergenceRecord:
    """Per-refinement errors of one convergence sweep."""

    k2: float
    entries: list = field(default_factory=list)  # (h, ndof, l2, h1t, energy)

    def add(self, h, ndof, err_l2, err_h1t, err_energy):
        if self.entries and h >= self.entries[-1][0]:
            raise ValueError("mesh sizes must be strictly decreasing")
        self.entries.append((h, ndof, err_l2, err_h1t, err_energy))

    def fit_rates(self):
        """Least-squares log-log slopes of (L2, H1t, energy) vs h."""
        if len(self.entries) < 3:
            raise InsufficientData(
                f"need at least 3 refinement levels, got {len(self.entries)}")
        arr = np.array(self.entries)
        logh = np.log(arr[:, 0])
        slopes = []
        for col in (2, 3, 4):
            slope = np.polyfit(logh, np.log(arr[:, col]), 1)[0]
            slopes.append(float(slope))
        return tuple(slopes)

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["h", "ndof", "err_l2", "err_h1t", "err_energy"])
            for h, ndof, l2, h1t, en in self.entries:
                writer.writerow([f"{h:.17g}", int(ndof), f"{l2:.17g}",
                                 f"{h1t:.17g}", f"{en:.17g}"])

    @classmethod
    def read_csv(cls, path, k2=float("nan")):
        rec = cls(k2=k2)
        with open(path, newline="") as fh:
            for row in csv.DictReader(fh):
                rec.entries.append((float(row["h"]), int(row["ndof"]),
                                    float(row["err_l2"]), float(row["err_h1t"]),
                                    float(row["err_energy"])))
        return rec


def fit_rates(record):
    return record.fit_rates()
