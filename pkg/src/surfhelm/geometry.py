"""Analytic implicit surfaces and closest-point machinery.

Surfaces are described by a scalar level-set function whose zero set is the
surface.  The sphere uses the exact signed distance; the spheroid and the
polynomial isosurface use their raw implicit functions (the zero sets agree,
and the solver only consumes the zero set of the nodal interpolant).

All evaluation routines accept a single point of shape (3,) or a batch of
points of shape (N, 3) and return correspondingly shaped results.
"""

from __future__ import annotations

import numpy as np
import sympy as sp

from .errors import (
    DegenerateGradient,
    OutsideTubularNeighborhood,
    ProjectionDiverged,
)

_X, _Y, _Z = sp.symbols("x y z", real=True)

_GRAD_EPS = 1e-12


def _as_points(x):
    """Normalize input to (N, 3); return the array and a 'was single' flag."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        return pts[None, :], True
    return pts, False


def _lambdify_scalar(expr):
    """Build vectorized value/gradient/hessian callables from a sympy scalar."""
    syms = (_X, _Y, _Z)
    grad_exprs = [sp.diff(expr, s) for s in syms]
    hess_exprs = [[sp.diff(g, s) for s in syms] for g in grad_exprs]

    f_val = sp.lambdify(syms, expr, "numpy")
    f_grad = [sp.lambdify(syms, g, "numpy") for g in grad_exprs]
    f_hess = [[sp.lambdify(syms, h, "numpy") for h in row] for row in hess_exprs]

    def value(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        return np.broadcast_to(np.asarray(f_val(x, y, z), dtype=float), x.shape).copy()

    def gradient(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        cols = [np.broadcast_to(np.asarray(f(x, y, z), dtype=float), x.shape)
                for f in f_grad]
        return np.stack(cols, axis=-1)

    def hessian(pts):
        x, y, z = pts[:, 0], pts[:, 1], pts[:, 2]
        out = np.empty((len(pts), 3, 3))
        for i in range(3):
            for j in range(3):
                out[:, i, j] = np.broadcast_to(
                    np.asarray(f_hess[i][j](x, y, z), dtype=float), x.shape)
        return out

    return value, gradient, hessian


class AmbientScalarField:
    """Closed-form scalar function on R^3 with analytic derivatives."""

    def __init__(self, expr):
        if isinstance(expr, str):
            expr = sp.sympify(expr, locals={"x": _X, "y": _Y, "z": _Z})
        else:
            expr = expr.subs({s: t for s, t in zip(sp.symbols("x y z"),
                                                   (_X, _Y, _Z))})
        self.expr = expr
        self._value, self._gradient, self._hessian = _lambdify_scalar(expr)

    def value(self, x):
        pts, single = _as_points(x)
        v = self._value(pts)
        return v[0] if single else v

    def gradient(self, x):
        pts, single = _as_points(x)
        g = self._gradient(pts)
        return g[0] if single else g

    def hessian(self, x):
        pts, single = _as_points(x)
        h = self._hessian(pts)
        return h[0] if single else h

    def laplacian(self, x):
        h = self.hessian(x)
        return np.trace(h, axis1=-2, axis2=-1)

    def __repr__(self):
        return f"AmbientScalarField({self.expr})"


class LevelSetSurface:
    """Base class for implicit surface descriptors.

    Subclasses provide `_value`, `_gradient`, `_hessian` on (N, 3) arrays
    plus `diam` (characteristic diameter, used to scale tolerances) and
    `delta` (tubular-neighborhood half-width in level-set value units).
    """

    kind = "abstract"

    def value(self, x):
        pts, single = _as_points(x)
        v = self._value(pts)
        return v[0] if single else v

    def gradient(self, x):
        pts, single = _as_points(x)
        g = self._gradient(pts)
        return g[0] if single else g

    def hessian(self, x):
        pts, single = _as_points(x)
        h = self._hessian(pts)
        return h[0] if single else h

    def unit_normal(self, x):
        """Unit normal field n = grad(value)/|grad(value)|."""
        pts, single = _as_points(x)
        g = self._gradient(pts)
        norms = np.linalg.norm(g, axis=1)
        if np.any(norms <= _GRAD_EPS):
            raise DegenerateGradient(
                f"gradient norm {norms.min():.3e} below {_GRAD_EPS}")
        n = g / norms[:, None]
        return n[0] if single else n

    def mean_curvature_divergence(self, x):
        """div(n) evaluated analytically; equals the sum of principal
        curvatures at on-surface points."""
        pts, single = _as_points(x)
        g = self._gradient(pts)
        norms = np.linalg.norm(g, axis=1)
        if np.any(norms <= _GRAD_EPS):
            raise DegenerateGradient(
                f"gradient norm {norms.min():.3e} below {_GRAD_EPS}")
        h = self._hessian(pts)
        nhat = g / norms[:, None]
        tr = np.trace(h, axis1=1, axis2=2)
        nhn = np.einsum("ni,nij,nj->n", nhat, h, nhat)
        div = (tr - nhn) / norms
        return div[0] if single else div

    def closest_point(self, x):
        """Project near-surface points onto the zero set.

        Damped level-set projection followed by a Newton polish on the
        stationarity system of the constrained distance minimization.
        """
        pts, single = _as_points(x)
        vals = self._value(pts)
        if np.any(np.abs(vals) >= self.delta):
            raise OutsideTubularNeighborhood(
                f"|value| = {np.abs(vals).max():.3e} exceeds delta = {self.delta}")
        p = self._project(pts)
        return p[0] if single else p

    def _project(self, pts):
        tol = 1e-12 * self.diam
        cap = 0.2 * self.diam

        def to_zero_set(p):
            # damped level-set projection with a step cap
            for _ in range(200):
                v = self._value(p)
                if np.all(np.abs(v) < tol):
                    break
                g = self._gradient(p)
                g2 = np.einsum("ni,ni->n", g, g)
                step = (v / g2)[:, None] * g
                lengths = np.linalg.norm(step, axis=1)
                over = lengths > cap
                step[over] *= (cap / lengths[over])[:, None]
                p -= step
            return p

        def tangential(p, idx):
            # component of (target - p) in the surface tangent plane at p
            g = self._gradient(p)
            n = g / np.linalg.norm(g, axis=1)[:, None]
            d = pts[idx] - p
            return d - np.einsum("ni,ni->n", d, n)[:, None] * n

        p = to_zero_set(pts.copy())
        # fixed point for the stationarity condition: slide the foot point
        # tangentially toward the target, then return to the zero set; damp
        # the step per point whenever the residual fails to decrease
        live = np.arange(len(p))
        alpha = np.ones(len(p))
        prev = np.full(len(p), np.inf)
        for _ in range(3000):
            tang = tangential(p[live], live)
            lengths = np.linalg.norm(tang, axis=1)
            worse = lengths >= prev[live]
            alpha[live[worse]] *= 0.5
            alpha[live[~worse]] = np.minimum(alpha[live[~worse]] * 1.1, 1.0)
            prev[live] = lengths
            still = lengths >= 0.1 * tol
            live = live[still]
            if len(live) == 0:
                break
            step = alpha[live, None] * tang[still]
            lengths = np.linalg.norm(step, axis=1)
            over = lengths > cap
            step[over] *= (cap / lengths[over])[:, None]
            p[live] = to_zero_set(p[live] + step)

        worst = max(np.abs(self._value(p)).max(),
                    np.linalg.norm(tangential(p, slice(None)), axis=1).max())
        if worst >= tol:
            raise ProjectionDiverged(
                f"closest-point iteration stalled at residual {worst:.3e}")
        return p

    def extend(self, field, x):
        """Closest-point extension: evaluate `field` at the projection of x.

        `field` is an AmbientScalarField or any callable taking (N, 3)."""
        pts, single = _as_points(x)
        p = self._project_checked(pts)
        f = field.value if isinstance(field, AmbientScalarField) else field
        vals = np.asarray(f(p))
        return vals[0] if single else vals

    def _project_checked(self, pts):
        vals = self._value(pts)
        if np.any(np.abs(vals) >= self.delta):
            raise OutsideTubularNeighborhood(
                f"|value| = {np.abs(vals).max():.3e} exceeds delta = {self.delta}")
        return self._project(pts)

    def to_json(self):
        raise NotImplementedError


class Sphere(LevelSetSurface):
    """Sphere; the level-set value is the exact signed distance |x-c| - r."""

    kind = "sphere"

    def __init__(self, center=(0.0, 0.0, 0.0), radius=0.5, delta=None):
        self.center = np.asarray(center, dtype=float)
        self.radius = float(radius)
        self.diam = 2.0 * self.radius
        self.delta = delta if delta is not None else 0.4 * self.radius

    def _value(self, pts):
        return np.linalg.norm(pts - self.center, axis=1) - self.radius

    def _gradient(self, pts):
        d = pts - self.center
        return d / np.linalg.norm(d, axis=1)[:, None]

    def _hessian(self, pts):
        d = pts - self.center
        r = np.linalg.norm(d, axis=1)
        n = d / r[:, None]
        eye = np.broadcast_to(np.eye(3), (len(pts), 3, 3))
        return (eye - n[:, :, None] * n[:, None, :]) / r[:, None, None]

    def _project(self, pts):
        d = pts - self.center
        return self.center + self.radius * d / np.linalg.norm(d, axis=1)[:, None]

    def to_json(self):
        return {"kind": "sphere", "center": list(self.center), "radius": self.radius}


class Spheroid(LevelSetSurface):
    """Axis-aligned ellipsoid via the raw implicit sum of squared ratios."""

    kind = "spheroid"

    def __init__(self, semi_axes, center=(0.0, 0.0, 0.0), delta=None):
        self.semi_axes = np.asarray(semi_axes, dtype=float)
        self.center = np.asarray(center, dtype=float)
        self.diam = 2.0 * self.semi_axes.max()
        # 0.4 * (min curvature radius a_min^2/a_max) * (max surface gradient
        # 2 a_max/a_min^2) = 0.8, independent of the axes
        self.delta = delta if delta is not None else 0.8

    def _value(self, pts):
        d = (pts - self.center) / self.semi_axes
        return np.einsum("ni,ni->n", d, d) - 1.0

    def _gradient(self, pts):
        return 2.0 * (pts - self.center) / self.semi_axes**2

    def _hessian(self, pts):
        h = np.diag(2.0 / self.semi_axes**2)
        return np.broadcast_to(h, (len(pts), 3, 3)).copy()

    def to_json(self):
        return {"kind": "spheroid", "semi_axes": list(self.semi_axes),
                "center": list(self.center)}


#: the fixed polynomial whose zero isoline is the "complex" test geometry
_POLY_EXPR = ((_X**2 + _Y**2 - 4)**2 + (_Z**2 - 2)**2
              + (_Y**2 + _Z**2 - 4)**2 + (_X**2 - 1)**2
              + (_Z**2 + _X**2 - 4)**2 + (_Y**2 - 1)**2 - 15)


class PolyIsoline(LevelSetSurface):
    """Zero isosurface of a fixed degree-4 polynomial (rounded-cube shape)."""

    kind = "poly_isoline"

    def __init__(self, delta=None):
        self.diam = 5.0
        # value units, not distance: |grad| is O(10) near the surface
        self.delta = delta if delta is not None else 10.0
        self._value, self._gradient, self._hessian = _lambdify_scalar(_POLY_EXPR)

    def to_json(self):
        return {"kind": "poly_isoline"}


def surface_from_json(cfg):
    """Build a surface from its JSON descriptor dict."""
    kind = cfg.get("kind")
    if kind == "sphere":
        return Sphere(center=cfg.get("center", (0, 0, 0)),
                      radius=cfg.get("radius", 0.5))
    if kind == "spheroid":
        return Spheroid(semi_axes=cfg["semi_axes"],
                        center=cfg.get("center", (0, 0, 0)))
    if kind == "poly_isoline":
        return PolyIsoline()
    raise ValueError(f"unknown surface kind: {kind!r}")
