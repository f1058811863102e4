import numpy as np
import pytest

from surfhelm.errors import DegenerateGradient, OutsideTubularNeighborhood
from surfhelm.geometry import (
    AmbientScalarField,
    PolyIsoline,
    Sphere,
    Spheroid,
    surface_from_json,
)

RNG = np.random.default_rng(42)


def near_surface_points(surface, count, rng=RNG):
    """Random points close to the zero set, inside the tubular neighborhood."""
    if isinstance(surface, Sphere):
        d = rng.normal(size=(count, 3))
        d /= np.linalg.norm(d, axis=1)[:, None]
        r = surface.radius + rng.uniform(-0.3, 0.3, count) * surface.radius
        return surface.center + r[:, None] * d
    # sample a box and keep points with small level-set value; a tight band
    # keeps the points well inside the reach of the closest-point map
    lo, hi = (-2.5, 2.5) if isinstance(surface, PolyIsoline) else (-1.0, 1.0)
    pts = []
    while sum(len(p) for p in pts) < count:
        cand = rng.uniform(lo, hi, size=(8 * count, 3))
        keep = np.abs(surface.value(cand)) < 0.1 * surface.delta
        pts.append(cand[keep])
    return np.concatenate(pts)[:count]


def all_surfaces():
    return [Sphere(radius=0.5), Sphere(center=(0.1, -0.2, 0.05), radius=0.7),
            Spheroid((0.5, 0.5, 0.25)), PolyIsoline()]


class TestEval:
    def test_sphere_on_surface(self):
        s = Sphere(radius=0.5)
        assert s.value([0.5, 0, 0]) == pytest.approx(0.0, abs=1e-15)

    def test_sphere_signed_distance(self):
        s = Sphere(radius=0.5)
        assert s.value([1, 0, 0]) == pytest.approx(0.5)

    def test_poly_at_origin(self):
        # direct substitution: (16+4+16+1+16+1) - 15
        assert PolyIsoline().value([0, 0, 0]) == pytest.approx(39.0)

    def test_sphere_is_exact_distance_everywhere(self):
        s = Sphere(center=(0.1, -0.2, 0.05), radius=0.7)
        pts = RNG.uniform(-2, 2, size=(500, 3))
        expected = np.linalg.norm(pts - s.center, axis=1) - s.radius
        np.testing.assert_allclose(s.value(pts), expected, atol=1e-14)


class TestUnitNormal:
    def test_sphere_axis_points(self):
        s = Sphere(radius=0.5)
        np.testing.assert_allclose(s.unit_normal([0.5, 0, 0]), [1, 0, 0],
                                   atol=1e-14)
        np.testing.assert_allclose(s.unit_normal([0, 0, -2]), [0, 0, -1],
                                   atol=1e-14)

    def test_spheroid_pole(self):
        sp = Spheroid((0.5, 0.5, 0.25))
        np.testing.assert_allclose(sp.unit_normal([0, 0, 0.25]), [0, 0, 1],
                                   atol=1e-14)

    @pytest.mark.parametrize("surface", all_surfaces(),
                             ids=lambda s: f"{s.kind}")
    def test_unit_length(self, surface):
        pts = near_surface_points(surface, 10_000)
        n = surface.unit_normal(pts)
        np.testing.assert_allclose(np.linalg.norm(n, axis=1), 1.0, atol=1e-14)

    def test_degenerate_gradient(self):
        sp = Spheroid((0.5, 0.5, 0.25))
        with pytest.raises(DegenerateGradient):
            sp.unit_normal([0, 0, 0])


class TestMeanCurvature:
    def test_unit_sphere(self):
        s = Sphere(radius=1.0)
        p = np.array([1, 0, 0]) / 1.0
        assert s.mean_curvature_divergence(p) == pytest.approx(2.0)

    def test_half_sphere(self):
        s = Sphere(radius=0.5)
        d = np.array([1.0, 2.0, -1.0])
        p = 0.5 * d / np.linalg.norm(d)
        assert s.mean_curvature_divergence(p) == pytest.approx(4.0)

    def test_spheroid_pole_against_finite_differences(self):
        sp = Spheroid((0.5, 0.5, 0.25))
        x = np.array([0.0, 0.0, 0.25])
        h = 1e-6
        div = 0.0
        for i in range(3):
            e = np.zeros(3)
            e[i] = h
            div += (sp.unit_normal(x + e)[i] - sp.unit_normal(x - e)[i]) / (2 * h)
        assert sp.mean_curvature_divergence(x) == pytest.approx(div, rel=1e-5)


class TestClosestPoint:
    def test_sphere_axis(self):
        # delta widened so the query is inside the configured neighborhood
        s = Sphere(radius=0.5, delta=0.6)
        np.testing.assert_allclose(s.closest_point([1, 0, 0]), [0.5, 0, 0],
                                   atol=1e-14)

    def test_sphere_fixed_point(self):
        s = Sphere(radius=0.5)
        x = np.array([0.4, 0.3, 0.0])
        np.testing.assert_allclose(s.closest_point(x), x, atol=1e-14)

    def test_spheroid_pole(self):
        sp = Spheroid((0.5, 0.5, 0.25))
        np.testing.assert_allclose(sp.closest_point([0, 0, 0.3]),
                                   [0, 0, 0.25], atol=1e-10)

    @pytest.mark.parametrize("surface", all_surfaces(),
                             ids=lambda s: f"{s.kind}")
    def test_idempotent(self, surface):
        pts = near_surface_points(surface, 200)
        p1 = surface.closest_point(pts)
        p2 = surface.closest_point(p1)
        np.testing.assert_allclose(p1, p2, atol=1e-10)

    @pytest.mark.parametrize("surface", all_surfaces(),
                             ids=lambda s: f"{s.kind}")
    def test_stationarity(self, surface):
        # the residual x - p must be parallel to the normal at p
        pts = near_surface_points(surface, 200)
        p = surface.closest_point(pts)
        assert np.abs(surface.value(p)).max() <= 1e-12 * surface.diam
        n = surface.unit_normal(p)
        d = pts - p
        lengths = np.linalg.norm(d, axis=1)
        keep = lengths > 1e-9
        cross = np.cross(d[keep] / lengths[keep, None], n[keep])
        assert np.linalg.norm(cross, axis=1).max() < 1e-8

    def test_outside_tubular_neighborhood(self):
        s = Sphere(radius=0.5)
        with pytest.raises(OutsideTubularNeighborhood):
            s.closest_point([2.0, 0, 0])


class TestExtend:
    def test_linear_field_on_unit_sphere(self):
        s = Sphere(radius=1.0, delta=1.5)
        u = AmbientScalarField("x")
        assert s.extend(u, [2.0, 0, 0]) == pytest.approx(1.0)

    def test_identity_on_surface(self):
        s = Sphere(radius=0.5)
        u = AmbientScalarField("x*y + z**2")
        p = np.array([0.3, 0.4, 0.0])
        assert s.extend(u, p) == pytest.approx(u.value(p))

    def test_fabricated_solution(self):
        s = Sphere(radius=0.5, delta=0.6)
        u = AmbientScalarField("(x - 1/2)*(y - 1/2)*(z - 1/2)")
        assert s.extend(u, [1.0, 0, 0]) == pytest.approx(0.0, abs=1e-14)


class TestDerivativeConsistency:
    """Analytic gradient/Hessian vs central finite differences."""

    @pytest.mark.parametrize("surface", all_surfaces(),
                             ids=lambda s: f"{s.kind}")
    def test_surface_derivatives(self, surface):
        pts = near_surface_points(surface, 1000)
        step = 1e-5 * surface.diam
        self._check(surface, pts, step)

    def test_field_derivatives(self):
        field = AmbientScalarField("(x - 1/2)*(y - 1/2)*(z - 1/2)")
        field.diam = 1.0
        pts = RNG.uniform(-1, 1, size=(1000, 3))
        self._check(field, pts, 1e-5)

    @staticmethod
    def _check(obj, pts, step):
        grad = obj.gradient(pts)
        hess = obj.hessian(pts)
        scale_g = np.abs(grad).max()
        scale_h = np.abs(hess).max() + 1.0
        for i in range(3):
            e = np.zeros(3)
            e[i] = step
            fd_g = (obj.value(pts + e) - obj.value(pts - e)) / (2 * step)
            np.testing.assert_allclose(grad[:, i], fd_g, atol=1e-5 * scale_g)
            fd_h = (obj.gradient(pts + e) - obj.gradient(pts - e)) / (2 * step)
            np.testing.assert_allclose(hess[:, :, i], fd_h,
                                       atol=1e-5 * scale_h)


class TestJsonInterface:
    def test_sphere(self):
        s = surface_from_json({"kind": "sphere", "center": [0, 0, 0],
                               "radius": 0.5})
        assert isinstance(s, Sphere) and s.radius == 0.5

    def test_spheroid(self):
        s = surface_from_json({"kind": "spheroid",
                               "semi_axes": [0.5, 0.5, 0.25]})
        assert isinstance(s, Spheroid)
        np.testing.assert_allclose(s.semi_axes, [0.5, 0.5, 0.25])

    def test_poly(self):
        assert isinstance(surface_from_json({"kind": "poly_isoline"}),
                          PolyIsoline)

    def test_roundtrip(self):
        for s in all_surfaces():
            s2 = surface_from_json(s.to_json())
            pts = near_surface_points(s, 10)
            np.testing.assert_allclose(s.value(pts), s2.value(pts))

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            surface_from_json({"kind": "torus"})
