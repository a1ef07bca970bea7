import math

import mpmath
import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ProjectionDomainError
from .models import EllipsoidParams, GeoPoint, WGS84
from .services import isometric_latitude, mercator_project, project_arrays, standard_parallel_radius

mpmath.mp.dps = 50


def _oracle_r0(a, e, phi0):
    a, e, phi0 = mpmath.mpf(a), mpmath.mpf(e), mpmath.mpf(phi0)
    return a * mpmath.cos(phi0) / mpmath.sqrt(1 - e**2 * mpmath.sin(phi0) ** 2)


def _oracle_q(lat, e):
    lat, e = mpmath.mpf(lat), mpmath.mpf(e)
    s = mpmath.sin(lat)
    return mpmath.log(mpmath.tan(mpmath.pi / 4 + lat / 2)) + e / 2 * mpmath.log((1 - e * s) / (1 + e * s))


class StandardParallelRadiusTests(SimpleTestCase):
    def test_equator_gives_semi_major_axis(self):
        self.assertEqual(standard_parallel_radius(WGS84), 6378137.0)

    def test_unit_sphere_at_sixty_degrees(self):
        ell = EllipsoidParams(1.0, 0.0, math.pi / 3)
        self.assertAlmostEqual(standard_parallel_radius(ell), 0.5, places=15)

    def test_wgs84_thirty_degrees_matches_oracle(self):
        phi0 = math.radians(30.0)
        ell = EllipsoidParams(6378137.0, 0.0818191908426, phi0)
        expected = float(_oracle_r0(6378137.0, 0.0818191908426, phi0))
        self.assertAlmostEqual(standard_parallel_radius(ell) / expected, 1.0, places=12)

    def test_invalid_parameters_rejected(self):
        with self.assertRaises(ProjectionDomainError):
            EllipsoidParams(0.0, 0.1)
        with self.assertRaises(ProjectionDomainError):
            EllipsoidParams(1.0, 1.0)
        with self.assertRaises(ProjectionDomainError):
            EllipsoidParams(1.0, 0.1, math.pi / 2)


class IsometricLatitudeTests(SimpleTestCase):
    e = WGS84.e_first_eccentricity

    def test_zero_at_equator(self):
        self.assertEqual(isometric_latitude(0.0, self.e), 0.0)

    def test_odd_function(self):
        for deg in np.linspace(-85, 85, 35):
            phi = math.radians(deg)
            self.assertAlmostEqual(isometric_latitude(-phi, self.e), -isometric_latitude(phi, self.e), places=12)

    def test_matches_oracle_at_survey_latitude(self):
        phi = math.radians(31.5746)
        expected = float(_oracle_q(phi, self.e))
        self.assertAlmostEqual(isometric_latitude(phi, self.e) / expected, 1.0, places=12)

    def test_sphere_reduces_to_plain_mercator(self):
        for deg in (-60.0, -10.0, 5.0, 45.0, 80.0):
            phi = math.radians(deg)
            self.assertEqual(isometric_latitude(phi, 0.0), float(np.log(np.tan(math.pi / 4 + phi / 2))))

    def test_strictly_increasing_with_analytic_slope(self):
        # dq/dphi = (1 - e^2) / ((1 - e^2 sin^2 phi) cos phi)
        phis = np.radians(np.linspace(-80, 80, 161))
        q = isometric_latitude(phis, self.e)
        self.assertTrue(np.all(np.diff(q) > 0))
        h = 1e-6
        for phi in phis:
            numeric = (isometric_latitude(phi + h, self.e) - isometric_latitude(phi - h, self.e)) / (2 * h)
            s = math.sin(phi)
            analytic = (1 - self.e**2) / ((1 - self.e**2 * s * s) * math.cos(phi))
            self.assertLess(abs(numeric - analytic) / analytic, 1e-6)

    def test_pole_is_domain_error(self):
        with self.assertRaises(ProjectionDomainError):
            isometric_latitude(math.pi / 2, self.e)


class MercatorProjectTests(SimpleTestCase):
    def test_origin_maps_to_origin(self):
        p = mercator_project(GeoPoint(0.0, 0.0), WGS84)
        self.assertEqual((p.x, p.y), (0.0, 0.0))

    def test_linear_in_longitude_on_equator(self):
        p1 = mercator_project(GeoPoint(0.3, 0.0), WGS84)
        p2 = mercator_project(GeoPoint(0.6, 0.0), WGS84)
        self.assertAlmostEqual(p2.x, 2 * p1.x, places=6)
        self.assertEqual(p2.y, 0.0)

    def test_survey_corner_matches_oracle(self):
        p = GeoPoint.from_degrees(121.9842, 31.1166)
        out = mercator_project(p, WGS84)
        r0 = _oracle_r0(WGS84.a_semi_major, WGS84.e_first_eccentricity, 0)
        self.assertAlmostEqual(out.x / float(mpmath.mpf(p.lon) * r0), 1.0, places=9)
        self.assertAlmostEqual(out.y / float(_oracle_q(p.lat, WGS84.e_first_eccentricity) * r0), 1.0, places=9)

    def test_random_points_match_oracle(self):
        rng = np.random.default_rng(7)
        lon = np.radians(rng.uniform(-179.0, 179.0, 100))
        lat = np.radians(rng.uniform(-84.0, 84.0, 100))
        ell = EllipsoidParams(6378137.0, 0.0818191908426, math.radians(20.0))
        x, y = project_arrays(lon, lat, ell)
        r0 = _oracle_r0(ell.a_semi_major, ell.e_first_eccentricity, ell.phi0_standard_parallel)
        for k in range(100):
            ex = float(mpmath.mpf(lon[k]) * r0)
            ey = float(_oracle_q(lat[k], ell.e_first_eccentricity) * r0)
            self.assertLessEqual(abs(x[k] - ex), 1e-9 * abs(ex))
            self.assertLessEqual(abs(y[k] - ey), 1e-9 * abs(ey))

    def test_monotone_in_both_axes(self):
        lats = np.radians(np.linspace(-70, 70, 50))
        lons = np.radians(np.linspace(-170, 170, 50))
        x, _ = project_arrays(lons, np.full(50, 0.4), WGS84)
        _, y = project_arrays(np.full(50, 1.0), lats, WGS84)
        self.assertTrue(np.all(np.diff(x) > 0))
        self.assertTrue(np.all(np.diff(y) > 0))

    def test_invalid_geo_point(self):
        with self.assertRaises(ProjectionDomainError):
            GeoPoint(0.0, math.pi / 2)
        with self.assertRaises(ProjectionDomainError):
            GeoPoint(4.0, 0.0)
