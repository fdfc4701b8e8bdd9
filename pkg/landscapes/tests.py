# -*- coding: utf-8 -*-
"""
Unit tests for landscapes app.
Run: python manage.py test landscapes
"""
import numpy as np
from django.test import SimpleTestCase

from annealab.exceptions import DomainExceededError, InvalidInputError
from .assumptions import (
    check_growth_assumption, estimate_lipschitz, gradient_mismatch, secant_lipschitz,
)
from .catalog import (
    CATALOG, Landscape, _Polynomial1D, double_well, get_landscape, linear, quadratic,
)


def dense_minimum(land, n=10 ** 6):
    """Minimum of f over a dense 1-D scan of the domain."""
    xs = np.linspace(land.lo[0], land.hi[0], n).reshape(-1, 1)
    return float(np.min(land.values(xs)))


class EvalTest(SimpleTestCase):
    """Tests for landscape evaluation."""

    def test_quadratic_minimum(self):
        """Normalized quadratic vanishes at the origin."""
        land = get_landscape('quadratic', {'dim': 2})
        self.assertAlmostEqual(land.eval([0.0, 0.0]), 0.0, places=12)

    def test_double_well_normalized_minimum(self):
        """Grid-normalized double well has dense-scan minimum 0."""
        land = get_landscape('double_well', {'a': 0.2})
        self.assertAlmostEqual(dense_minimum(land), 0.0, delta=1e-6)

    def test_symmetric_double_well(self):
        """a=0 well is even."""
        land = double_well(a=0.0)
        self.assertEqual(land.eval(1.0), land.eval(-1.0))
        for x in np.linspace(-2, 2, 17):
            self.assertEqual(land.eval(x), land.eval(-x))

    def test_non_finite_point_rejected(self):
        """NaN and inf inputs raise invalid-input errors."""
        land = quadratic()
        with self.assertRaises(InvalidInputError):
            land.eval(float('nan'))
        with self.assertRaises(InvalidInputError):
            land.grad([float('inf')])

    def test_empty_domain_rejected(self):
        """Domain intervals must have lo < hi."""
        with self.assertRaises(InvalidInputError):
            Landscape(name='bad', dim=1, func=np.sum, gradient=np.sign, lo=(1.0,), hi=(1.0,))

    def test_unknown_catalog_id(self):
        """Unknown ids list the catalog in the error."""
        with self.assertRaises(InvalidInputError) as ctx:
            get_landscape('banana')
        self.assertIn('double_well', str(ctx.exception))


class GradientTest(SimpleTestCase):
    """Tests for analytic gradients."""

    def test_quadratic_gradient(self):
        land = quadratic(dim=3)
        x = np.array([0.5, -1.0, 2.0])
        np.testing.assert_allclose(land.grad(x), x)

    def test_double_well_gradient(self):
        """4x^3 - 4x + a at x = 1."""
        land = double_well(a=0.2)
        self.assertAlmostEqual(float(land.grad(1.0)[0]), 0.2, places=12)

    def test_catalog_finite_differences(self):
        """Every catalog landscape agrees with central differences."""
        for landscape_id in CATALOG:
            with self.subTest(landscape=landscape_id):
                land = get_landscape(landscape_id)
                self.assertLessEqual(gradient_mismatch(land, points=100, seed=7), 1e-5)


class NormalizeTest(SimpleTestCase):
    """Tests for grid normalization."""

    def test_constant_shift(self):
        """x^2 + 3 on [-2, 2] normalizes to 0 at the origin."""
        poly = _Polynomial1D([1.0, 0.0, 3.0])
        land = Landscape(name='shifted', dim=1, func=poly, gradient=poly.gradient, lo=(-2.0,), hi=(2.0,))
        self.assertAlmostEqual(land.normalize(401).eval(0.0), 0.0, places=12)

    def test_idempotent(self):
        """Normalizing twice changes nothing."""
        once = double_well(a=0.2).normalize(4096)
        twice = once.normalize(4096)
        for x in np.linspace(-2, 2, 9):
            self.assertAlmostEqual(once.eval(x), twice.eval(x), delta=1e-12)

    def test_gradient_unchanged(self):
        raw = double_well(a=0.2)
        self.assertEqual(float(raw.normalize(1000).grad(0.3)[0]), float(raw.grad(0.3)[0]))

    def test_shift_matches_global_minimum(self):
        """Shift equals f at the global critical point x ~ -1.024."""
        raw = double_well(a=0.2)
        roots = np.roots([4.0, 0.0, -4.0, 0.2])
        glob = min(r.real for r in roots if abs(r.imag) < 1e-12)
        self.assertAlmostEqual(glob, -1.024, delta=1e-3)
        shifted = raw.normalize(10 ** 5)
        self.assertAlmostEqual(shifted.shift, raw.eval(glob), delta=1e-6)

    def test_resolution_precondition(self):
        with self.assertRaises(InvalidInputError):
            quadratic().normalize(1)


class GrowthAssumptionTest(SimpleTestCase):
    """Tests for the growth / Hessian checker."""

    def test_quadratic_ratio(self):
        """(|x|^2 - d) / |x|^2 at radius 10."""
        for dim in (1, 3):
            with self.subTest(dim=dim):
                report = check_growth_assumption(quadratic(dim=dim), radius=10.0, samples=8)
                self.assertAlmostEqual(report.growth_ratio_min, (100.0 - dim) / 100.0, delta=1e-4)
                self.assertTrue(report.growth_ok)
                self.assertTrue(report.hessian_lower_bound_ok)

    def test_double_well_positive(self):
        report = check_growth_assumption(double_well(a=0.2), radius=1.9, samples=4)
        self.assertGreater(report.growth_ratio_min, 0.0)
        self.assertTrue(report.growth_ok)
        self.assertLess(report.hessian_lower_bound, 0.0)

    def test_linear_flagged(self):
        """Linear f fails the strict margin and says so in the notes."""
        report = check_growth_assumption(linear(), radius=50.0, samples=4)
        self.assertFalse(report.growth_ok)
        self.assertTrue(any('growth' in note for note in report.notes))

    def test_radius_outside_domain(self):
        with self.assertRaises(DomainExceededError):
            check_growth_assumption(double_well(), radius=5.0, samples=2)


class LipschitzTest(SimpleTestCase):
    """Tests for the Lipschitz estimator."""

    def test_quadratic_constant(self):
        est = estimate_lipschitz(quadratic(dim=2), samples=200, rng_seed=3)
        self.assertLessEqual(est, 1.0 + 1e-9)
        self.assertGreater(est, 1.0 - 1e-9)

    def test_double_well_below_second_derivative_bound(self):
        est = estimate_lipschitz(double_well(a=0.2), samples=500, rng_seed=1)
        self.assertLessEqual(est, 44.0)
        self.assertGreater(est, 20.0)

    def test_monotone_in_samples(self):
        land = double_well(a=0.2)
        estimates = [estimate_lipschitz(land, samples=n, rng_seed=11) for n in (2, 10, 50, 250)]
        self.assertEqual(estimates, sorted(estimates))

    def test_identical_points_excluded(self):
        points = np.array([[0.5], [0.5], [1.0]])
        grads = np.array([[1.0], [1.0], [2.0]])
        self.assertAlmostEqual(secant_lipschitz(points, grads), 2.0)
        self.assertEqual(secant_lipschitz(points[:2], grads[:2]), 0.0)

    def test_sample_precondition(self):
        with self.assertRaises(InvalidInputError):
            estimate_lipschitz(quadratic(), samples=1, rng_seed=0)
