# -*- coding: utf-8 -*-
"""
Unit tests for depth app.
Run: python manage.py test depth
"""
import itertools

import numpy as np
from django.test import SimpleTestCase
from scipy import ndimage

from annealab.exceptions import DegenerateInputError, InvalidInputError, ResourceError
from landscapes.catalog import CATALOG, double_well, double_well_2d, get_landscape, quadratic, triple_well
from .grid import GridField, discretize
from .watershed import (
    WatershedSweep, critical_depth, find_local_minima, saddle_height, scan_minima,
)


def double_well_oracle(a=0.2):
    """Critical points of (x^2-1)^2 + a x by polynomial roots: (global min, saddle, local min)."""
    roots = np.sort(np.roots([4.0, 0.0, -4.0, a]).real)
    return roots[0], roots[1], roots[2]


def sublevel_saddle(g, i, j, minima):
    """Brute-force minimax: smallest level t whose sublevel set joins m_i and m_j."""
    levels = np.unique(g.values)
    field = g.field()
    a = np.unravel_index(minima[i].index, g.shape)
    b = np.unravel_index(minima[j].index, g.shape)
    lo, hi = 0, len(levels) - 1
    while lo < hi:
        mid = (lo + hi) // 2
        labels, _ = ndimage.label(field <= levels[mid])
        if labels[a] != 0 and labels[a] == labels[b]:
            hi = mid
        else:
            lo = mid + 1
    return float(levels[lo])


class DiscretizeTest(SimpleTestCase):
    """Tests for grid construction."""

    def test_three_cells(self):
        g = discretize(quadratic(half_width=1.0), 3)
        np.testing.assert_allclose(g.centers(0), [-2 / 3, 0.0, 2 / 3], atol=1e-15)
        np.testing.assert_allclose(g.values, [2 / 9, 0.0, 2 / 9], atol=1e-15)

    def test_double_well_grid_minimum(self):
        land = double_well(a=0.2)
        g = discretize(land, 4096)
        xs = np.linspace(-2.0, 2.0, 10 ** 6).reshape(-1, 1)
        self.assertAlmostEqual(float(g.values.min()), float(land.values(xs).min()), delta=1e-6)

    def test_two_cell_axis_rejected(self):
        with self.assertRaises(InvalidInputError):
            discretize(double_well_2d(), (2, 10))

    def test_cell_budget(self):
        with self.assertRaises(ResourceError):
            discretize(quadratic(dim=2), 100, cell_budget=1000)

    def test_cell_size_and_points(self):
        g = discretize(double_well_2d(), (40, 50))
        self.assertEqual(g.size, 2000)
        self.assertAlmostEqual(g.cell_size[0], 0.1)
        self.assertAlmostEqual(g.cell_size[1], 0.1)
        np.testing.assert_allclose(g.point(0), (-1.95, -2.45), atol=1e-12)


class LocalMinimaTest(SimpleTestCase):
    """Tests for grid local minima."""

    def test_quadratic_single_minimum(self):
        g = discretize(quadratic(half_width=1.0), 101)
        minima = find_local_minima(g)
        self.assertEqual(len(minima), 1)
        self.assertAlmostEqual(minima[0].x[0], 0.0, places=12)

    def test_double_well_two_minima(self):
        g = discretize(get_landscape('double_well', {'a': 0.2}), 4096)
        minima = find_local_minima(g)
        self.assertEqual(len(minima), 2)
        glob, _, local = double_well_oracle()
        self.assertAlmostEqual(minima[0].x[0], glob, delta=1e-3)
        self.assertAlmostEqual(minima[1].x[0], local, delta=1e-3)
        self.assertLess(minima[0].value, minima[1].value)

    def test_triple_well_three_minima(self):
        land = get_landscape('triple_well')
        g = discretize(land, 6000)
        minima = find_local_minima(g)
        self.assertEqual(len(minima), 3)
        expected = sorted(land.known_minima, key=land.eval)
        for found, point in zip(minima, expected):
            self.assertAlmostEqual(found.x[0], point[0], delta=2 * g.cell_size[0])

    def test_plateau_excluded(self):
        values = np.array([3.0, 1.0, 1.0, 2.0, 0.5, 4.0])
        g = GridField(lo=(0.0,), hi=(6.0,), shape=(6,), values=values)
        minima, warnings = scan_minima(g)
        self.assertEqual([m.index for m in minima], [4])
        self.assertTrue(warnings)


class SaddleHeightTest(SimpleTestCase):
    """Tests for minimax saddle heights."""

    def test_same_minimum(self):
        g = discretize(get_landscape('double_well'), 1024)
        minima = find_local_minima(g)
        self.assertEqual(saddle_height(g, 1, 1, minima), minima[1].value)

    def test_double_well_barrier(self):
        land = get_landscape('double_well', {'a': 0.2})
        g = discretize(land, 4096)
        _, saddle, _ = double_well_oracle()
        self.assertAlmostEqual(saddle, 0.0501, delta=1e-3)
        h = g.cell_size[0]
        self.assertAlmostEqual(saddle_height(g, 0, 1), land.eval(saddle), delta=2 * h * 4.0)
        self.assertAlmostEqual(land.eval(saddle), 1.208, delta=2e-3)

    def test_two_dimensional_matches_slice(self):
        """Separable 2-D well has the same barrier as its y=0 slice."""
        a = 0.2
        g1 = discretize(double_well(a=a), 400)
        g2 = discretize(double_well_2d(a=a), (400, 101))
        self.assertEqual(len(find_local_minima(g2)), 2)
        self.assertAlmostEqual(saddle_height(g2, 0, 1), saddle_height(g1, 0, 1), delta=1e-9)

    def test_bad_index(self):
        g = discretize(get_landscape('double_well'), 256)
        with self.assertRaises(InvalidInputError):
            saddle_height(g, 0, 5)

    def test_brute_force_equivalence(self):
        """Union-find sweep equals sublevel-set connectivity on small grids."""
        grids = [
            discretize(get_landscape('triple_well'), 2000),
            discretize(get_landscape('double_well'), 5000),
            discretize(get_landscape('double_well_2d'), (80, 60)),
        ]
        for g in grids:
            minima = find_local_minima(g)
            sweep = WatershedSweep(g, minima).run()
            for i, j in itertools.combinations(range(len(minima)), 2):
                with self.subTest(shape=g.shape, pair=(i, j)):
                    self.assertEqual(sweep.heights[i, j], sublevel_saddle(g, i, j, minima))
                    self.assertEqual(saddle_height(g, i, j, minima), sweep.heights[i, j])


class CriticalDepthTest(SimpleTestCase):
    """Tests for the depth report."""

    def test_quadratic(self):
        report = critical_depth(discretize(quadratic(), 257))
        self.assertEqual(len(report.minima), 1)
        self.assertEqual(report.critical_depth, 0.0)
        self.assertEqual(report.dominating_index, 0)

    def test_double_well_oracle(self):
        """E* within 1e-3 of the critical-point oracle at 2^14 cells."""
        land = double_well(a=0.2)
        glob, saddle, local = double_well_oracle()
        oracle = land.eval(saddle) - land.eval(local)
        self.assertAlmostEqual(oracle, 0.8077, delta=1e-3)
        report = critical_depth(discretize(land.normalize(2 ** 14), 2 ** 14))
        self.assertAlmostEqual(report.critical_depth, oracle, delta=1e-3)
        self.assertEqual(report.dominating_index, 1)
        self.assertEqual(report.uniqueness_warnings, [])
        self.assertAlmostEqual(land.analytic_depth, oracle, places=10)

    def test_resolution_convergence(self):
        """Second-order envelope on the dyadic sweep, 1e-3 at 2^14 cells."""
        for landscape_id in ('quadratic', 'double_well', 'triple_well'):
            land = get_landscape(landscape_id)
            width = land.hi[0] - land.lo[0]
            for k in range(8, 15):
                with self.subTest(landscape=landscape_id, k=k):
                    error = abs(critical_depth(discretize(land, 2 ** k)).critical_depth - land.analytic_depth)
                    self.assertLessEqual(error, land.analytic_lipschitz * (width / 2 ** k) ** 2 / 4.0)
                    if k == 14:
                        self.assertLessEqual(error, 1e-3)

    def test_nested_refinement_is_monotone(self):
        """Splitting every cell in three keeps the old centres, so the error can only shrink."""
        for landscape_id in ('quadratic', 'double_well', 'triple_well'):
            land = get_landscape(landscape_id)
            errors = [
                abs(critical_depth(discretize(land, 256 * 3 ** j)).critical_depth - land.analytic_depth)
                for j in range(5)
            ]
            with self.subTest(landscape=landscape_id, errors=errors):
                self.assertTrue(all(b <= a + 1e-12 for a, b in zip(errors, errors[1:])))
                self.assertLess(errors[-1], 1e-4)

    def test_symmetric_well_warns(self):
        report = critical_depth(discretize(double_well(a=0.0), 2048))
        self.assertTrue(report.uniqueness_warnings)

    def test_report_invariants(self):
        """Symmetry, diagonal, lower bound and ultrametric inequality on the catalog."""
        shapes = {1: 4096, 2: (200, 125)}
        for landscape_id in CATALOG:
            land = get_landscape(landscape_id)
            report = critical_depth(discretize(land, shapes[land.dim]))
            H = report.saddle_heights
            values = np.array([m.value for m in report.minima])
            with self.subTest(landscape=landscape_id):
                np.testing.assert_array_equal(H, H.T)
                np.testing.assert_array_equal(np.diag(H), values)
                self.assertTrue(np.all(H >= np.maximum.outer(values, values)))
                n = len(values)
                for i, j, k in itertools.product(range(n), repeat=3):
                    self.assertLessEqual(H[i, k], max(H[i, j], H[j, k]))
                if n > 1:
                    expected = max(H[i, 0] - values[i] for i in range(1, n))
                    self.assertEqual(report.critical_depth, expected)

    def test_triple_well_dominating_barrier(self):
        land = get_landscape('triple_well')
        report = critical_depth(discretize(land, 2 ** 14))
        self.assertEqual(len(report.minima), 3)
        self.assertAlmostEqual(report.critical_depth, land.analytic_depth, delta=1e-3)

    def test_label_permutation(self):
        """Relabelling minima permutes the height matrix and keeps E*."""
        g = discretize(get_landscape('triple_well'), 3000)
        minima = find_local_minima(g)
        base = WatershedSweep(g, minima).run().heights
        for perm in itertools.permutations(range(len(minima))):
            heights = WatershedSweep(g, [minima[p] for p in perm]).run().heights
            for a, b in itertools.product(range(len(minima)), repeat=2):
                self.assertEqual(heights[a, b], base[perm[a], perm[b]])

    def test_all_plateau_field(self):
        g = GridField(lo=(0.0,), hi=(1.0,), shape=(5,), values=np.ones(5))
        with self.assertRaises(DegenerateInputError):
            critical_depth(g)

    def test_json_shape(self):
        data = critical_depth(discretize(get_landscape('double_well'), 1024)).to_dict()
        self.assertEqual(
            set(data), {'minima', 'saddle_heights', 'communicating_saddles',
                        'critical_depth', 'dominating_index', 'warnings'},
        )
        self.assertEqual(set(data['minima'][0]), {'x', 'f'})
