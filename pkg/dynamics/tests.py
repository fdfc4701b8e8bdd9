# -*- coding: utf-8 -*-
"""
Unit tests for dynamics app.
Run: python manage.py test dynamics
"""
import math

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from annealab.exceptions import DivergenceError, InvalidInputError, UnsupportedError
from depth.grid import GridField, discretize
from landscapes.catalog import Landscape, flat, get_landscape, quadratic
from schedules.schedules import ConstantStep, ConstantTemperature, CoolingSchedule, StepSchedule
from .chains import (
    InitialDistribution, fine_euler_reference, init_chain, run_chain, sa_step, ula_step,
)
from .ensemble import ChainEnsemble, EnsembleBlock
from .gibbs import GibbsSampler1D, gibbs_sample_1d
from .streams import NoiseStream, UniformStream


def sloped_line(c):
    return Landscape(
        name='sloped_line', dim=1,
        func=lambda x: c * x[..., 0],
        gradient=lambda x: np.full(np.shape(x), c, dtype=float),
        lo=(-10.0,), hi=(10.0,),
    )


class StreamTest(SimpleTestCase):
    """Tests for keyed random streams."""

    def test_same_key_same_values(self):
        a = NoiseStream(7, 3, dim=2).normals(600)
        b = NoiseStream(7, 3, dim=2).normals(600)
        np.testing.assert_array_equal(a, b)

    def test_chunking_invisible(self):
        whole = NoiseStream(1, 0, dim=1, block_steps=64).normals(300)
        s = NoiseStream(1, 0, dim=1, block_steps=64)
        parts = np.concatenate([s.normals(n) for n in (1, 63, 100, 136)])
        np.testing.assert_array_equal(whole, parts)
        self.assertEqual(s.draws, 300)

    def test_chains_independent(self):
        a = NoiseStream(0, 0, dim=1).normals(100)
        b = NoiseStream(0, 1, dim=1).normals(100)
        self.assertFalse(np.array_equal(a, b))

    def test_silent(self):
        s = NoiseStream(0, 0, dim=3, silent=True)
        np.testing.assert_array_equal(s.normals(5), np.zeros((5, 3)))
        self.assertEqual(s.draws, 5)

    def test_negative_key_rejected(self):
        with self.assertRaises(InvalidInputError):
            NoiseStream(-1, 0, dim=1)


class InitChainTest(SimpleTestCase):
    """Tests for initial laws."""

    def test_point_mass(self):
        mu0 = InitialDistribution.point_mass(1.5)
        for seed in (0, 1, 99):
            s = init_chain(mu0, seed, chain_id=4)
            np.testing.assert_array_equal(s.x, [1.5])
            self.assertEqual((s.k, s.theta_cum), (0, 0.0))

    def test_gaussian_deterministic(self):
        mu0 = InitialDistribution.gaussian(0.0, 1.0)
        np.testing.assert_array_equal(init_chain(mu0, 5, 2).x, init_chain(mu0, 5, 2).x)

    def test_gaussian_moments(self):
        mu0 = InitialDistribution.gaussian(0.0, 1.0)
        xs = np.array([init_chain(mu0, 11, c).x[0] for c in range(10 ** 5)])
        self.assertLess(abs(xs.mean()), 3 * 10 ** -2.5)
        self.assertAlmostEqual(xs.var(), 1.0, delta=0.02)

    def test_invalid_laws(self):
        with self.assertRaises(InvalidInputError):
            InitialDistribution.gaussian(0.0, 0.0)
        with self.assertRaises(InvalidInputError):
            InitialDistribution(kind='uniform')
        with self.assertRaises(InvalidInputError):
            InitialDistribution(kind='point_mass', at='saddle')

    def test_anchor_must_be_resolved(self):
        mu0 = InitialDistribution.from_dict({'kind': 'point_mass', 'at': 'dominating_minimum'})
        with self.assertRaises(InvalidInputError):
            init_chain(mu0, 0, 0)
        resolved = mu0.anchored((0.97,))
        self.assertEqual(init_chain(resolved, 0, 0).x.tolist(), [0.97])

    def test_dict_round_trip(self):
        for data in ({'kind': 'point_mass', 'x0': [0.5, -1.0]},
                     {'kind': 'gaussian', 'mean': [0.0], 'stddev': 0.3},
                     {'kind': 'point_mass', 'at': 'dominating_minimum'}):
            self.assertEqual(InitialDistribution.from_dict(data).to_dict(), data)


class SaStepTest(SimpleTestCase):
    """Tests for the annealing iteration."""

    def test_fixed_point(self):
        s = init_chain(InitialDistribution.point_mass(0.0), 0, 0, silent=True)
        sa_step(s, quadratic(), StepSchedule(0.5, 0.75), CoolingSchedule(E=1.0))
        self.assertEqual(s.x.tolist(), [0.0])
        self.assertEqual(s.k, 1)

    def test_pure_drift(self):
        s = init_chain(InitialDistribution.point_mass(1.0), 0, 0, silent=True)
        sa_step(s, sloped_line(2.0), StepSchedule(0.1, 1.0), CoolingSchedule(E=1.0))
        self.assertAlmostEqual(s.x[0], 0.8, places=14)
        self.assertAlmostEqual(s.theta_cum, 0.1, places=15)

    def test_flat_increment_variance(self):
        tau, eta = 0.5, 0.01
        land = flat()
        s = init_chain(InitialDistribution.point_mass(0.0), 3, 0)
        xs = np.empty(10 ** 5 + 1)
        xs[0] = 0.0
        for i in range(1, len(xs)):
            ula_step(s, land, eta, tau)
            xs[i] = s.x[0]
        self.assertAlmostEqual(np.diff(xs).var() / (2 * tau * eta), 1.0, delta=0.02)

    def test_theta_consistency(self):
        ss = StepSchedule(0.3, 0.75)
        s = init_chain(InitialDistribution.point_mass(1.0), 0, 0)
        land = get_landscape('double_well')
        for _ in range(5000):
            sa_step(s, land, ss, CoolingSchedule(E=1.2))
        expected = ss.cumulative(5000)
        self.assertLessEqual(abs(s.theta_cum - expected), 1e-9 * expected)

    def test_zero_temperature_contraction(self):
        ss = StepSchedule(0.5, 0.75)
        s = init_chain(InitialDistribution.point_mass(2.0), 0, 0, silent=True)
        previous = s.x[0]
        for k in range(1, 2000):
            sa_step(s, quadratic(), ss, CoolingSchedule(E=1.0))
            self.assertAlmostEqual(s.x[0], (1.0 - ss.step_size(k)) * previous, delta=1e-15)
            previous = s.x[0]
        self.assertLess(abs(s.x[0]), 1e-3)

    def test_divergence(self):
        s = init_chain(InitialDistribution.point_mass(1.0), 0, 0, silent=True)
        with self.assertRaises(DivergenceError) as ctx:
            for _ in range(100):
                ula_step(s, quadratic(), 3.0, 0.0)
        self.assertGreater(ctx.exception.k, 10)


class UlaStepTest(SimpleTestCase):
    """Tests for fixed-temperature Langevin steps."""

    def test_gradient_descent_limit(self):
        s = init_chain(InitialDistribution.point_mass(1.0), 0, 0)
        ula_step(s, quadratic(), 0.5, 0.0)
        self.assertEqual(s.x.tolist(), [0.5])

    def test_identical_streams(self):
        a = init_chain(InitialDistribution.point_mass(0.3), 9, 1)
        b = init_chain(InitialDistribution.point_mass(0.3), 9, 1)
        land = get_landscape('double_well')
        for _ in range(500):
            ula_step(a, land, 0.01, 0.2)
            ula_step(b, land, 0.01, 0.2)
        np.testing.assert_array_equal(a.x, b.x)

    def test_matches_constant_schedules(self):
        land = get_landscape('double_well')
        a = init_chain(InitialDistribution.point_mass(0.3), 2, 0)
        b = init_chain(InitialDistribution.point_mass(0.3), 2, 0)
        for _ in range(300):
            ula_step(a, land, 0.02, 0.4)
            sa_step(b, land, ConstantStep(0.02), ConstantTemperature(0.4))
        np.testing.assert_array_equal(a.x, b.x)

    def test_ar1_stationary_variance(self):
        """x' = (1 - eta) x + sqrt(2 tau eta) Z has variance tau / (1 - eta / 2)."""
        eta, tau = 0.1, 0.5
        ensemble = ChainEnsemble(quadratic(), ConstantStep(eta), ConstantTemperature(tau),
                                 InitialDistribution.point_mass(0.0), seed=4)
        block = ensemble.run(range(1000), range(200, 5001, 40))
        expected = tau / (1.0 - eta / 2.0)
        self.assertAlmostEqual(expected, 0.5263, places=4)
        samples = np.sqrt(2.0 * block.f_values)
        self.assertAlmostEqual(np.mean(samples ** 2) / expected, 1.0, delta=0.03)

    def test_invalid_parameters(self):
        s = init_chain(InitialDistribution.point_mass(0.0), 0, 0)
        with self.assertRaises(InvalidInputError):
            ula_step(s, quadratic(), 0.0, 1.0)
        with self.assertRaises(InvalidInputError):
            ula_step(s, quadratic(), 0.1, -1.0)


class FineEulerTest(SimpleTestCase):
    """Tests for the continuous-process reference."""

    def test_brownian_variance(self):
        tau, T, dt = 0.5, 1.0, 0.05
        mu0 = InitialDistribution.point_mass(0.0)
        ends = np.array([
            fine_euler_reference(flat(), ConstantTemperature(tau), dt, T, mu0, seed=6, chain_id=c).checkpoints[-1].x[0]
            for c in range(10 ** 4)
        ])
        self.assertAlmostEqual(ends.var() / (2 * tau * T), 1.0, delta=0.05)

    def test_weak_order_one(self):
        mu0 = InitialDistribution.point_mass(1.0)
        exact = math.exp(-2.0) / 2.0
        errors = []
        for dt in (0.1, 0.05, 0.025):
            traj = fine_euler_reference(quadratic(), ConstantTemperature(0.5), dt, 1.0, mu0, seed=0, silent=True)
            self.assertEqual(traj.checkpoints[-1].k, round(1.0 / dt))
            errors.append(abs(traj.checkpoints[-1].f_value - exact))
        for coarse, fine in zip(errors, errors[1:]):
            self.assertTrue(1.5 < coarse / fine < 3.0)

    def test_horizon_shorter_than_step(self):
        with self.assertRaises(InvalidInputError):
            fine_euler_reference(quadratic(), CoolingSchedule(E=1.0), 0.1, 0.05,
                                 InitialDistribution.point_mass(0.0), seed=0)

    def test_elapsed_time_temperature(self):
        cs = CoolingSchedule(E=1.0)
        traj = fine_euler_reference(quadratic(), cs, 0.01, 2.0, InitialDistribution.point_mass(0.0),
                                    seed=0, checkpoints=[100, 200])
        self.assertAlmostEqual(traj.checkpoints[0].theta_cum, 1.0, places=12)
        self.assertAlmostEqual(traj.checkpoints[1].tau, cs.temperature(2.0), places=12)
        self.assertEqual(len(traj.rows()[0]), 5)


class EnsembleTest(SimpleTestCase):
    """Tests for the vectorized ensemble."""

    def setUp(self):
        self.land = get_landscape('double_well')
        self.ss = StepSchedule(0.02, 0.75)
        self.cs = CoolingSchedule(E=1.2)
        self.mu0 = InitialDistribution.point_mass(0.97)

    def test_matches_single_chain(self):
        checkpoints = [1, 10, 300, 700]
        block = ChainEnsemble(self.land, self.ss, self.cs, self.mu0, seed=5).run(range(6), checkpoints)
        for row, chain_id in enumerate(range(6)):
            traj = run_chain(init_chain(self.mu0, 5, chain_id), self.land, self.ss, self.cs, checkpoints)
            np.testing.assert_allclose(block.f_values[row], [c.f_value for c in traj.checkpoints], rtol=0, atol=1e-12)
            np.testing.assert_allclose(block.theta, [c.theta_cum for c in traj.checkpoints], rtol=1e-15)

    def test_partition_invariance(self):
        ensemble = ChainEnsemble(self.land, self.ss, self.cs, self.mu0, seed=8)
        whole = ensemble.run(range(16), [50, 500, 1000], record_x=True)
        parts = EnsembleBlock.concatenate([
            ensemble.run(range(0, 7), [50, 500, 1000], record_x=True),
            ensemble.run(range(7, 16), [50, 500, 1000], record_x=True),
        ])
        np.testing.assert_array_equal(whole.f_values, parts.f_values)
        np.testing.assert_array_equal(whole.x, parts.x)

    def test_divergence_flagged(self):
        block = ChainEnsemble(quadratic(), ConstantStep(3.0), ConstantTemperature(0.1),
                              InitialDistribution.point_mass(1.0), seed=0).run(range(4), [5, 100])
        self.assertTrue(np.all(block.diverged))
        self.assertTrue(np.all(np.isinf(block.f_values[:, -1])))
        self.assertEqual(block.divergence_fraction, 1.0)
        self.assertTrue(np.all(block.divergence_k > 0))

    def test_divergence_step_is_exact(self):
        land, ss, cs = quadratic(), ConstantStep(3.0), ConstantTemperature(0.1)
        mu0 = InitialDistribution.point_mass(1.0)
        block = ChainEnsemble(land, ss, cs, mu0, seed=0).run(range(4), [5, 100, 200], record_x=True)
        for row, chain_id in enumerate(range(4)):
            with self.assertRaises(DivergenceError) as ctx:
                run_chain(init_chain(mu0, 0, chain_id), land, ss, cs, [5, 100, 200])
            k = ctx.exception.k
            self.assertTrue(5 < k < 100)
            self.assertNotEqual(k % settings.NOISE_BLOCK_STEPS, 0)
            self.assertEqual(block.divergence_k[row], k)
            # frozen at the last accepted iterate
            self.assertTrue(np.all(np.isfinite(block.x[row])))
            np.testing.assert_array_equal(block.x[row, 1], block.x[row, 2])

    def test_save_and_load(self):
        import tempfile
        from pathlib import Path
        block = ChainEnsemble(self.land, self.ss, self.cs, self.mu0, seed=1).run(range(3), [10, 20])
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'block.npz'
            block.save(path)
            loaded = EnsembleBlock.load(path)
        np.testing.assert_array_equal(loaded.f_values, block.f_values)
        self.assertIsNone(loaded.x)

    def test_bad_checkpoints(self):
        ensemble = ChainEnsemble(self.land, self.ss, self.cs, self.mu0, seed=1)
        with self.assertRaises(InvalidInputError):
            ensemble.run(range(2), [10, 10])
        with self.assertRaises(InvalidInputError):
            ensemble.run([], [10])


class GibbsSampleTest(SimpleTestCase):
    """Tests for direct grid Gibbs sampling."""

    def test_equal_values_split_evenly(self):
        g = GridField(lo=(0.0,), hi=(1.0,), shape=(4,), values=np.zeros(4))
        xs = GibbsSampler1D(g, 1.0).sample(UniformStream(0), 10 ** 5)
        left = np.mean(xs < 0.5)
        self.assertAlmostEqual(left, 0.5, delta=3 * math.sqrt(0.25 / 10 ** 5))

    def test_quadratic_variance(self):
        g = discretize(quadratic(half_width=4.0), 2 ** 14)
        xs = GibbsSampler1D(g, 1.0).sample(UniformStream(2), 10 ** 5)
        self.assertAlmostEqual(xs.var(), 1.0, delta=0.02)

    def test_single_draw(self):
        g = discretize(quadratic(half_width=4.0), 64)
        x = gibbs_sample_1d(g, 0.5, UniformStream(3))
        self.assertTrue(-4.0 <= x <= 4.0)

    def test_requires_one_dimension(self):
        g = discretize(get_landscape('double_well_2d'), (10, 10))
        with self.assertRaises(UnsupportedError):
            GibbsSampler1D(g, 1.0)
        with self.assertRaises(InvalidInputError):
            GibbsSampler1D(discretize(quadratic(), 16), 0.0)
