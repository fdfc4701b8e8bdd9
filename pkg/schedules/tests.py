# -*- coding: utf-8 -*-
"""
Unit tests for schedules app.
Run: python manage.py test schedules
"""
import math
from unittest.mock import patch

import numpy as np
from django.test import SimpleTestCase

from annealab.exceptions import InvalidInputError, UnsupportedError
from .schedules import (
    ConstantStep, CoolingSchedule, StepSchedule, cumulative, rate_exponent, step_size, temperature, validate,
)


class CoolingScheduleTest(SimpleTestCase):
    """Tests for the logarithmic cooling schedule."""

    def test_initial_temperature(self):
        self.assertAlmostEqual(temperature(CoolingSchedule(E=1.0), 0.0), 1.0, places=15)

    def test_known_value(self):
        cs = CoolingSchedule(E=2.0)
        self.assertAlmostEqual(temperature(cs, math.e ** 2 - math.e), 1.0, places=12)

    def test_asymptotic_equivalence(self):
        cs = CoolingSchedule(E=1.3)
        t = 1e6
        self.assertAlmostEqual(temperature(cs, t) * math.log(t) / cs.E, 1.0, delta=0.02)

    def test_nonincreasing_and_bounded(self):
        cs = CoolingSchedule(E=0.8)
        taus = cs.temperature(np.linspace(0.0, 1e4, 1001))
        self.assertTrue(np.all(np.diff(taus) <= 0))
        self.assertTrue(np.all(taus <= cs.E))
        self.assertTrue(np.all(taus > 0))

    def test_inverse_temperature_derivative_bounded(self):
        cs = CoolingSchedule(E=1.0)
        ts = np.logspace(0, 8, 200)
        h = 1e-3 * ts
        scaled = ts * (1.0 / cs.temperature(ts + h) - 1.0 / cs.temperature(ts)) / h
        self.assertTrue(np.all(scaled <= 1.0 / cs.E + 1e-6))

    def test_invalid_construction(self):
        with self.assertRaises(InvalidInputError):
            CoolingSchedule(E=0.0)
        with self.assertRaises(InvalidInputError):
            CoolingSchedule(E=1.0, t_offset=1.0)
        with self.assertRaises(InvalidInputError):
            temperature(CoolingSchedule(E=1.0), -1.0)

    def test_dict_round_trip(self):
        cs = CoolingSchedule(E=1.2, t_offset=5.0)
        self.assertEqual(CoolingSchedule.from_dict(cs.to_dict()), cs)


class StepScheduleTest(SimpleTestCase):
    """Tests for power-law step sizes and cumulative time."""

    def test_step_size_examples(self):
        self.assertAlmostEqual(step_size(StepSchedule(0.1, 1.0), 10), 0.01, places=15)
        self.assertAlmostEqual(step_size(StepSchedule(1.0, 0.75), 16), 0.125, places=15)

    def test_theta_range(self):
        for theta in (0.0, -0.5, 1.5):
            with self.subTest(theta=theta), self.assertRaises(InvalidInputError):
                StepSchedule(1.0, theta)

    def test_iteration_zero_rejected(self):
        ss = StepSchedule(1.0, 0.75)
        with self.assertRaises(InvalidInputError):
            step_size(ss, 0)
        with self.assertRaises(InvalidInputError):
            cumulative(ss, 0)

    def test_harmonic_sum(self):
        self.assertAlmostEqual(cumulative(StepSchedule(1.0, 1.0), 3), 11.0 / 6.0, places=15)

    def test_first_term(self):
        self.assertEqual(cumulative(StepSchedule(0.37, 0.6), 1), 0.37)

    def test_integral_comparison(self):
        ss = StepSchedule(0.5, 0.75)
        k = 10 ** 6
        self.assertAlmostEqual(cumulative(ss, k) / (ss.eta0 * k ** 0.25 / 0.25), 1.0, delta=0.05)

    def test_monotone(self):
        ss = StepSchedule(1.0, 0.75)
        etas = [step_size(ss, k) for k in range(1, 200)]
        thetas = [cumulative(ss, k) for k in range(1, 200)]
        self.assertTrue(all(b <= a for a, b in zip(etas, etas[1:])))
        self.assertTrue(all(b > a for a, b in zip(thetas, thetas[1:])))

    def test_cumulative_at(self):
        ss = StepSchedule(0.02, 0.75)
        ks = [1, 2, 4, 1000, 4096]
        for k, value in zip(ks, ss.cumulative_at(ks)):
            self.assertAlmostEqual(value, cumulative(ss, k), delta=1e-14 * value)

    def test_constant_step(self):
        cs = ConstantStep(0.01)
        self.assertEqual(step_size(cs, 7), 0.01)
        self.assertAlmostEqual(cumulative(cs, 250), 2.5, places=12)
        with self.assertRaises(InvalidInputError):
            ConstantStep(0.0)


class ValidateTest(SimpleTestCase):
    """Tests for the convergence-condition checker."""

    def test_default_schedule_valid(self):
        report = validate(StepSchedule(1.0, 0.75), depth_ratio=2.0 / 3.0, horizon=10 ** 6)
        self.assertEqual(report.verdict, 'valid')
        self.assertTrue(report.theta_in_valid_range)
        self.assertTrue(report.cond_theta_diverges)
        self.assertTrue(report.cond_product_vanishes)
        self.assertTrue(report.cond_technical)
        self.assertEqual(report.numeric_trends['k'], [10 ** 2, 10 ** 3, 10 ** 4, 10 ** 5, 10 ** 6])

    def test_slow_decay_invalid(self):
        report = validate(StepSchedule(1.0, 0.4), depth_ratio=2.0 / 3.0, horizon=10 ** 6)
        self.assertEqual(report.verdict, 'invalid')
        self.assertFalse(report.cond_product_vanishes)
        product = report.numeric_trends['product']
        self.assertGreater(product[-1], product[0])

    def test_harmonic_steps_valid(self):
        report = validate(StepSchedule(1.0, 1.0), depth_ratio=0.9, horizon=10 ** 6)
        self.assertEqual(report.verdict, 'valid')

    def test_theta_grid(self):
        for theta in (0.3, 0.45, 0.5, 0.55, 0.75, 1.0):
            report = validate(StepSchedule(1.0, theta), depth_ratio=2.0 / 3.0, horizon=10 ** 6)
            with self.subTest(theta=theta):
                self.assertEqual(report.verdict, 'valid' if theta > 0.5 else 'invalid')

    def test_verdict_precedence(self):
        """A failure seen by both checks is invalid; any disagreement is inconclusive."""
        def trends(product_rises):
            return {
                'k': [100, 1000],
                'theta_cum': [1.0, 5.0],
                'product': [1.0, 2.0] if product_rises else [2.0, 1.0],
                'technical': [1.0, 0.5],
            }

        cases = (
            (0.75, False, 'valid'),
            (0.75, True, 'inconclusive'),
            (0.4, True, 'invalid'),
            (0.4, False, 'inconclusive'),
        )
        for theta, rises, verdict in cases:
            with self.subTest(theta=theta, product_rises=rises):
                with patch('schedules.schedules._numeric_trends', return_value=trends(rises)):
                    report = validate(StepSchedule(1.0, theta), depth_ratio=0.5, horizon=10 ** 4)
                self.assertEqual(report.verdict, verdict)
                self.assertEqual(bool(report.notes), verdict == 'inconclusive')

    def test_depth_ratio_range(self):
        ss = StepSchedule(1.0, 0.75)
        for ratio in (0.0, 1.0, 1.5):
            with self.subTest(ratio=ratio), self.assertRaises(InvalidInputError):
                validate(ss, depth_ratio=ratio, horizon=10 ** 4)

    def test_short_horizon(self):
        with self.assertRaises(InvalidInputError):
            validate(StepSchedule(1.0, 0.75), depth_ratio=0.5, horizon=500)

    def test_constant_step_unsupported(self):
        with self.assertRaises(UnsupportedError):
            validate(ConstantStep(0.01), depth_ratio=0.5, horizon=10 ** 4)

    def test_serializable(self):
        data = validate(StepSchedule(1.0, 0.75), depth_ratio=0.5, horizon=12345).to_dict()
        self.assertEqual(data['numeric_trends']['k'][-1], 12345)
        self.assertIn(data['verdict'], ('valid', 'invalid', 'inconclusive'))


class RateExponentTest(SimpleTestCase):
    """Tests for the decay exponent."""

    def test_depth_limited(self):
        e_star = 0.8
        self.assertAlmostEqual(rate_exponent(2 * e_star, e_star, e_star / 4), 0.125, places=15)

    def test_convex_saturates(self):
        self.assertEqual(rate_exponent(1.0, 0.0, 0.5), 0.5)
        self.assertEqual(rate_exponent(1.0, 0.0, 3.0), 0.5)

    def test_double_well_default(self):
        e_star = 0.8077
        self.assertAlmostEqual(rate_exponent(1.5 * e_star, e_star, 0.3), 1.0 / 6.0, places=12)

    def test_below_critical_depth(self):
        with self.assertRaises(InvalidInputError):
            rate_exponent(0.5, 0.8, 0.3)
        with self.assertRaises(InvalidInputError):
            rate_exponent(0.8, 0.8, 0.3)

    def test_monotone_in_delta_and_E(self):
        deltas = np.linspace(0.01, 2.0, 50)
        rates = [rate_exponent(1.0, 0.5, d) for d in deltas]
        self.assertTrue(all(b >= a for a, b in zip(rates, rates[1:])))
        self.assertTrue(all(r <= 0.5 for r in rates))
        Es = np.linspace(0.6, 1.0, 50)
        rates = [rate_exponent(E, 0.5, 0.3) for E in Es]
        peak = int(np.argmax(rates))
        self.assertTrue(all(b >= a for a, b in zip(rates[:peak], rates[1:peak + 1])))
