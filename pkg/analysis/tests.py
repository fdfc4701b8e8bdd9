# -*- coding: utf-8 -*-
"""
Unit tests for analysis app.
Run: python manage.py test analysis
"""
import math
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase
from scipy.linalg import eigh, eigvalsh_tridiagonal
from scipy.special import erfc

from annealab.exceptions import InsufficientDataError, InvalidInputError, UnsupportedError
from depth.grid import discretize
from dynamics.chains import Checkpoint, Trajectory
from dynamics.ensemble import EnsembleBlock
from dynamics.gibbs import GibbsSampler1D
from dynamics.streams import UniformStream
from landscapes.catalog import get_landscape, quadratic
from .quadrature import gibbs_measure_1d, gibbs_tail_quadrature, laplace_check
from .spectral import (
    LOG_MASS_CUTOFF, InverseGenerator, birth_death_chain, eyring_kramers_fit, generator_tridiagonal,
    lowest_eigenvalues, spectral_gap_1d,
)
from .tails import (
    TailCurve, TailRow, estimate_tail, fit_decay, theoretical_bound_check, wilson_interval,
)


def synthetic_curve(p_of_theta, thetas, n=10 ** 6):
    rows = []
    for k, theta in enumerate(thetas, start=1):
        p = float(p_of_theta(theta))
        m = int(round(p * n))
        lo, hi = wilson_interval(m, n)
        rows.append(TailRow(k, theta, 1.0, n, m, m / n, lo, hi))
    return TailCurve(delta=0.3, rows=rows)


def block_from(f_values, checkpoints):
    f_values = np.asarray(f_values, dtype=float)
    n, c = f_values.shape
    return EnsembleBlock(
        chain_ids=np.arange(n), checkpoints=np.asarray(checkpoints), theta=np.arange(1.0, c + 1),
        tau=np.ones(c), f_values=f_values, diverged=np.isinf(f_values[:, -1]), divergence_k=np.zeros(n, dtype=int),
    )


class WilsonTest(SimpleTestCase):
    """Tests for the Wilson score interval."""

    def test_half_proportion(self):
        lo, hi = wilson_interval(50, 100, 0.95)
        self.assertAlmostEqual(lo, 0.404, delta=1e-3)
        self.assertAlmostEqual(hi, 0.596, delta=1e-3)

    def test_empty_exceedance(self):
        lo, hi = wilson_interval(0, 1000)
        self.assertEqual(lo, 0.0)
        self.assertGreater(hi, 0.0)

    def test_coverage(self):
        rng = np.random.default_rng(0)
        p, n = 0.3, 100
        counts = rng.binomial(n, p, size=10 ** 4)
        covered = 0
        for m in counts:
            lo, hi = wilson_interval(int(m), n)
            covered += lo <= p <= hi
        self.assertGreaterEqual(covered / 10 ** 4, 0.93)


class EstimateTailTest(SimpleTestCase):
    """Tests for tail-probability estimation."""

    def test_all_below(self):
        curve = estimate_tail(block_from(np.full((20, 3), 0.1), [1, 2, 4]), delta=0.3)
        for row in curve.rows:
            self.assertEqual((row.p_hat, row.ci_lo), (0.0, 0.0))

    def test_counts_and_divergence(self):
        f = np.array([[0.5, 0.1], [0.2, 0.4], [0.1, np.inf], [0.9, 0.05]])
        curve = estimate_tail(block_from(f, [10, 20]), delta=0.3)
        self.assertEqual([r.n_exceed for r in curve.rows], [2, 2])
        self.assertEqual([r.p_hat for r in curve.rows], [0.5, 0.5])
        for r in curve.rows:
            self.assertTrue(r.ci_lo <= r.p_hat <= r.ci_hi)

    def test_unreachable_delta(self):
        curve = estimate_tail(block_from(np.random.default_rng(1).uniform(0, 2, (50, 4)), [1, 2, 3, 4]), delta=10.0)
        self.assertTrue(all(r.p_hat == 0.0 for r in curve.rows))

    def test_trajectories_must_share_grid(self):
        a = Trajectory(0, [Checkpoint(1, 0.1, 1.0, (0.0,), 0.2), Checkpoint(2, 0.2, 1.0, (0.0,), 0.2)])
        b = Trajectory(1, [Checkpoint(1, 0.1, 1.0, (0.0,), 0.2), Checkpoint(3, 0.3, 1.0, (0.0,), 0.2)])
        with self.assertRaises(InvalidInputError):
            estimate_tail([a, b], delta=0.1)
        curve = estimate_tail([a, a], delta=0.1)
        self.assertEqual([r.k for r in curve.rows], [1, 2])

    def test_csv_round_trip(self):
        curve = synthetic_curve(lambda t: 0.3 * t ** -0.2, np.geomspace(1, 1e4, 6))
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'tail.csv'
            curve.to_csv(path)
            header = path.read_text().splitlines()[0]
            loaded = TailCurve.from_csv(path, delta=0.3)
        self.assertEqual(header, 'k,theta,tau,n,n_exceed,p_hat,ci_lo,ci_hi')
        self.assertEqual(loaded.rows, curve.rows)


class FitDecayTest(SimpleTestCase):
    """Tests for the log-log decay fit."""

    def test_exact_power_law(self):
        thetas = np.geomspace(1.0, 1e6, 12)
        rows = [TailRow(k, t, 1.0, 10 ** 9, 10 ** 3, t ** -0.25, 0.0, 1.0) for k, t in enumerate(thetas, 1)]
        fit = fit_decay(TailCurve(0.3, rows))
        self.assertAlmostEqual(fit.slope, -0.25, places=12)
        self.assertAlmostEqual(fit.r_squared, 1.0, places=12)
        self.assertEqual(fit.n_points, 12)

    def test_noisy_power_law(self):
        rng = np.random.default_rng(3)
        thetas = np.geomspace(10.0, 1e5, 15)
        p = 0.3 * thetas ** (-1.0 / 6.0) * (1.0 + 0.01 * rng.standard_normal(len(thetas)))
        rows = [TailRow(k, t, 1.0, 10 ** 6, 10 ** 4, pk, 0.0, 1.0) for k, (t, pk) in enumerate(zip(thetas, p), 1)]
        self.assertAlmostEqual(fit_decay(TailCurve(0.3, rows)).slope, -1.0 / 6.0, delta=0.02)

    def test_flat_curve(self):
        rows = [TailRow(k, float(2 ** k), 1.0, 100, 40, 0.4, 0.3, 0.5) for k in range(1, 8)]
        self.assertAlmostEqual(fit_decay(TailCurve(0.3, rows)).slope, 0.0, places=12)

    def test_sparse_rows_excluded(self):
        rows = [TailRow(k, float(2 ** k), 1.0, 1000, m, m / 1000, 0.0, 1.0)
                for k, m in zip(range(1, 7), (400, 200, 100, 4, 2, 0))]
        with self.assertRaises(InsufficientDataError):
            fit_decay(TailCurve(0.3, rows), burn_in_theta=5.0)
        self.assertEqual(fit_decay(TailCurve(0.3, rows)).n_points, 3)

    def test_burn_in_fallback(self):
        rows = [TailRow(k, float(k), 1.0, 100, 50 - k, (50 - k) / 100, 0.0, 1.0) for k in range(1, 6)]
        fit = fit_decay(TailCurve(0.3, rows), burn_in_theta=1e3)
        self.assertEqual(fit.n_points, 5)
        self.assertTrue(fit.notes)

    def test_burn_in_applied(self):
        rows = [TailRow(k, float(k), 1.0, 100, 50 - k, (50 - k) / 100, 0.0, 1.0) for k in range(1, 9)]
        fit = fit_decay(TailCurve(0.3, rows), burn_in_theta=4.0)
        self.assertEqual((fit.n_points, fit.burn_in_k), (5, 4))


class BoundCheckTest(SimpleTestCase):
    """Tests for the C * Theta^-rate bound."""

    def test_exact_curve_holds(self):
        rate = 1.0 / 6.0
        curve = synthetic_curve(lambda t: 0.4 * t ** -rate, np.geomspace(2.0, 2.0 ** 20, 20))
        for eps in (0.01, 0.05):
            check = theoretical_bound_check(curve, rate, eps)
            self.assertTrue(check.holds)
            self.assertGreater(check.fitted_C, 0.0)

    def test_flat_curve_fails(self):
        curve = synthetic_curve(lambda t: 0.5, np.geomspace(2.0, 2.0 ** 20, 20))
        check = theoretical_bound_check(curve, 1.0 / 6.0, 0.01)
        self.assertFalse(check.holds)
        self.assertTrue(check.violations)

    def test_too_few_rows(self):
        curve = synthetic_curve(lambda t: 0.5, [1.0])
        self.assertFalse(theoretical_bound_check(curve, 0.1, 0.01).holds)

    def test_invalid_arguments(self):
        curve = synthetic_curve(lambda t: 0.5, [1.0, 2.0])
        with self.assertRaises(InvalidInputError):
            theoretical_bound_check(curve, -0.1, 0.01)
        with self.assertRaises(InvalidInputError):
            theoretical_bound_check(curve, 0.1, 0.0)


class QuadratureTest(SimpleTestCase):
    """Tests for Gibbs tail quadrature."""

    def test_normal_tail(self):
        g = discretize(quadratic(half_width=8.0), 2 ** 16)
        expected = erfc(1.0 / math.sqrt(2.0))
        self.assertAlmostEqual(expected, 0.317311, delta=1e-6)
        self.assertAlmostEqual(gibbs_tail_quadrature(g, 1.0, 0.5), expected, delta=1e-6)

    def test_zero_level(self):
        land = get_landscape('double_well')
        g = discretize(land, 2 ** 16)
        self.assertAlmostEqual(gibbs_tail_quadrature(g, 0.1, 0.0), 1.0, delta=1e-9)
        self.assertEqual(gibbs_tail_quadrature(g, 0.1, -1.0), 1.0)

    def test_exponent_under_halving(self):
        """-tau ln P(f > delta) approaches delta as tau shrinks."""
        g = discretize(get_landscape('double_well'), 2 ** 16)
        delta = 0.3
        errors = []
        for tau in (0.04, 0.02, 0.01, 0.005):
            p = gibbs_tail_quadrature(g, tau, delta)
            errors.append(abs(-tau * math.log(p) - delta) / delta)
        self.assertTrue(all(b < a for a, b in zip(errors, errors[1:])))
        self.assertLess(errors[2], 0.10)

    def test_decay_in_log_time(self):
        """Under tau = E / ln t the tail decays like t^(-delta / E)."""
        g = discretize(get_landscape('double_well'), 2 ** 16)
        E, delta = 1.0, 0.3
        log_t = np.linspace(20.0, 80.0, 13)
        log_p = [math.log(gibbs_tail_quadrature(g, E / lt, delta)) for lt in log_t]
        slope = np.polyfit(log_t, log_p, 1)[0]
        self.assertAlmostEqual(slope / (-delta / E), 1.0, delta=0.10)

    def test_second_order_convergence(self):
        land = get_landscape('double_well')
        q = [gibbs_tail_quadrature(discretize(land, 2 ** k), 0.2, 0.3) for k in range(10, 14)]
        diffs = np.diff(q)
        for coarse, fine in zip(diffs, diffs[1:]):
            self.assertTrue(3.0 < coarse / fine < 5.0)

    def test_two_dimensional_indicator(self):
        g = discretize(quadratic(dim=2, half_width=5.0), 1000)
        self.assertAlmostEqual(gibbs_tail_quadrature(g, 1.0, 0.5), math.exp(-0.5), delta=2e-3)

    def test_measure_cdf(self):
        m = gibbs_measure_1d(discretize(get_landscape('double_well'), 4096), 0.1)
        self.assertTrue(np.all(np.diff(m.cdf) >= 0))
        self.assertEqual(m.cdf[-1], 1.0)
        self.assertGreater(m.z_tau, 0.0)
        with self.assertRaises(UnsupportedError):
            gibbs_measure_1d(discretize(get_landscape('double_well_2d'), (10, 10)), 0.1)

    def test_sampler_matches_quadrature(self):
        land = get_landscape('double_well')
        g = discretize(land, 2 ** 14)
        xs = GibbsSampler1D(g, 0.1).sample(UniformStream(21), 10 ** 5)
        frac = float(np.mean(land.values(xs.reshape(-1, 1)) > 0.3))
        p = gibbs_tail_quadrature(g, 0.1, 0.3)
        self.assertAlmostEqual(frac, p, delta=3 * math.sqrt(p * (1 - p) / 10 ** 5))


class LaplaceTest(SimpleTestCase):
    """Tests for Z_tau ~ C tau^(d/2)."""

    def test_gaussian_exact(self):
        fit = laplace_check(discretize(quadratic(), 2 ** 14))
        self.assertAlmostEqual(fit.slope, 0.5, places=6)

    def test_double_well(self):
        fit = laplace_check(discretize(get_landscape('double_well'), 2 ** 14))
        self.assertAlmostEqual(fit.slope, 0.5, delta=0.025)
        self.assertEqual(fit.notes, [])

    def test_double_well_2d(self):
        fit = laplace_check(discretize(get_landscape('double_well_2d'), (512, 512)))
        self.assertAlmostEqual(fit.slope, 1.0, delta=0.05)

    def test_taus_must_decrease(self):
        with self.assertRaises(InvalidInputError):
            laplace_check(discretize(quadratic(), 256), [0.02, 0.05])


class SpectralTest(SimpleTestCase):
    """Tests for the generator spectral gap and the barrier fit."""

    def test_ornstein_uhlenbeck_gap(self):
        land = quadratic(half_width=8.0)
        for tau in (0.1, 0.5, 1.0):
            with self.subTest(tau=tau):
                self.assertAlmostEqual(spectral_gap_1d(land, tau, 2048), 1.0, delta=0.01)

    def test_null_eigenvalue_and_positivity(self):
        for land, tau, cells in ((quadratic(half_width=8.0), 1.0, 512),
                                 (get_landscape('double_well'), 0.1, 512),
                                 (get_landscape('double_well'), 0.3, 16384)):
            with self.subTest(tau=tau, cells=cells):
                eig = lowest_eigenvalues(land, tau, cells)
                self.assertLessEqual(abs(eig[0]), 1e-10)
                self.assertGreater(eig[1], 0.0)

    def test_inverse_generator_inverts_flux_form(self):
        chain = birth_death_chain(get_landscape('double_well'), 0.3, 128)
        pi, c = np.exp(chain.log_pi), np.exp(chain.log_c)
        flux = np.diag(1.0 / pi[:-1] + 1.0 / pi[1:]) - np.diag(1.0 / pi[1:-1], 1) - np.diag(1.0 / pi[1:-1], -1)
        dual = np.sqrt(c)[:, None] * flux * np.sqrt(c)[None, :]
        inverse = InverseGenerator(chain)
        np.testing.assert_allclose(dual @ inverse.dense(), np.eye(chain.n_edges), atol=1e-8)
        w = np.sin(np.arange(chain.n_edges))
        np.testing.assert_allclose(inverse.matvec(w), inverse.dense() @ w, rtol=1e-9, atol=1e-9)

    def test_gap_matches_tridiagonal_spectrum_at_high_temperature(self):
        land = get_landscape('double_well')
        diag, off = generator_tridiagonal(land, 0.3, 2048)
        reference = eigvalsh_tridiagonal(diag, off, select='i', select_range=(1, 1))[0]
        self.assertAlmostEqual(spectral_gap_1d(land, 0.3, 2048) / reference, 1.0, delta=1e-6)

    def test_gap_relative_precision_at_low_temperature(self):
        land = get_landscape('double_well')
        for tau in (0.05, 0.03):
            with self.subTest(tau=tau, cells=2048):
                inverse = InverseGenerator(birth_death_chain(land, tau, 2048))
                top = eigh(inverse.dense(), eigvals_only=True, subset_by_index=[inverse.size - 1, inverse.size - 1])
                self.assertAlmostEqual(spectral_gap_1d(land, tau, 2048) * top[0], 1.0, delta=1e-8)
            with self.subTest(tau=tau, cells=16384):
                inverse = InverseGenerator(birth_death_chain(land, tau, 16384))
                v = np.ones(inverse.size)
                for _ in range(60):
                    v = inverse.matvec(v)
                    v /= np.linalg.norm(v)
                top = float(v @ inverse.matvec(v))
                gap = spectral_gap_1d(land, tau, 16384)
                self.assertTrue(math.isfinite(gap) and gap > 0)
                self.assertAlmostEqual(gap * top, 1.0, delta=1e-8)

    def test_gap_closes_with_temperature(self):
        land = get_landscape('double_well')
        gaps = [spectral_gap_1d(land, tau, 2048) for tau in (0.2, 0.15, 0.1, 0.075, 0.05)]
        self.assertTrue(all(b < a for a, b in zip(gaps, gaps[1:])))
        self.assertTrue(all(g > 0 for g in gaps))

    def test_low_temperature_sweep(self):
        land = get_landscape('double_well')
        taus = [0.1, 0.075, 0.05, 0.04, 0.03]
        for cells in (2048, 16384):
            with self.subTest(cells=cells):
                report = eyring_kramers_fit(land, taus, cells, e_star=land.analytic_depth)
                self.assertTrue(all(math.isfinite(g) and g > 0 for g in report.gaps))
                self.assertTrue(all(b < a for a, b in zip(report.gaps, report.gaps[1:])))
                self.assertLess(report.relative_error, 0.10)

    def test_far_tails_are_dropped(self):
        land = quadratic()
        chain = birth_death_chain(land, 0.03, 2048)
        self.assertLess(chain.n_edges, 2047)
        self.assertLessEqual(float(-chain.log_pi.min()), LOG_MASS_CUTOFF)
        self.assertAlmostEqual(spectral_gap_1d(land, 0.03, 2048), 1.0, delta=0.02)

    def test_quadratic_has_no_barrier(self):
        report = eyring_kramers_fit(quadratic(), [0.3, 0.2, 0.1, 0.05], 2048)
        self.assertLess(abs(report.fitted_barrier), 0.02)

    def test_double_well_barrier(self):
        land = get_landscape('double_well')
        report = eyring_kramers_fit(land, [0.15, 0.125, 0.1, 0.075, 0.05], 2048, e_star=land.analytic_depth)
        self.assertAlmostEqual(report.fitted_barrier / land.analytic_depth, 1.0, delta=0.10)
        self.assertLess(report.relative_error, 0.10)
        self.assertGreater(report.fit_r_squared, 0.9)

    def test_triple_well_barrier(self):
        land = get_landscape('triple_well')
        report = eyring_kramers_fit(land, [0.15, 0.125, 0.1, 0.09, 0.08], 2048)
        self.assertAlmostEqual(report.fitted_barrier / land.analytic_depth, 1.0, delta=0.10)

    def test_preconditions(self):
        with self.assertRaises(UnsupportedError):
            spectral_gap_1d(get_landscape('double_well_2d'), 0.1, 256)
        with self.assertRaises(InvalidInputError):
            spectral_gap_1d(quadratic(), 0.1, 64)
        with self.assertRaises(InvalidInputError):
            eyring_kramers_fit(quadratic(), [0.1, 0.2], 256)
        with self.assertRaises(InvalidInputError):
            eyring_kramers_fit(quadratic(), [0.5, 0.2], 256)
