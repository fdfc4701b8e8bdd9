# -*- coding: utf-8 -*-
"""
Unit tests for experiments app.
Run: python manage.py test experiments
"""
import json
import math
import tempfile
from io import StringIO
from pathlib import Path

from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase, override_settings
from scipy.special import erfc

from annealab.exceptions import InvalidInputError
from .config import ExperimentConfig, load_config, merge, parse_checkpoints
from .models import ExperimentRun
from .runner import ExperimentRunner
from .storage import RunDirectory, dumps, read_json, to_jsonable


def small_config(**changes) -> ExperimentConfig:
    """A double-well run that finishes in a second or two."""
    base = {
        'landscape': {'id': 'double_well', 'params': {'a': 0.2}},
        'cells': 2048,
        'cooling': {'E': None, 'E_multiplier': 1.5},
        'steps': {'eta0': 0.02, 'theta': 0.75},
        'delta': 0.3,
        'n_chains': 40,
        'checkpoints': 'geometric(2, 10)',
        'seed': 7,
        'horizon': 1000,
    }
    return load_config(overrides=merge(base, changes))


class CheckpointTest(SimpleTestCase):
    """Tests for checkpoint specs."""

    def test_geometric(self):
        ks = parse_checkpoints('geometric(2, 20)')
        self.assertEqual(len(ks), 20)
        self.assertEqual((ks[0], ks[-1]), (2, 2 ** 20))

    def test_small_base_merges_duplicates(self):
        ks = parse_checkpoints('geometric(1.5, 6)')
        self.assertEqual(ks, sorted(set(ks)))
        self.assertTrue(all(b > a for a, b in zip(ks, ks[1:])))

    def test_list(self):
        self.assertEqual(parse_checkpoints([1, 10, 100]), [1, 10, 100])

    def test_invalid(self):
        for value in ([4, 2], [0, 3], [], [1.5, 3], 'geometric(1, 5)', 'linear(2, 3)'):
            with self.subTest(value=value):
                with self.assertRaises(InvalidInputError):
                    parse_checkpoints(value)


class ExperimentConfigTest(SimpleTestCase):
    """Tests for config layering and the config echo."""

    def test_defaults(self):
        cfg = load_config()
        self.assertEqual(cfg.landscape_id, 'double_well')
        self.assertEqual(cfg.landscape_params, {'a': 0.2})
        self.assertEqual(cfg.E_multiplier, 1.5)
        self.assertEqual(cfg.theta, 0.75)
        self.assertEqual(cfg.n_chains, 10000)
        self.assertEqual(cfg.checkpoint_list()[-1], 2 ** 20)
        self.assertEqual(cfg.mu0, {'kind': 'point_mass', 'at': 'dominating_minimum'})

    def test_echo_round_trip(self):
        for cfg in (load_config(), small_config(checkpoints=[3, 30, 300]),
                    small_config(mu0={'kind': 'gaussian', 'mean': [0.5], 'stddev': 0.1})):
            echo = json.loads(dumps(cfg.to_dict()))
            self.assertEqual(ExperimentConfig.from_dict(echo), cfg)

    def test_file_then_flags(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'run.json'
            path.write_text(json.dumps({'delta': 0.4, 'seed': 3, 'steps': {'theta': 0.9}}))
            cfg = load_config(path, {'seed': 11})
        self.assertEqual((cfg.delta, cfg.seed, cfg.theta), (0.4, 11, 0.9))
        self.assertEqual(cfg.eta0, 'auto')

    def test_switching_landscape_drops_params(self):
        cfg = load_config(overrides={'landscape': {'id': 'triple_well'}})
        self.assertEqual((cfg.landscape_id, cfg.landscape_params), ('triple_well', {}))
        cfg = load_config(overrides={'landscape': {'params': {'a': 0.1}}})
        self.assertEqual((cfg.landscape_id, cfg.landscape_params), ('double_well', {'a': 0.1}))

    def test_invalid(self):
        bad = [
            {'n_chains': 0},
            {'delta': -1.0},
            {'steps': {'theta': 1.5}},
            {'process': 'quantum'},
            {'cooling': {'E': None, 'E_multiplier': None}},
            {'mu0': {'kind': 'uniform'}},
            {'horizon': 10},
            {'ci_level': 1.0},
            {'unknown_key': 1},
        ]
        for override in bad:
            with self.subTest(override=override):
                with self.assertRaises(InvalidInputError):
                    load_config(overrides=override)

    def test_missing_file(self):
        with self.assertRaises(InvalidInputError):
            load_config('/nonexistent/run.json')

    def test_resolve_E(self):
        cfg = load_config()
        self.assertAlmostEqual(cfg.resolve_E(0.8), 1.2)
        with self.assertRaises(InvalidInputError):
            cfg.resolve_E(0.0)
        self.assertEqual(cfg.replace(E=2.0).resolve_E(0.8), 2.0)
        with self.assertRaises(InvalidInputError):
            cfg.check_cooling(0.4, 0.8)
        cfg.check_cooling(0.4, 0.8, force=True)

    def test_grid_shape_defaults_per_dimension(self):
        cfg = load_config()
        self.assertEqual(cfg.grid_shape(1), 16384)
        self.assertEqual(cfg.grid_shape(2), 400)
        self.assertEqual(cfg.replace(cells=(300, 200)).grid_shape(2), (300, 200))


class StorageTest(SimpleTestCase):
    """Tests for JSON artifacts and run directories."""

    def test_jsonable(self):
        import numpy as np
        data = to_jsonable({'a': np.float64(0.1), 'b': np.int64(3), 'c': np.array([1.5, np.nan]),
                            'd': np.bool_(True), 'e': float('inf'), 1: (2, 3)})
        self.assertEqual(data, {'a': 0.1, 'b': 3, 'c': [1.5, None], 'd': True, 'e': None, '1': [2, 3]})
        self.assertEqual(json.loads(dumps({'x': 0.1 + 0.2}))['x'], 0.1 + 0.2)

    def test_open_and_resume(self):
        with tempfile.TemporaryDirectory() as tmp:
            run_dir = RunDirectory(Path(tmp) / 'run')
            self.assertFalse(run_dir.open('{"a": 1}\n'))
            self.assertEqual(run_dir.status, 'incomplete')
            marker = run_dir.block_path(0)
            marker.write_bytes(b'x')
            self.assertTrue(run_dir.open('{"a": 1}\n', resume=True))
            self.assertTrue(marker.exists())
            self.assertFalse(run_dir.open('{"a": 2}\n', resume=True))
            self.assertFalse(marker.exists())
            self.assertEqual(read_json(run_dir.path(run_dir.CONFIG)), {'a': 2})


@override_settings(CHAIN_BLOCK_SIZE=16)
class ExperimentRunnerTest(TestCase):
    """End-to-end runs on a small double-well experiment."""

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def run_config(self, name, workers=1, **changes):
        cfg = small_config(output_dir=str(self.root / name), **changes)
        return ExperimentRunner(cfg, workers=workers).run()

    def test_artifacts(self):
        result = self.run_config('a')
        run_dir = RunDirectory(result.output_dir)
        for name in RunDirectory.ARTIFACTS:
            self.assertTrue(run_dir.path(name).exists(), name)
        self.assertEqual(run_dir.status, 'complete')
        self.assertEqual(len(list(run_dir.blocks_dir.glob('*.npz'))), 3)

        echo = read_json(run_dir.path(run_dir.CONFIG))
        self.assertEqual(ExperimentConfig.from_dict(echo), small_config(output_dir=str(self.root / 'a')))

        stored = read_json(run_dir.path(run_dir.RESULT))
        self.assertEqual(stored['content_hash'], result.content_hash)
        self.assertEqual(len(stored['gibbs_reference']), 10)
        self.assertAlmostEqual(result.critical_depth, 0.8077, delta=2e-3)
        self.assertAlmostEqual(result.E, 1.5 * result.critical_depth)
        self.assertAlmostEqual(result.rate, min(0.3 / result.E, (1 - 1 / 1.5) / 2))
        self.assertEqual(result.schedule['verdict'], 'valid')
        self.assertIsNotNone(result.bound_check)

        run = ExperimentRun.objects.get(run_id=result.run_id)
        self.assertEqual(run.status, 'complete')
        self.assertEqual(run.content_hash, result.content_hash)
        self.assertIsNotNone(run.finished_at)

    def test_starts_in_dominating_well(self):
        result = self.run_config('a', checkpoints=[1])
        x0 = result.depth['minima'][result.depth['dominating_index']]['x'][0]
        self.assertGreater(x0, 0.5)

    def test_reproducible_across_workers(self):
        one = self.run_config('one', workers=1)
        three = self.run_config('three', workers=3)
        self.assertEqual(one.content_hash, three.content_hash)
        tail = RunDirectory.TAIL
        self.assertEqual((self.root / 'one' / tail).read_bytes(), (self.root / 'three' / tail).read_bytes())

    def test_seed_changes_outputs(self):
        a = self.run_config('a')
        b = self.run_config('b', seed=8)
        self.assertNotEqual(a.content_hash, b.content_hash)

    def test_resume(self):
        first = self.run_config('r')
        run_dir = RunDirectory(first.output_dir)
        run_dir.block_path(1).unlink()
        run_dir.set_status('incomplete')
        cfg = small_config(output_dir=first.output_dir)
        second = ExperimentRunner(cfg, resume=True).run()
        self.assertTrue(second.metadata['resumed'])
        self.assertEqual(second.content_hash, first.content_hash)
        self.assertEqual(run_dir.status, 'complete')

    def test_trapped_regime_needs_force(self):
        cfg = small_config(output_dir=str(self.root / 't'), cooling={'E_multiplier': 0.5})
        with self.assertRaises(InvalidInputError):
            ExperimentRunner(cfg).run()
        result = ExperimentRunner(cfg, force=True).run()
        self.assertIsNone(result.rate)
        self.assertIsNone(result.bound_check)
        self.assertEqual(result.schedule['verdict'], 'invalid')

    def test_invalid_schedule_needs_force(self):
        cfg = small_config(output_dir=str(self.root / 's'), steps={'theta': 0.4})
        with self.assertRaises(InvalidInputError):
            ExperimentRunner(cfg).run()
        self.assertEqual(ExperimentRunner(cfg, force=True).run().status, 'complete')

    def test_divergence_marks_failed(self):
        result = self.run_config('d', steps={'eta0': 5.0}, mu0={'kind': 'point_mass', 'x0': [1.9]})
        self.assertEqual(result.status, 'failed')
        self.assertGreater(result.divergence['fraction'], 0.1)
        self.assertEqual(RunDirectory(result.output_dir).status, 'failed')
        self.assertEqual(ExperimentRun.objects.get(run_id=result.run_id).status, 'failed')

    def test_continuous_process(self):
        result = self.run_config('c', process='continuous', dt=0.01, checkpoints=[10, 100, 1000])
        self.assertEqual(result.schedule['verdict'], 'not_applicable')
        rows = (self.root / 'c' / RunDirectory.TAIL).read_text().splitlines()[1:]
        thetas = [float(r.split(',')[1]) for r in rows]
        for got, want in zip(thetas, (0.1, 1.0, 10.0)):
            self.assertAlmostEqual(got, want, places=9)


class CommandTest(TestCase):
    """Tests for the management commands and their exit codes."""

    def call(self, *args):
        out = StringIO()
        call_command(*args, stdout=out, stderr=StringIO())
        return out.getvalue()

    def call_allowing_failure(self, *args):
        """Output and exit code of a command that may end in an experiment-level failure."""
        out = StringIO()
        try:
            call_command(*args, stdout=out, stderr=StringIO())
        except CommandError as exc:
            self.assertEqual(exc.returncode, 1, str(exc))
            return out.getvalue(), 1
        return out.getvalue(), 0

    def test_depth(self):
        data = json.loads(self.call('depth', '--landscape', 'double_well', '--a', '0.2', '--cells', '16384'))
        self.assertAlmostEqual(data['critical_depth'], 0.8077, delta=1e-3)
        data = json.loads(self.call('depth', '--landscape', 'quadratic'))
        self.assertEqual(data['critical_depth'], 0.0)

    def test_depth_assumptions(self):
        data = json.loads(self.call('depth', '--landscape', 'double_well', '--cells', '1024', '--assumptions'))
        self.assertTrue(data['assumptions']['growth_ok'])

    def test_unknown_landscape(self):
        with self.assertRaises(CommandError) as cm:
            self.call('depth', '--landscape', 'nope')
        self.assertEqual(cm.exception.returncode, 2)
        self.assertIn('double_well', str(cm.exception))

    def test_validate_schedule(self):
        for theta, verdict in ((0.75, 'valid'), (0.4, 'invalid'), (0.5, 'invalid')):
            with self.subTest(theta=theta):
                data = json.loads(self.call('validate_schedule', '--theta', str(theta), '--cells', '2048',
                                            '--eta0', '0.05', '--horizon', '100000'))
                self.assertEqual(data['verdict'], verdict)

    def test_gibbs_tail(self):
        data = json.loads(self.call('gibbs_tail', '--landscape', 'quadratic', '--tau', '1', '--delta', '0.5'))
        self.assertAlmostEqual(data['rows'][0]['p'], erfc(1.0 / math.sqrt(2.0)), delta=1e-6)

    def test_spectral(self):
        data = json.loads(self.call('spectral', '--landscape', 'quadratic', '--taus', '1.0'))
        self.assertAlmostEqual(data['gap'], 1.0, delta=0.01)
        data = json.loads(self.call('spectral', '--landscape', 'double_well', '--cells', '16384'))
        self.assertAlmostEqual(data['fitted_barrier'] / data['reference_depth'], 1.0, delta=0.10)
        with self.assertRaises(CommandError) as cm:
            self.call('spectral', '--landscape', 'double_well_2d')
        self.assertEqual(cm.exception.returncode, 2)

    @override_settings(CHAIN_BLOCK_SIZE=16)
    def test_anneal_and_fit(self):
        with tempfile.TemporaryDirectory() as tmp:
            out = Path(tmp) / 'run'
            text, code = self.call_allowing_failure(
                'anneal', '--cells', '2048', '--eta0', '0.02', '--n-chains', '40',
                '--checkpoints', 'geometric(2, 10)', '--horizon', '1000', '--seed', '7',
                '--out', str(out))
            result = read_json(out / 'result.json')
            self.assertEqual(result['status'], 'complete')
            self.assertTrue(ExperimentRun.objects.filter(run_id=result['run_id']).exists())
            if code == 0:
                self.assertIn('complete', text)
            else:
                self.assertFalse(result['bound_check']['holds'])

            if result['fit'] is not None:
                text, _ = self.call_allowing_failure('fit', '--tail', str(out / 'tail.csv'))
                data = json.loads(text)
                self.assertEqual(data['fit']['slope'], result['fit']['slope'])

    def test_anneal_invalid_input(self):
        with self.assertRaises(CommandError) as cm:
            self.call('anneal', '--cells', '2048', '--theta', '0.4', '--n-chains', '4', '--horizon', '1000')
        self.assertEqual(cm.exception.returncode, 2)

    def test_fit_missing_file(self):
        with self.assertRaises(CommandError) as cm:
            self.call('fit', '--tail', '/nonexistent/tail.csv')
        self.assertEqual(cm.exception.returncode, 2)
