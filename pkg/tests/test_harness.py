import io
import os
import tempfile
from contextlib import redirect_stdout
from typing import Tuple
from unittest import TestCase

import numpy as np

from basiskit.cli import main
from basiskit.exceptions import ConfigError, OutputError
from basiskit.harness import bits_to_gap, cost_report, load_config, plot, run
from basiskit.libsvm import a1a_subset
from basiskit.models.config import Algorithm, BasisTag, CompressorSpec, RunConfig
from basiskit.models.records import ExperimentStatus
from basiskit.problems import QuadraticProblem, newton_reference
from tests.utils import synth_config


class TestRun(TestCase):
    def test_no_rounds(self):
        experiment = run(synth_config(max_rounds=0))
        self.assertEqual(len(experiment.records), 1)
        self.assertEqual(experiment.records[0].round, 0)
        self.assertEqual(experiment.status, ExperimentStatus.BUDGET)

    def test_converges(self):
        experiment = run(synth_config(max_rounds=30))
        self.assertEqual(experiment.status, ExperimentStatus.CONVERGED)
        self.assertLessEqual(experiment.records[-1].fgap, 1e-10)
        ups = [r.up_bits for r in experiment.records]
        self.assertTrue(all(b > a for a, b in zip(ups, ups[1:])))

    def test_target_reached_at_start(self):
        experiment = run(synth_config(target_gap=1e9))
        self.assertEqual(len(experiment.records), 1)
        self.assertEqual(experiment.status, ExperimentStatus.CONVERGED)

    def test_bit_budget(self):
        experiment = run(synth_config(max_bits=1000.0))
        self.assertEqual(len(experiment.records), 2)
        self.assertEqual(experiment.status, ExperimentStatus.BUDGET)

    def test_diverges(self):
        problem = QuadraticProblem([np.eye(2)] * 2, [np.ones(2)] * 2, lam=0.1)
        experiment = run(synth_config(d=2, r=1, n=2, algorithm='gd', stepsize=1e200), problem=problem)
        self.assertEqual(experiment.status, ExperimentStatus.DIVERGED)
        self.assertIsNotNone(experiment.message)

    def test_setup_bits_for_rotated_bases(self):
        experiment = run(synth_config(d=6, r=2, basis=BasisTag.SUBSPACE, max_rounds=0))
        self.assertEqual(experiment.setup_bits, 2 * 6 * 64)
        self.assertEqual(experiment.records[0].up_bits, 2 * 6 * 64)

    def test_bad_starting_point(self):
        with self.assertRaises(ConfigError):
            run(synth_config(d=6, x0=[0.0, 1.0]))

    def test_fednl_is_lowered(self):
        experiment = run(synth_config(algorithm='fednl', max_rounds=2))
        self.assertEqual(experiment.config.algorithm, Algorithm.BL1)

    def test_csv_is_deterministic(self):
        with tempfile.TemporaryDirectory() as tmp:
            contents = []
            for name in ('a.csv', 'b.csv'):
                path = os.path.join(tmp, name)
                config = synth_config(
                    max_rounds=5, p=0.5, output_csv=path,
                    matrix_compressor=CompressorSpec(kind='rand_k', k=4),
                )
                run(config, threads=2)
                with open(path, 'rb') as f:
                    contents.append(f.read())
        self.assertEqual(contents[0], contents[1])

    def test_csv_same_for_one_and_eight_workers(self):
        with tempfile.TemporaryDirectory() as tmp:
            contents = []
            for threads in (1, 8):
                path = os.path.join(tmp, f'{threads}.csv')
                config = synth_config(
                    n=8, max_rounds=5, p=0.5, output_csv=path,
                    matrix_compressor=CompressorSpec(kind='rand_k', k=4),
                )
                run(config, threads=threads)
                with open(path, 'rb') as f:
                    contents.append(f.read())
        self.assertEqual(contents[0], contents[1])


class TestBitSavings(TestCase):
    gap = 1e-6

    @classmethod
    def setUpClass(cls):
        cls.problem = a1a_subset()
        cls.reference = newton_reference(cls.problem)
        cls.base = RunConfig(dataset_name='a1a', rows=400, n=4, lam=1e-3, target_gap=cls.gap)

    def _run(self, **update):
        return run(self.base.model_copy(update=update), problem=self.problem, reference=self.reference)

    def test_bl1_needs_a_tenth_of_the_first_order_bits(self):
        bl1 = self._run(
            algorithm=Algorithm.BL1, max_rounds=500,
            matrix_compressor=CompressorSpec(kind='top_k', k='r'),
        )
        self.assertEqual(bl1.status, ExperimentStatus.CONVERGED)
        spent = bits_to_gap(bl1.records, self.gap)
        for algorithm in (Algorithm.GD, Algorithm.DIANA):
            with self.subTest(algorithm=algorithm):
                other = self._run(algorithm=algorithm, max_rounds=10 ** 6, max_bits=10.0 * spent)
                needed = bits_to_gap(other.records, self.gap)
                if needed is not None:
                    self.assertGreaterEqual(needed, 10.0 * spent)

    def test_bits_to_gap(self):
        experiment = run(synth_config(max_rounds=30))
        first = next(r for r in experiment.records if r.fgap <= 1e-3)
        self.assertEqual(bits_to_gap(experiment.records, 1e-3), first.up_bits + first.down_bits)
        self.assertEqual(bits_to_gap(experiment.records, 1e-3, count_download=False), first.up_bits)
        self.assertIsNone(bits_to_gap(experiment.records[:1], 0.0))


class TestCostReport(TestCase):
    def test_matches_run_ledger(self):
        config = synth_config(max_rounds=1, target_gap=0.0, matrix_compressor=CompressorSpec(kind='top_k', k='r'))
        report = cost_report(config)
        experiment = run(config)
        self.assertEqual(experiment.records[1].up_bits, report.up_total)
        self.assertEqual(experiment.records[1].down_bits, report.down_total)
        self.assertEqual(report.up['hessian'], 6 * (64 + 6))
        self.assertEqual(report.down, {'model': 6 * 64, 'xi': 1.0})

    def test_newton_floats(self):
        report = cost_report(synth_config(d=6, r=2, algorithm='newton', basis=BasisTag.SUBSPACE))
        self.assertEqual(report.up_floats, 2 * 2 + 6)
        self.assertEqual(report.setup_bits, 2 * 6 * 64)

    def test_theory(self):
        report = cost_report(synth_config(d=4, r=2, algorithm='bl3', basis=BasisTag.PSD), theory=True)
        theory = report.theory
        self.assertIsNotNone(theory)
        self.assertGreater(theory.hessian_entry_bound, 0.0)
        self.assertLessEqual(theory.hessian_lipschitz, theory.hessian_lipschitz_fro + 1e-12)
        self.assertAlmostEqual(theory.m5, 2.0 * theory.m2)
        self.assertEqual(len(theory.conditioning), 3)


class TestConfigAndPlot(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, name: str, text: str) -> str:
        path = os.path.join(self.tmp.name, name)
        with open(path, mode='w') as f:
            f.write(text)
        return path

    def test_load_config(self):
        path = self._write('run.json', '{"synth": {"d": 4, "r": 2, "m": 10}, "n": 2, "lambda": 0.01}')
        config = load_config(path)
        self.assertEqual(config.lam, 0.01)
        self.assertEqual(config.synth.d, 4)

    def test_load_config_errors(self):
        with self.assertRaises(ConfigError):
            load_config(os.path.join(self.tmp.name, 'missing.json'))
        with self.assertRaises(ConfigError):
            load_config(self._write('bad.json', '{"synth": {"d": 4, "r": 5, "m": 10}}'))
        with self.assertRaises(ConfigError):
            load_config(self._write('both.json', '{"dataset": "a1a", "synth": {"d": 4, "r": 2, "m": 10}}'))

    def test_plot(self):
        csvs = []
        for name in ('bl1', 'gd'):
            path = os.path.join(self.tmp.name, f'{name}.csv')
            run(synth_config(algorithm=name, max_rounds=1, output_csv=path))
            csvs.append(path)
        out = os.path.join(self.tmp.name, 'chart.svg')
        plot(csvs, out)
        with open(out) as f:
            svg = f.read()
        self.assertIn('id="bl1"', svg)
        self.assertIn('id="gd"', svg)

    def test_plot_bad_csv(self):
        path = self._write('broken.csv', 'x,y\n1,2\n')
        with self.assertRaises(OutputError):
            plot([path], os.path.join(self.tmp.name, 'chart.svg'))


class TestCli(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.config = os.path.join(self.tmp.name, 'run.json')
        with open(self.config, mode='w') as f:
            f.write('{"synth": {"d": 5, "r": 2, "m": 15}, "n": 2, "max_rounds": 20}')

    def tearDown(self):
        self.tmp.cleanup()

    def _main(self, *argv) -> Tuple[int, str]:
        out = io.StringIO()
        with redirect_stdout(out):
            code = main(list(argv))
        return code, out.getvalue()

    def test_run(self):
        code, text = self._main('run', self.config)
        self.assertEqual(code, 0)
        self.assertTrue(text.startswith('converged'))

    def test_cost(self):
        code, text = self._main('cost', self.config)
        self.assertEqual(code, 0)
        self.assertIn('"hessian"', text)

    def test_verify_basis(self):
        code, text = self._main('verify', 'basis')
        self.assertEqual(code, 0)
        self.assertNotIn('FAIL', text)

    def test_unknown_suite(self):
        code, _ = self._main('verify', 'everything')
        self.assertEqual(code, 2)

    def test_missing_config(self):
        code, _ = self._main('run', os.path.join(self.tmp.name, 'missing.json'))
        self.assertEqual(code, 2)


class TestShippedConfigs(TestCase):
    def test_configs_parse(self):
        root = os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'configs')
        names = sorted(n for n in os.listdir(root) if n.endswith('.json'))
        self.assertTrue(names)
        for name in names:
            load_config(os.path.join(root, name))
