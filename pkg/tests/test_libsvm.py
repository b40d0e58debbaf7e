import os
import tempfile
from unittest import TestCase
from unittest.mock import patch

import numpy as np

from basiskit.exceptions import ConfigError, DataFormatError
from basiskit.libsvm import (
    a1a_subset,
    densify,
    label_signs,
    load_problem,
    parse_libsvm,
    partition,
    read_libsvm,
    serialize_libsvm,
    synth_libsvm,
)
from basiskit.models.config import RunConfig
from tests.utils import data_path, write_a1a_like


class TestParse(TestCase):
    def test_valid_file(self):
        raw = read_libsvm(data_path('valid.libsvm'))
        self.assertEqual(len(raw.rows), 5)
        self.assertEqual(raw.max_index, 7)
        self.assertEqual([row.label for row in raw.rows], [1.0, -1.0, 1.0, -1.0, 1.0])
        self.assertEqual(raw.rows[0].features, [(1, 0.5), (3, -1.25), (7, 2.0)])
        self.assertEqual(raw.rows[2].features, [(5, 1.0)])

    def test_covtype_labels(self):
        self.assertEqual(label_signs([1.0, 2.0, 1.0]), [1.0, -1.0, 1.0])
        self.assertEqual(label_signs([0.0, 2.0, -3.0]), [-1.0, 1.0, -1.0])

    def _error(self, name: str) -> DataFormatError:
        with open(data_path(name), encoding='utf-8') as f:
            with self.assertRaises(DataFormatError) as cm:
                parse_libsvm(f)
        return cm.exception

    def test_unsorted_indices(self):
        self.assertEqual(self._error('unsorted.libsvm').line, 2)

    def test_zero_index(self):
        self.assertEqual(self._error('zero_index.libsvm').line, 2)

    def test_bad_label(self):
        self.assertEqual(self._error('bad_label.libsvm').line, 2)

    def test_missing_value(self):
        self.assertEqual(self._error('missing_value.libsvm').line, 3)

    def test_bad_value(self):
        self.assertEqual(self._error('bad_value.libsvm').line, 1)

    def test_nan_value(self):
        e = self._error('nan_value.libsvm')
        self.assertEqual(e.line, 1)
        self.assertIn('non-finite value', str(e))

    def test_empty(self):
        self.assertIn('empty dataset', str(self._error('empty.libsvm')))

    def test_invalid_utf8(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'latin1.libsvm')
            with open(path, mode='wb') as f:
                f.write(b'+1 1:0.5\n-1 2:1 3:\xff\n')
            with self.assertRaises(DataFormatError) as cm:
                read_libsvm(path)
        self.assertEqual(cm.exception.line, 2)
        self.assertIn('UTF-8', str(cm.exception))

    def test_read_names_the_file(self):
        with self.assertRaises(DataFormatError) as cm:
            read_libsvm(data_path('unsorted.libsvm'))
        self.assertIn('unsorted.libsvm', str(cm.exception))
        self.assertIn('line 2', str(cm.exception))

    def test_serialize_round_trip(self):
        raw = read_libsvm(data_path('valid.libsvm'))
        text = serialize_libsvm(raw)
        self.assertTrue(text.startswith('+1 1:0.5 3:-1.25 7:2.0\n'))
        self.assertEqual(parse_libsvm(text), raw)


class TestPartition(TestCase):
    def setUp(self):
        self.raw = parse_libsvm(
            '+1 1:1\n-1 2:1\n+1 3:1\n-1 1:2\n+1 2:2\n-1 3:2\n+1 1:3\n'
        )

    def test_densify(self):
        x = densify(self.raw)
        self.assertEqual(x.shape, (7, 3))
        self.assertEqual(x[3, 0], 2.0)
        self.assertEqual(densify(self.raw, d=2).shape, (7, 2))

    def test_equal_shards_drop_tail(self):
        shards = partition(self.raw, 3)
        self.assertEqual([s.m for s in shards], [2, 2, 2])
        np.testing.assert_array_equal(shards[1].labels, [1.0, -1.0])
        np.testing.assert_array_equal(shards[2].features[0], [0.0, 2.0, 0.0])

    def test_rows_limit(self):
        shards = partition(self.raw, 2, rows=4)
        self.assertEqual([s.m for s in shards], [2, 2])

    def test_too_many_clients(self):
        with self.assertRaises(ConfigError):
            partition(self.raw, 8)


class TestLoadProblem(TestCase):
    def test_synthetic(self):
        problem = load_problem(RunConfig(synth={'d': 6, 'r': 2, 'm': 10}, n=3, lam=0.01))
        self.assertEqual((problem.n, problem.d, problem.m), (3, 6, 10))
        self.assertEqual(problem.lam, 0.01)

    def test_from_path(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = write_a1a_like(tmp, rows=50, d=20, active=4)
            problem = load_problem(RunConfig(dataset=path, n=4, d=20))
        self.assertEqual((problem.n, problem.d, problem.m), (4, 20, 12))

    def test_catalogue_name(self):
        with tempfile.TemporaryDirectory() as tmp:
            write_a1a_like(tmp, rows=200)
            with patch.dict(os.environ, {'BASISKIT_DATA': tmp}):
                problem = load_problem(RunConfig(dataset_name='a1a', n=16))
        self.assertEqual((problem.n, problem.d, problem.m), (16, 123, 12))

    def test_catalogue_row_count_is_not_forced(self):
        with tempfile.TemporaryDirectory() as tmp:
            write_a1a_like(tmp, name='phishing', rows=1000, d=68, active=8)
            with patch.dict(os.environ, {'BASISKIT_DATA': tmp}):
                problem = load_problem(RunConfig(dataset_name='phishing', n=100))
        self.assertEqual((problem.n, problem.d, problem.m), (100, 68, 10))

    def test_rows_limit(self):
        with tempfile.TemporaryDirectory() as tmp:
            write_a1a_like(tmp, rows=200)
            with patch.dict(os.environ, {'BASISKIT_DATA': tmp}):
                problem = load_problem(RunConfig(dataset_name='a1a', rows=40, n=4))
        self.assertEqual(problem.m, 10)

    def test_unknown_name(self):
        with self.assertRaises(ConfigError):
            load_problem(RunConfig(dataset_name='iris'))

    def test_missing_file(self):
        with self.assertRaises(ConfigError):
            load_problem(RunConfig(dataset='/nonexistent/a1a'))


class TestA1aSubset(TestCase):
    def test_shape(self):
        problem = a1a_subset()
        self.assertEqual((problem.n, problem.d, problem.m), (4, 123, 100))
        self.assertEqual(problem.lam, 1e-3)
        for shard in problem.shards:
            np.testing.assert_array_equal(shard.features.sum(axis=1), np.full(100, 14.0))

    def test_labels_are_mixed(self):
        labels = np.concatenate([shard.labels for shard in a1a_subset().shards])
        self.assertGreater((labels > 0).mean(), 0.2)
        self.assertLess((labels > 0).mean(), 0.8)

    def test_deterministic(self):
        self.assertEqual(synth_libsvm(rows=20, seed=3), synth_libsvm(rows=20, seed=3))
        self.assertNotEqual(synth_libsvm(rows=20, seed=3), synth_libsvm(rows=20, seed=4))
