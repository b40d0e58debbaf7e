import os
import tempfile
from unittest import TestCase

from basiskit.exceptions import OutputError
from basiskit.models.records import RunRecord
from basiskit.output import CSV_HEADER, read_csv, write_csv, write_svg


def records():
    return [
        RunRecord(round=0, fgap=0.5, dist=1.0, up_bits=0.0, down_bits=0.0, wall_ms=0.25),
        RunRecord(round=1, fgap=1e-3, dist=0.1, up_bits=640.0, down_bits=64.0, wall_ms=1.5),
    ]


class TestCsv(TestCase):
    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.path = os.path.join(self.tmp.name, 'run.csv')

    def tearDown(self):
        self.tmp.cleanup()

    def test_round_trip(self):
        write_csv(records(), self.path)
        self.assertEqual(read_csv(self.path), records())

    def test_header(self):
        write_csv(records(), self.path)
        with open(self.path) as f:
            self.assertEqual(f.readline().strip(), ','.join(CSV_HEADER))

    def test_without_wall_clock(self):
        write_csv(records(), self.path, wall_clock=False)
        self.assertEqual([r.wall_ms for r in read_csv(self.path)], [0.0, 0.0])

    def test_empty(self):
        with self.assertRaises(OutputError):
            write_csv([], self.path)

    def test_wrong_header(self):
        with open(self.path, mode='w') as f:
            f.write('round,gap\n0,1.0\n')
        with self.assertRaises(OutputError):
            read_csv(self.path)

    def test_no_rows(self):
        with open(self.path, mode='w') as f:
            f.write(','.join(CSV_HEADER) + '\n')
        with self.assertRaises(OutputError):
            read_csv(self.path)


class TestSvg(TestCase):
    def test_series_ids(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'chart.svg')
            write_svg({'bl1': [(0.0, 1.0), (10.0, 0.1)], 'gd': [(0.0, 1.0), (5.0, 0.0), (10.0, 0.5)]}, path)
            with open(path) as f:
                svg = f.read()
        self.assertIn('id="bl1"', svg)
        self.assertIn('id="gd"', svg)

    def test_empty(self):
        with self.assertRaises(OutputError):
            write_svg({}, 'unused.svg')
        with self.assertRaises(OutputError):
            write_svg({'bl1': []}, 'unused.svg')
