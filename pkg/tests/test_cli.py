import io
import json
import os
import shutil
import tempfile
import unittest
from unittest.mock import patch

import pandas as pd

from src.cli import EXIT_OK, EXIT_USAGE, EXIT_VALIDATION_FAILURE, main, parse_args, resolve_channel


class TestArgumentResolution(unittest.TestCase):

    def test_rician_factor_sets_channel(self):
        args = parse_args(["capacity", "--K", "1"])
        ch = resolve_channel(args)
        self.assertAlmostEqual(ch.d_mag_sq, 0.5)
        self.assertAlmostEqual(ch.gamma_sq, 0.5)

    def test_default_channel_is_unfaded(self):
        ch = resolve_channel(parse_args(["capacity"]))
        self.assertTrue(ch.is_unfaded())

    def test_duty_factor_and_peak_are_exclusive(self):
        self.assertEqual(main(["capacity", "--nu", "0.5", "--peak-eta", "1"]), EXIT_USAGE)

    def test_unknown_detector(self):
        self.assertEqual(main(["capacity", "--detector", "coherent"]), EXIT_USAGE)


class TestCommands(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_capacity_writes_csv_and_sidecar(self):
        out = os.path.join(self.temp_dir, "capacity.csv")
        code = main(["capacity", "--K", "1", "--nu", "0.5", "--snr-db", "0",
                     "--quadrature-order", "16", "--out", out, "--quiet"])
        self.assertEqual(code, EXIT_OK)

        frame = pd.read_csv(out)
        self.assertEqual(len(frame), 1)
        self.assertEqual(frame["method"][0], "quadrature")
        self.assertGreater(frame["capacity_nats"][0], 0.0)

        with open(os.path.join(self.temp_dir, "capacity.meta.json"), encoding="utf-8") as f:
            meta = json.load(f)
        self.assertIn("--quadrature-order", meta["command_line"])
        self.assertEqual(meta["rows"], 1)

    def test_capacity_to_stdout(self):
        with patch("sys.stdout", new_callable=io.StringIO) as stdout:
            code = main(["capacity", "--snr-grid=-10,0", "--quadrature-order", "8", "--quiet"])
        self.assertEqual(code, EXIT_OK)
        lines = stdout.getvalue().strip().splitlines()
        self.assertTrue(lines[0].startswith("snr_db,nu,capacity_nats"))
        self.assertEqual(len(lines), 3)

    def test_zero_samples_is_a_usage_error(self):
        self.assertEqual(main(["capacity", "--samples", "0"]), EXIT_USAGE)

    def test_peak_lowpower_summary(self):
        out = os.path.join(self.temp_dir, "lowpower.csv")
        code = main(["lowpower", "--K", "1", "--peak-eta", "1", "--detector", "phase", "--out", out])
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(out)
        self.assertAlmostEqual(frame["eb_n0_min_db"][0], 0.667, delta=0.002)

    def test_curve_grid_above_peak(self):
        code = main(["curve", "--peak-eta", "0.1", "--snr-grid", "0:10:1", "--quadrature-order", "8"])
        self.assertEqual(code, EXIT_USAGE)

    def test_rician_factor_with_explicit_channel(self):
        self.assertEqual(main(["capacity", "--K", "1", "--gamma2", "0.5"]), EXIT_USAGE)

    def test_figure_peak_sweep(self):
        code = main(["figure", "fig8", "--eta-grid", "0.5,1,2", "--out", self.temp_dir])
        self.assertEqual(code, EXIT_OK)
        frame = pd.read_csv(os.path.join(self.temp_dir, "fig8.csv"))
        self.assertEqual(len(frame), 6)
        self.assertEqual(set(frame["detector"]), {"energy", "phase"})


class TestConfigFile(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()
        self.config = os.path.join(self.temp_dir, "run.env")

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def _write(self, text):
        with open(self.config, "w", encoding="utf-8") as f:
            f.write(text)

    def test_config_values_become_defaults(self):
        self._write("K=1\nnu=0.5\nquadrature-order=16\nquiet=true\n")
        args = parse_args(["capacity", "--config", self.config])
        self.assertEqual(args.rician_k, 1.0)
        self.assertEqual(args.quadrature_order, 16)
        self.assertTrue(args.quiet)

    def test_explicit_flags_win(self):
        self._write("nu=0.5\nm=3\n")
        args = parse_args(["capacity", "--config", self.config, "--m", "2", "--peak-eta", "4"])
        self.assertEqual(args.m, 2)
        self.assertIsNone(args.nu)
        self.assertEqual(args.peak_eta, 4.0)

    def test_unknown_key(self):
        self._write("bogus=1\n")
        self.assertEqual(main(["capacity", "--config", self.config]), EXIT_USAGE)

    def test_missing_file(self):
        self.assertEqual(main(["capacity", "--config", os.path.join(self.temp_dir, "none.env")]), EXIT_USAGE)


class TestValidateCommand(unittest.TestCase):

    def _rows(self, passed):
        return [
            {"check": "simulate_mi/energy-imperfect", "statistic": 0.3, "threshold": 4.0, "passed": True,
             "detail": ""},
            {"check": "kkt/energy-imperfect", "statistic": 0.01, "threshold": 0.02, "passed": passed,
             "detail": ""},
        ]

    @patch("src.cli.run_default_suite")
    def test_exit_codes(self, mock_suite):
        with patch("sys.stdout", new_callable=io.StringIO):
            mock_suite.return_value = self._rows(True)
            self.assertEqual(main(["validate", "--samples", "100"]), EXIT_OK)

            mock_suite.return_value = self._rows(False)
            self.assertEqual(main(["validate", "--inject-bias"]), EXIT_VALIDATION_FAILURE)

        self.assertTrue(mock_suite.call_args[0][2])


if __name__ == '__main__':
    unittest.main()
