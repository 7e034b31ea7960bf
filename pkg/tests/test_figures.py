import json
import os
import shutil
import tempfile
import unittest

import pandas as pd

from src.capacity import PHASE
from src.channel import ChannelParams
from src.exceptions import ConfigurationError
from src.figures import (
    PRESETS,
    CurveSpec,
    curve_rows,
    figure_estimator,
    grid_minimum,
    peak_sweep_rows,
    run_figure,
)
from src.numerics import GAUSS_LAGUERRE, McConfig, gauss_laguerre
from utils.helpers import db_to_linear, linear_to_db, parse_snr_grid, write_csv


class TestHelpers(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_db_conversion(self):
        self.assertAlmostEqual(db_to_linear(10.0), 10.0)
        self.assertAlmostEqual(linear_to_db(100.0), 20.0)
        self.assertEqual(linear_to_db(0.0), float("-inf"))
        with self.assertRaises(ValueError):
            linear_to_db(-1.0)

    def test_parse_snr_grid(self):
        self.assertEqual(parse_snr_grid("0:2:1"), [0.0, 1.0, 2.0])
        self.assertEqual(parse_snr_grid("3, -1"), [-1.0, 3.0])
        with self.assertRaises(ValueError):
            parse_snr_grid("5:0:1")

    def test_write_csv_sidecar(self):
        path = os.path.join(self.temp_dir, "nested", "out.csv")
        meta_path = write_csv([{"a": 1.0, "b": "x"}], path, ["a", "b"], {"seed": 3})

        self.assertTrue(os.path.exists(path))
        with open(meta_path, encoding="utf-8") as f:
            meta = json.load(f)
        self.assertEqual(meta["seed"], 3)
        self.assertEqual(meta["columns"], ["a", "b"])
        self.assertIn("version", meta)


class TestFigurePresets(unittest.TestCase):

    def setUp(self):
        self.temp_dir = tempfile.mkdtemp()

    def tearDown(self):
        shutil.rmtree(self.temp_dir)

    def test_all_presets_defined(self):
        self.assertEqual(set(PRESETS), {f"fig{k}" for k in range(1, 10)})
        nus = [curve.nu for curve in PRESETS["fig1"].curves]
        self.assertEqual(nus, [1.0, 0.1, 0.01, 0.001, 0.0001])

    def test_estimator_choice(self):
        self.assertEqual(figure_estimator(2).kind, GAUSS_LAGUERRE)
        self.assertIsInstance(figure_estimator(4), McConfig)
        self.assertIsInstance(figure_estimator(2, samples=1000), McConfig)

    def test_fixed_peak_curve_skips_inadmissible_points(self):
        curve = CurveSpec("eta1", ChannelParams.from_rician_k(1.0), 2, PHASE, eta=1.0)
        rows = curve_rows(curve, [-10.0, -3.0, 0.0, 3.0], gauss_laguerre(8))
        self.assertEqual([r["snr_db"] for r in rows], [-10.0, -3.0, 0.0])
        self.assertAlmostEqual(rows[0]["nu"], db_to_linear(-10.0))

    def test_grid_minimum(self):
        rows = [{"snr_db": 0.0, "eb_n0_db": 3.0, "spectral_eff_bpshz": 0.2},
                {"snr_db": 1.0, "eb_n0_db": float("inf"), "spectral_eff_bpshz": 0.0},
                {"snr_db": 2.0, "eb_n0_db": 2.5, "spectral_eff_bpshz": 0.4}]
        self.assertEqual(grid_minimum(rows)["snr_db_at_min"], 2.0)

    def test_peak_sweep(self):
        rows = peak_sweep_rows([0.5, 1.0])
        self.assertEqual(len(rows), 4)
        phase = [r for r in rows if r["detector"] == PHASE]
        self.assertGreater(phase[0]["eb_n0_min_db"], phase[1]["eb_n0_min_db"])

    def test_run_figure_writes_curves_and_summary(self):
        paths = run_figure("fig7", {"snr_grid_db": [-10.0, 0.0], "quadrature_order": 8, "workers": 1},
                           out=self.temp_dir)
        self.assertEqual(len(paths), len(PRESETS["fig7"].curves) + 1)
        summary = pd.read_csv(os.path.join(self.temp_dir, "fig7_summary.csv"))
        self.assertEqual(len(summary), len(PRESETS["fig7"].curves))

    def test_unknown_preset(self):
        with self.assertRaises(ConfigurationError):
            run_figure("fig10")


if __name__ == '__main__':
    unittest.main()
