import math
import os
import shutil
import tempfile
import unittest
from dataclasses import replace
from unittest import mock

import numpy as np
from scipy import stats

from fddkit.engine import scenario_harness
from fddkit.engine.channel_model import PathParameters, wrap_azimuth
from fddkit.engine.errors import InvalidArgumentError
from fddkit.engine.scenario_harness import (
    AZIMUTH_SPREAD,
    COUPLING_LIMIT,
    CSV_COLUMNS,
    ArraySettings,
    ScenarioConfig,
    SweepRow,
    SweepSettings,
    compute_bounds,
    compute_cdf,
    draw_clustered_paths,
    generate_scenario,
    load_result,
    run_drops,
    run_grid,
    run_sweep,
    save_result,
    write_report,
)
from fddkit.utilities.messenger import Messenger

MAX_DELAY = 2.5e-6
ON_GRID_PATH = PathParameters(1.0, 5e-7, np.pi / 3, np.pi / 2)


def explicit_config(**changes) -> ScenarioConfig:
    config = ScenarioConfig(
        generator="explicit-paths",
        paths=(ON_GRID_PATH,),
        array=ArraySettings(rows=2, cols=2),
        pilot_snr=10.0,
        seed=3,
    )
    return replace(config, **changes)


class TestScenarioGeneration(unittest.TestCase):
    def test_same_seed_same_paths(self):
        config = ScenarioConfig(seed=42)
        first, _, _ = generate_scenario(config, drop=2)
        second, _, _ = generate_scenario(config, drop=2)
        other, _, _ = generate_scenario(config, drop=3)
        np.testing.assert_array_equal(first.parameter_vector(), second.parameter_vector())
        self.assertFalse(np.allclose(first.parameter_vector(), other.parameter_vector()))

    def test_surrogate_draw_is_normalised(self):
        rng = np.random.default_rng(0)
        for _ in range(50):
            draw = draw_clustered_paths(10, MAX_DELAY, rng)
            self.assertAlmostEqual(draw.paths.total_power, 1.0, places=12)
            self.assertTrue(np.all((draw.paths.delays >= 0) & (draw.paths.delays <= MAX_DELAY)))
            self.assertEqual(draw.cluster_delays.size, math.ceil(10 / 4))

    def test_surrogate_distributions(self):
        rng = np.random.default_rng(1)
        offsets = []
        delays = []
        for _ in range(600):
            draw = draw_clustered_paths(8, MAX_DELAY, rng)
            offsets.extend(wrap_azimuth(draw.paths.azimuths - draw.cluster_azimuths[draw.clusters]))
            delays.extend(draw.paths.delays)
        result = stats.kstest(offsets, "laplace", args=(0.0, AZIMUTH_SPREAD / np.sqrt(2)))
        self.assertGreater(result.pvalue, 0.01)
        self.assertLess(min(delays), 0.05 * MAX_DELAY)
        self.assertGreater(max(delays), 0.95 * MAX_DELAY)

    def test_default_grid_and_array(self):
        paths, array, pilots = generate_scenario(ScenarioConfig())
        self.assertEqual(len(paths), 10)
        self.assertEqual(array.num_elements, 16)
        self.assertEqual(pilots.num_pilots, 51)

    def test_invalid_configs(self):
        with self.assertRaises(InvalidArgumentError):
            ScenarioConfig(num_paths=0)
        with self.assertRaises(InvalidArgumentError):
            ScenarioConfig(generator="explicit-paths")
        with self.assertRaises(InvalidArgumentError):
            ScenarioConfig(sweep=SweepSettings(estimators=("ls", "music")))
        with self.assertRaises(InvalidArgumentError):
            ScenarioConfig(sage=replace(ScenarioConfig().sage, delay_step=1e-6))
        for changes in ({"trials": 0}, {"freq_steps": 0}, {"freq_min": 1e6, "freq_max": 0.0},
                        {"drops": -1}, {"cdf_points": 1}, {"gamma": 0.0}):
            with self.assertRaises(InvalidArgumentError, msg=str(changes)):
                SweepSettings(**changes)


class TestCdf(unittest.TestCase):
    def test_order_statistics(self):
        table = compute_cdf([4.0, 2.0, 3.0, 1.0], grid_points=7)
        self.assertEqual(table.evaluate(2.5), 0.5)
        self.assertEqual(table.cdf[-1], 1.0)
        self.assertTrue(np.all(np.diff(table.cdf) >= 0))

    def test_constant_values(self):
        table = compute_cdf([2.0, 2.0, 2.0])
        self.assertEqual(table.evaluate(1.999), 0.0)
        self.assertEqual(table.evaluate(2.0), 1.0)

    def test_empty_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            compute_cdf([])


class TestSweeps(unittest.TestCase):
    def setUp(self):
        Messenger.set_quiet(True)
        self.out_dir = tempfile.mkdtemp()

    def tearDown(self):
        Messenger.set_quiet(False)
        shutil.rmtree(self.out_dir, ignore_errors=True)

    def read(self, name):
        with open(os.path.join(self.out_dir, name), "rb") as f:
            return f.read()

    def test_noiseless_sage_row_is_exact(self):
        config = explicit_config(pilot_snr=300.0)
        result = run_sweep(config, [-10e6, 0.0, 10e6, 50e6], trials=1, estimators=("ls", "lmmse", "sage"))
        for row in result.rows:
            self.assertLess(row.mse_sage, 1e-10)
            self.assertIsNotNone(row.crlb_mean)
            self.assertFalse(row.failed, msg=row.errors)
        self.assertLess(result.rows[1].mse_ls, 1e-10)
        self.assertIsNone(result.rows[3].mse_ls)

    def test_report_format(self):
        config = explicit_config()
        frequencies = np.linspace(-100e6, 100e6, 20)
        result = run_sweep(config, frequencies, trials=2, estimators=("lmmse",))
        path = os.path.join(self.out_dir, "report.csv")
        written = write_report(result, path)
        self.assertEqual([str(p) for p in written], [path])
        lines = self.read("report.csv").decode("utf-8").split("\n")
        self.assertEqual(lines[0], ",".join(CSV_COLUMNS))
        self.assertEqual(len(lines), 22)
        self.assertEqual(lines[-1], "")
        fields = lines[1].split(",")
        self.assertEqual(fields[CSV_COLUMNS.index("mse_ls")], "")
        self.assertEqual(fields[CSV_COLUMNS.index("mse_sage")], "")
        self.assertGreater(float(fields[CSV_COLUMNS.index("mse_lmmse")]), 0.0)

    def test_same_seed_byte_identical(self):
        config = explicit_config()
        frequencies = [-20e6, 0.0, 20e6]
        for name in ("first.csv", "second.csv"):
            result = run_sweep(config, frequencies, trials=3, estimators=("ls", "lmmse", "sage"))
            write_report(result, os.path.join(self.out_dir, name))
        self.assertEqual(self.read("first.csv"), self.read("second.csv"))

    def test_lmmse_collapses_out_of_band(self):
        config = explicit_config()
        frequency = config.bandwidth / 2 + 5 / config.max_delay
        result = run_sweep(config, [0.0, frequency], trials=2, estimators=("lmmse",))
        self.assertGreaterEqual(result.rows[1].mse_lmmse_analytic, 10 * config.noise_variance * (1 - 1e-6))
        self.assertLess(result.rows[0].mse_lmmse_analytic, config.noise_variance)

    def test_ill_conditioned_rows_are_recorded(self):
        duplicate = PathParameters(0.5, 5e-7, np.pi / 3, np.pi / 2)
        config = explicit_config(paths=(ON_GRID_PATH, duplicate))
        result = run_sweep(config, [0.0, 10e6], trials=2, estimators=("ls",))
        self.assertTrue(result.all_failed)
        for row in result.rows:
            self.assertIsNone(row.crlb_mean)
            self.assertIsNotNone(row.mse_ls)
        bounds = compute_bounds(config, [0.0])
        self.assertTrue(bounds.all_failed)

    def test_bounds_only(self):
        config = explicit_config()
        result = compute_bounds(config, [0.0, 50e6])
        self.assertIsNone(result.rows[0].mse_ls)
        self.assertLess(result.rows[0].crlb_mean, result.rows[1].crlb_mean)
        self.assertIsNotNone(result.rows[1].se_bits)
        self.assertIsNotNone(result.extrapolation_range)

    def test_drop_cdfs(self):
        config = ScenarioConfig(num_paths=3, num_clusters=3, seed=9)
        tables = run_drops(config, [0.0, 60e6], drops=5, grid_points=11)
        self.assertEqual(sorted(tables), ["se_+0MHz", "se_+60MHz", "se_perfect_+0MHz", "se_perfect_+60MHz"])
        for label, table in tables.items():
            self.assertTrue(np.all(np.diff(table.cdf) >= 0))
            self.assertEqual(table.cdf[-1], 1.0)
        estimated = tables["se_+60MHz"].samples
        perfect = tables["se_perfect_+60MHz"].samples
        self.assertTrue(np.all(perfect >= estimated - 1e-12))

    def test_grid_labels(self):
        config = explicit_config(sweep=SweepSettings(antennas=((2, 2), (2, 4)), snrs=(10.0, 20.0)))
        results = run_grid(config, [0.0], trials=1, estimators=("ls",))
        self.assertEqual([r.label for r in results], ["M4_snr10", "M4_snr20", "M8_snr10", "M8_snr20"])

    def test_saved_results_reproduce_report(self):
        config = explicit_config()
        result = run_sweep(config, [0.0, 30e6], trials=2, estimators=("ls", "lmmse"))
        result.cdfs.update(run_drops(config, [0.0], drops=2))
        write_report(result, os.path.join(self.out_dir, "original.csv"))
        save_result([result], os.path.join(self.out_dir, "results.json"))
        loaded = load_result(os.path.join(self.out_dir, "results.json"))
        write_report(loaded[0], os.path.join(self.out_dir, "loaded.csv"))
        self.assertEqual(self.read("original.csv"), self.read("loaded.csv"))
        self.assertEqual(self.read("original_cdf_se_+0MHz.csv"), self.read("loaded_cdf_se_+0MHz.csv"))

    def test_tdd_outperforms_fdd_over_drops(self):
        config = ScenarioConfig(num_paths=4, num_clusters=4, seed=17)
        tables = run_drops(config, [0.0, 90e6], drops=50)
        tdd = tables["se_+0MHz"].samples
        fdd = tables["se_+90MHz"].samples
        margin = 1.645 * np.sqrt(np.var(tdd, ddof=1) / tdd.size + np.var(fdd, ddof=1) / fdd.size)
        self.assertGreaterEqual(np.mean(tdd), np.mean(fdd) - margin)

    def test_in_band_cdf_matches_perfect_csi(self):
        config = ScenarioConfig(num_paths=4, num_clusters=4, seed=23, array=ArraySettings(rows=8, cols=8))
        tables = run_drops(config, [0.0], drops=200)
        estimated = tables["se_+0MHz"]
        perfect = tables["se_perfect_+0MHz"]
        points = np.concatenate([estimated.samples, perfect.samples])
        distance = max(abs(estimated.evaluate(x) - perfect.evaluate(x)) for x in points)
        self.assertLessEqual(distance, 0.05)


class TestBoundComparison(unittest.TestCase):
    def setUp(self):
        Messenger.set_quiet(True)

    def tearDown(self):
        Messenger.set_quiet(False)

    def test_comparable_flag(self):
        self.assertTrue(SweepRow(0.0).bound_comparable)
        self.assertTrue(SweepRow(0.0, bound_inflation=1.01).bound_comparable)
        self.assertFalse(SweepRow(0.0, bound_inflation=1.5 * COUPLING_LIMIT).bound_comparable)

    def test_separated_paths_are_comparable(self):
        config = explicit_config(paths=(
            ON_GRID_PATH,
            PathParameters(0.8j, 1.2e-6, np.pi / 6, np.pi / 2),
            PathParameters(-0.6, 2.0e-6, 2 * np.pi / 3, np.pi / 2),
        ), array=ArraySettings(rows=4, cols=4))
        with mock.patch.object(scenario_harness.messenger, "warning") as warning:
            result = compute_bounds(config, [0.0, 45e6, 90e6])
        for row in result.rows:
            self.assertLess(row.bound_inflation, COUPLING_LIMIT)
            self.assertTrue(row.bound_comparable)
        warning.assert_not_called()

    def test_clustered_default_rows_below_bound_are_flagged(self):
        config = ScenarioConfig(seed=2024)
        with mock.patch.object(scenario_harness.messenger, "warning") as warning:
            result = run_sweep(config, [0.0, 45e6, 90e6], trials=10, estimators=("sage",))
        flagged = [row for row in result.rows if not row.bound_comparable]
        self.assertTrue(flagged)
        self.assertTrue(any("not comparable" in str(call) for call in warning.call_args_list))
        for row in result.rows:
            below = row.mse_sage < row.crlb_mean - 3 * row.standard_errors["sage"]
            if below:
                self.assertIn(row, flagged)

    def test_clustered_sage_tracks_comparable_bound(self):
        config = ScenarioConfig(num_paths=3, num_clusters=3, pilot_snr=30.0, seed=31)
        result = run_sweep(config, [0.0, 45e6, 90e6], trials=100, estimators=("sage",))
        comparable = [row for row in result.rows if row.bound_comparable and not row.failed]
        self.assertTrue(comparable)
        for row in comparable:
            margin = 3 * row.standard_errors["sage"]
            self.assertGreaterEqual(row.mse_sage, row.crlb_mean - margin, msg=row.frequency)
            self.assertLessEqual(row.mse_sage, 2 * row.crlb_mean, msg=row.frequency)


if __name__ == "__main__":
    unittest.main()
