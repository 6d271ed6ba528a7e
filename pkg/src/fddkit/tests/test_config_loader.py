import os
import shutil
import tempfile
import unittest

import numpy as np

from fddkit.engine.errors import ConfigError
from fddkit.utilities.config_loader import ConfigLoader
from fddkit.utilities.messenger import Messenger
from fddkit.utilities.path_resolver import PathResolver

SMALL_SCENARIO = """
num_paths: 4
max_delay: 1.0e-6
bandwidth: 10.0e6
carrier: 2.0e9
array:
  rows: 2
  cols: 4
pilot_snr: 15
seed: 5
sage:
  num_paths: 3
downlink:
  snr: 20
  constellation_order: 64
sweep:
  freq_min: -20e6
  freq_max: 20e6
  freq_steps: 5
  trials: 7
  estimators: ls, sage
  antennas: [[2, 2], [4, 4]]
  snrs: [0, 10]
"""


class TestConfigLoader(unittest.TestCase):
    def setUp(self):
        Messenger.set_quiet(True)
        self.loader = ConfigLoader()
        self.test_dir = tempfile.mkdtemp()
        self.original_user_config = PathResolver.get_user_config_path
        PathResolver.get_user_config_path = lambda: os.path.join(self.test_dir, "config.yaml")

    def tearDown(self):
        PathResolver.get_user_config_path = self.original_user_config
        Messenger.set_quiet(False)
        shutil.rmtree(self.test_dir, ignore_errors=True)

    def test_loads_nested_sections(self):
        config = self.loader.loads(SMALL_SCENARIO)
        self.assertEqual(config.num_paths, 4)
        self.assertEqual(config.array.num_elements, 8)
        self.assertEqual(config.sage_config().num_paths, 3)
        self.assertEqual(config.downlink_config().constellation_order, 64)
        self.assertAlmostEqual(config.downlink_config().noise_variance, 0.01)
        self.assertEqual(config.sweep.estimators, ("ls", "sage"))
        self.assertEqual(config.sweep.antennas, ((2, 2), (4, 4)))
        np.testing.assert_allclose(config.sweep.frequencies, [-20e6, -10e6, 0.0, 10e6, 20e6])
        self.assertEqual(config.build_pilots().num_pilots, 11)

    def test_unknown_top_level_key(self):
        with self.assertRaises(ConfigError) as context:
            self.loader.loads("num_path: 3\n")
        self.assertIn("num_path", str(context.exception))

    def test_unknown_nested_key(self):
        with self.assertRaises(ConfigError) as context:
            self.loader.loads("sweep:\n  trails: 3\n")
        self.assertIn("sweep.trails", str(context.exception))

    def test_unknown_path_key(self):
        text = "generator: explicit-paths\npaths:\n  - {gain: 1, delay: 0, azimuth: 0, elevation: 1, phase: 0}\n"
        with self.assertRaises(ConfigError) as context:
            self.loader.loads(text)
        self.assertIn("paths[0].phase", str(context.exception))

    def test_explicit_paths(self):
        text = ("generator: explicit-paths\n"
                "paths:\n"
                "  - {gain: [0.5, -0.5], delay: 1.0e-7, azimuth: 0.3, elevation: 1.2}\n"
                "  - {gain: 0.25, delay: 4.0e-7, azimuth: -0.3, elevation: 1.9}\n")
        config = self.loader.loads(text)
        self.assertEqual(config.num_paths, 2)
        self.assertEqual(config.paths[0].gain, 0.5 - 0.5j)
        self.assertEqual(config.paths[1].gain, 0.25)

    def test_invalid_values(self):
        for text in ("pilot_snr: loud\n", "seed: 1.5\n", "array: 4\n", "num_paths: 0\n", "- 1\n", "a: [\n"):
            with self.assertRaises(ConfigError, msg=text):
                self.loader.loads(text)

    def test_empty_document_gives_defaults(self):
        config = self.loader.loads("")
        self.assertEqual(config.num_paths, 10)
        self.assertEqual(config.generator, "clustered-surrogate")

    def test_presets(self):
        self.assertIn("default", PathResolver.list_presets())
        default = self.loader.load(None)
        self.assertEqual(default.build_pilots().num_pilots, 51)
        separated = self.loader.load("separated-paths")
        self.assertEqual(separated.generator, "explicit-paths")
        self.assertEqual(separated.num_paths, 3)

    def test_user_config_takes_precedence(self):
        with open(os.path.join(self.test_dir, "config.yaml"), "w") as f:
            f.write("num_paths: 2\n")
        self.assertEqual(self.loader.load(None).num_paths, 2)

    def test_missing_config(self):
        with self.assertRaises(ConfigError):
            self.loader.load("no-such-preset")

    def test_override(self):
        config = self.loader.loads(SMALL_SCENARIO)
        updated = ConfigLoader.override(config, seed=99, trials=3, freq_steps=2, estimators="LMMSE, ls")
        self.assertEqual(updated.seed, 99)
        self.assertEqual(updated.sweep.trials, 3)
        self.assertEqual(updated.sweep.freq_steps, 2)
        self.assertEqual(updated.sweep.estimators, ("lmmse", "ls"))
        self.assertEqual(updated.sweep.freq_min, -20e6)
        unchanged = ConfigLoader.override(config)
        self.assertEqual(unchanged, config)

    def test_override_rejects_empty_sweeps(self):
        config = self.loader.loads(SMALL_SCENARIO)
        for changes in ({"trials": 0}, {"freq_steps": 0}, {"freq_min": 50e6}):
            with self.assertRaises(ConfigError, msg=str(changes)):
                ConfigLoader.override(config, **changes)

    def test_invalid_sweep_and_search_settings(self):
        for text in ("sweep: {trials: 0}\n", "sweep: {freq_steps: 0}\n", "sweep: {cdf_points: 1}\n",
                     "sweep: {drops: -1}\n", "sage: {angle_step: 0.1}\n", "sage: {angle_step: 0}\n",
                     "sage: {delay_step: 1.0e-6}\n"):
            with self.assertRaises(ConfigError, msg=text):
                self.loader.loads(text)


if __name__ == "__main__":
    unittest.main()
