import unittest
from dataclasses import replace

import numpy as np
from numpy.testing import assert_allclose

from fddkit.engine.channel_model import (
    ArrayGeometry,
    PathParameters,
    PathSet,
    PilotGrid,
    SPEED_OF_LIGHT,
    antenna_pattern,
    antenna_pattern_gradients,
    array_response,
    build_planar_array,
    channel_matrix,
    channel_response,
    derive_seed,
    pilot_noise,
    simulate_pilots,
)
from fddkit.engine.errors import DimensionError, InvalidArgumentError
from fddkit.utilities.messenger import Messenger

CARRIER = 3.5e9


class TestPathParameters(unittest.TestCase):
    def test_azimuth_is_wrapped(self):
        path = PathParameters(1.0, 1e-7, 3 * np.pi / 2, 1.0)
        self.assertAlmostEqual(path.azimuth, -np.pi / 2)

    def test_rejects_negative_delay(self):
        with self.assertRaises(InvalidArgumentError):
            PathParameters(1.0, -1e-9, 0.0, 1.0)

    def test_rejects_elevation_outside_range(self):
        with self.assertRaises(InvalidArgumentError):
            PathParameters(1.0, 0.0, 0.0, 3.5)

    def test_parameter_vector_order(self):
        paths = PathSet.from_arrays([1 + 2j, -0.5j], [1e-7, 2e-7], [0.1, 0.2], [1.0, 1.1])
        vector = paths.parameter_vector()
        assert_allclose(vector[:5], [1e-7, 0.1, 1.0, 1.0, 2.0])
        assert_allclose(vector[5:], [2e-7, 0.2, 1.1, 0.0, -0.5])
        rebuilt = PathSet.from_parameter_vector(vector)
        assert_allclose(rebuilt.gains, paths.gains)

    def test_empty_path_set_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            PathSet(())

    def test_mismatched_arrays_rejected(self):
        with self.assertRaises(DimensionError):
            PathSet.from_arrays([1.0, 1.0], [0.0], [0.0], [1.0])


class TestArrayGeometry(unittest.TestCase):
    def test_planar_array_is_centred_in_xz_plane(self):
        array = build_planar_array(4, 4, 0.05, CARRIER)
        self.assertEqual(array.num_elements, 16)
        assert_allclose(array.positions.sum(axis=0), np.zeros(3), atol=1e-15)
        self.assertTrue(array.is_xz_planar)
        self.assertAlmostEqual(np.ptp(array.positions[:, 0]), 0.15)

    def test_uncentred_positions_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            ArrayGeometry(np.array([[0.0, 0.0, 0.0], [0.1, 0.0, 0.0]]), CARRIER)

    def test_duplicate_positions_rejected(self):
        positions = np.array([[0.1, 0.0, 0.0], [0.1, 0.0, 0.0], [-0.2, 0.0, 0.0]])
        with self.assertRaises(InvalidArgumentError):
            ArrayGeometry(positions, CARRIER)

    def test_unknown_pattern_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            ArrayGeometry(np.zeros((1, 3)), CARRIER, element_pattern="patch")


class TestPilotGrid(unittest.TestCase):
    def test_default_grid(self):
        pilots = PilotGrid.uniform(20e6, 2.5e-6)
        self.assertEqual(pilots.num_pilots, 51)
        assert_allclose(np.diff(pilots.frequencies), 1 / 2.5e-6)
        assert_allclose(pilots.frequencies[[0, -1]], [-10e6, 10e6])
        self.assertAlmostEqual(pilots.total_energy, 51.0)
        self.assertTrue(pilots.is_uniform_energy)

    def test_mean_squared_bandwidth(self):
        pilots = PilotGrid([-1e6, 1e6], [1.0, 1.0], 4e6)
        self.assertAlmostEqual(pilots.sigma_f_squared, 1e12)

    def test_pilot_outside_band_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            PilotGrid([0.0, 3e6], [1.0, 1.0], 4e6)

    def test_unordered_pilots_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            PilotGrid([1e6, -1e6], [1.0, 1.0], 4e6)


class TestChannelResponse(unittest.TestCase):
    def setUp(self):
        Messenger.set_quiet(True)
        self.array = build_planar_array(4, 4, SPEED_OF_LIGHT / CARRIER / 2, CARRIER)

    def tearDown(self):
        Messenger.set_quiet(False)

    def test_element_at_origin_has_unit_pattern(self):
        array = ArrayGeometry(np.zeros((1, 3)), CARRIER)
        self.assertAlmostEqual(antenna_pattern(array, 0, 0.4, 1.2, 50e6), 1.0)

    def test_single_path_at_origin(self):
        array = ArrayGeometry(np.zeros((1, 3)), CARRIER)
        paths = PathSet((PathParameters(0.5 - 0.5j, 3e-7, 0.2, 1.4),))
        for frequency in (-80e6, 0.0, 40e6):
            expected = (0.5 - 0.5j) * np.exp(-2j * np.pi * frequency * 3e-7)
            self.assertAlmostEqual(channel_response(paths, array, frequency).values[0], expected)

    def test_beam_squint(self):
        squinted = array_response(self.array, 0.7, 1.3, 500e6)
        frozen = array_response(self.array, 0.7, 1.3, 500e6, frozen_pattern=True)
        assert_allclose(frozen, array_response(self.array, 0.7, 1.3, 0.0))
        self.assertGreater(np.max(np.abs(squinted - frozen)), 1e-3)
        assert_allclose(np.abs(squinted), 1.0)

    def test_pattern_gradients_match_finite_differences(self):
        step = 1e-6
        for element in (0, 5, 15):
            grad_azimuth, grad_elevation = antenna_pattern_gradients(self.array, element, 0.9, 1.2, 30e6)
            numeric_azimuth = (antenna_pattern(self.array, element, 0.9 + step, 1.2, 30e6)
                               - antenna_pattern(self.array, element, 0.9 - step, 1.2, 30e6)) / (2 * step)
            numeric_elevation = (antenna_pattern(self.array, element, 0.9, 1.2 + step, 30e6)
                                 - antenna_pattern(self.array, element, 0.9, 1.2 - step, 30e6)) / (2 * step)
            self.assertAlmostEqual(grad_azimuth, numeric_azimuth, places=6)
            self.assertAlmostEqual(grad_elevation, numeric_elevation, places=6)

    def test_pattern_gradients_random_directions(self):
        array = build_planar_array(8, 8, SPEED_OF_LIGHT / CARRIER / 2, CARRIER)
        rng = np.random.default_rng(8)
        step = 1e-6
        for _ in range(100):
            element = int(rng.integers(array.num_elements))
            azimuth = rng.uniform(-np.pi, np.pi)
            elevation = rng.uniform(0.1, np.pi - 0.1)
            frequency = rng.uniform(-200e6, 200e6)
            analytic = antenna_pattern_gradients(array, element, azimuth, elevation, frequency)
            numeric = (
                (antenna_pattern(array, element, azimuth + step, elevation, frequency)
                 - antenna_pattern(array, element, azimuth - step, elevation, frequency)) / (2 * step),
                (antenna_pattern(array, element, azimuth, elevation + step, frequency)
                 - antenna_pattern(array, element, azimuth, elevation - step, frequency)) / (2 * step),
            )
            for exact, approximate in zip(analytic, numeric):
                self.assertLessEqual(abs(exact - approximate), 1e-5 * max(abs(exact), 1.0))

    def test_response_is_linear_in_paths(self):
        first = PathSet.from_arrays([1.0, 0.3j], [1e-7, 9e-7], [0.3, 2.1], [1.2, 1.7])
        second = PathSet.from_arrays([-0.4 + 0.2j], [1.6e-6], [-1.0], [0.8])
        combined = first.concatenate(second)
        for frequency in (-90e6, 0.0, 45e6):
            assert_allclose(channel_response(combined, self.array, frequency).values,
                            channel_response(first, self.array, frequency).values
                            + channel_response(second, self.array, frequency).values, atol=1e-14)

    def test_response_is_linear_in_each_gain(self):
        paths = PathSet.from_arrays([1.0, 0.3j, -0.5], [1e-7, 9e-7, 2e-6], [0.3, 2.1, -2.5], [1.2, 1.7, 0.6])
        scale = 2.5 - 1.5j
        for index in range(len(paths)):
            scaled = list(paths)
            scaled[index] = replace(paths[index], gain=scale * paths[index].gain)
            single = PathSet((paths[index],))
            for frequency in (-60e6, 30e6):
                expected = (channel_response(paths, self.array, frequency).values
                            + (scale - 1) * channel_response(single, self.array, frequency).values)
                assert_allclose(channel_response(PathSet(tuple(scaled)), self.array, frequency).values,
                                expected, atol=1e-13)

    def test_channel_matrix_matches_channel_response(self):
        paths = PathSet.from_arrays([1.0, 0.3j], [1e-7, 9e-7], [0.3, 2.1], [1.2, 1.7])
        frequencies = np.array([-50e6, 0.0, 75e6])
        matrix = channel_matrix(paths, self.array, frequencies)
        for index, frequency in enumerate(frequencies):
            assert_allclose(matrix[:, index], channel_response(paths, self.array, frequency).values)

    def test_element_pattern_out_of_range(self):
        with self.assertRaises(InvalidArgumentError):
            antenna_pattern(self.array, 16, 0.0, 1.0, 0.0)


class TestSimulatePilots(unittest.TestCase):
    def setUp(self):
        self.array = build_planar_array(2, 2, SPEED_OF_LIGHT / CARRIER / 2, CARRIER)
        self.pilots = PilotGrid.uniform(20e6, 2.5e-6)
        self.paths = PathSet((PathParameters(1.0, 4e-7, 0.5, 1.5),))

    def test_noiseless_pilots_equal_channel(self):
        received = simulate_pilots(self.paths, self.array, self.pilots, 0.0, seed=3)
        assert_allclose(received.samples, channel_matrix(self.paths, self.array, self.pilots.frequencies))
        self.assertEqual(received.noise_variance, 0.0)

    def test_same_seed_same_noise(self):
        first = simulate_pilots(self.paths, self.array, self.pilots, 0.1, seed=11)
        second = simulate_pilots(self.paths, self.array, self.pilots, 0.1, seed=11)
        third = simulate_pilots(self.paths, self.array, self.pilots, 0.1, seed=12)
        assert_allclose(first.samples, second.samples)
        self.assertFalse(np.allclose(first.samples, third.samples))

    def test_noise_is_white_with_requested_variance(self):
        variance = 0.3
        draws = np.array([pilot_noise(derive_seed(1, draw), (2, 5), variance).reshape(-1)
                          for draw in range(10000)])
        self.assertAlmostEqual(np.mean(np.abs(draws) ** 2) / variance, 1.0, delta=0.02)
        self.assertAlmostEqual(np.mean(draws.real ** 2) / variance, 0.5, delta=0.01)
        covariance = draws.T @ np.conj(draws) / draws.shape[0]
        pseudo = draws.T @ draws / draws.shape[0]
        limit = 4 * variance / np.sqrt(draws.shape[0])
        off_diagonal = covariance[~np.eye(covariance.shape[0], dtype=bool)]
        self.assertLess(np.max(np.abs(off_diagonal)), limit)
        self.assertLess(np.max(np.abs(pseudo)), limit)

    def test_noise_sample_depends_only_on_element_and_pilot(self):
        small = pilot_noise(21, (2, 5), 1.0)
        large = pilot_noise(21, (16, 51), 1.0)
        assert_allclose(small, large[:2, :5])
        received = simulate_pilots(self.paths, self.array, self.pilots, 0.2, seed=21)
        clean = channel_matrix(self.paths, self.array, self.pilots.frequencies) * self.pilots.symbols
        assert_allclose(received.samples - clean, pilot_noise(21, clean.shape, 0.2), atol=1e-15)

    def test_negative_noise_rejected(self):
        with self.assertRaises(InvalidArgumentError):
            simulate_pilots(self.paths, self.array, self.pilots, -1.0, seed=0)

    def test_derived_seeds_are_distinct_and_stable(self):
        seeds = {derive_seed(5, drop, trial) for drop in range(3) for trial in range(10)}
        self.assertEqual(len(seeds), 30)
        self.assertEqual(derive_seed(5, 1, 2), derive_seed(5, 1, 2))


if __name__ == "__main__":
    unittest.main()
