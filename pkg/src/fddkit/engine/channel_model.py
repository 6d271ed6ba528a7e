"""Ground-truth specular channel.

Array geometry, frequency dependent element patterns, the channel frequency
response of a set of specular paths and noisy uplink pilot observations.

Conventions used throughout the package:

* frequencies are baseband, ``f = 0`` is the uplink carrier ``f_c``;
* the direction of arrival is ``e(phi, theta) = (cos phi sin theta,
  sin phi sin theta, cos theta)``, azimuth in ``[-pi, pi)``, elevation in
  ``[0, pi]``;
* planar arrays lie in the x-z plane (x horizontal, z vertical);
* the real parameter vector of a path is ``(delay, azimuth, elevation,
  Re gain, Im gain)`` and path vectors are concatenated in path order.
"""

from dataclasses import dataclass
from typing import Dict, Iterator, Optional, Protocol, Sequence, Tuple, Union

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from fddkit.engine.errors import DimensionError, InvalidArgumentError

PARAMETERS_PER_PATH = 5

ArrayLike = Union[float, Sequence[float], np.ndarray]


def wrap_azimuth(azimuth):
    """Map angles onto [-pi, pi)"""
    return (np.asarray(azimuth) + np.pi) % (2 * np.pi) - np.pi


def direction_vector(azimuth: ArrayLike, elevation: ArrayLike) -> np.ndarray:
    """Unit vector(s) pointing towards the incoming ray, shape (..., 3)"""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    return np.stack([
        np.cos(azimuth) * np.sin(elevation),
        np.sin(azimuth) * np.sin(elevation),
        np.cos(elevation) * np.ones_like(azimuth),
    ], axis=-1)


def direction_derivatives(azimuth: ArrayLike, elevation: ArrayLike) -> Tuple[np.ndarray, np.ndarray]:
    """Derivatives of :func:`direction_vector` with respect to azimuth and elevation"""
    azimuth = np.asarray(azimuth, dtype=float)
    elevation = np.asarray(elevation, dtype=float)
    d_azimuth = np.stack([
        -np.sin(azimuth) * np.sin(elevation),
        np.cos(azimuth) * np.sin(elevation),
        np.zeros(np.broadcast(azimuth, elevation).shape),
    ], axis=-1)
    d_elevation = np.stack([
        np.cos(azimuth) * np.cos(elevation),
        np.sin(azimuth) * np.cos(elevation),
        -np.sin(elevation) * np.ones_like(azimuth),
    ], axis=-1)
    return d_azimuth, d_elevation


@dataclass(frozen=True)
class PathParameters:
    """One specular path: complex gain, delay [s], azimuth and elevation [rad]"""

    gain: complex
    delay: float
    azimuth: float
    elevation: float

    def __post_init__(self):
        values = (self.delay, self.azimuth, self.elevation, complex(self.gain).real, complex(self.gain).imag)
        if not np.all(np.isfinite(values)):
            raise InvalidArgumentError(f"Path parameters must be finite, got {self}")
        if self.delay < 0:
            raise InvalidArgumentError(f"Path delay must be non-negative, got {self.delay}")
        if not 0.0 <= self.elevation <= np.pi:
            raise InvalidArgumentError(f"Elevation must lie in [0, pi], got {self.elevation}")
        object.__setattr__(self, "gain", complex(self.gain))
        object.__setattr__(self, "delay", float(self.delay))
        object.__setattr__(self, "azimuth", float(wrap_azimuth(self.azimuth)))
        object.__setattr__(self, "elevation", float(self.elevation))


@dataclass(frozen=True)
class PathSet:
    """Ordered collection of specular paths; owner of the parameter vector psi"""

    paths: Tuple[PathParameters, ...]

    def __post_init__(self):
        paths = tuple(self.paths)
        if len(paths) < 1:
            raise InvalidArgumentError("A path set needs at least one path")
        object.__setattr__(self, "paths", paths)

    @classmethod
    def from_arrays(cls, gains: ArrayLike, delays: ArrayLike, azimuths: ArrayLike,
                    elevations: ArrayLike) -> "PathSet":
        gains = np.atleast_1d(np.asarray(gains, dtype=complex))
        delays = np.atleast_1d(np.asarray(delays, dtype=float))
        azimuths = np.atleast_1d(np.asarray(azimuths, dtype=float))
        elevations = np.atleast_1d(np.asarray(elevations, dtype=float))
        if not (gains.shape == delays.shape == azimuths.shape == elevations.shape):
            raise DimensionError("Gains, delays, azimuths and elevations must have equal length")
        return cls(tuple(PathParameters(g, t, p, e) for g, t, p, e in zip(gains, delays, azimuths, elevations)))

    @classmethod
    def from_parameter_vector(cls, vector: ArrayLike) -> "PathSet":
        vector = np.asarray(vector, dtype=float)
        if vector.ndim != 1 or vector.size == 0 or vector.size % PARAMETERS_PER_PATH:
            raise DimensionError(f"Parameter vector length must be a positive multiple of {PARAMETERS_PER_PATH}")
        blocks = vector.reshape(-1, PARAMETERS_PER_PATH)
        return cls.from_arrays(blocks[:, 3] + 1j * blocks[:, 4], blocks[:, 0], blocks[:, 1], blocks[:, 2])

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    def __len__(self) -> int:
        return len(self.paths)

    def __iter__(self) -> Iterator[PathParameters]:
        return iter(self.paths)

    def __getitem__(self, index: int) -> PathParameters:
        return self.paths[index]

    @property
    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.paths], dtype=complex)

    @property
    def delays(self) -> np.ndarray:
        return np.array([p.delay for p in self.paths], dtype=float)

    @property
    def azimuths(self) -> np.ndarray:
        return np.array([p.azimuth for p in self.paths], dtype=float)

    @property
    def elevations(self) -> np.ndarray:
        return np.array([p.elevation for p in self.paths], dtype=float)

    @property
    def total_power(self) -> float:
        return float(np.sum(np.abs(self.gains) ** 2))

    def parameter_vector(self) -> np.ndarray:
        """psi as (delay, azimuth, elevation, Re gain, Im gain) per path"""
        gains = self.gains
        blocks = np.column_stack([self.delays, self.azimuths, self.elevations, gains.real, gains.imag])
        return blocks.reshape(-1)

    def concatenate(self, other: "PathSet") -> "PathSet":
        return PathSet(self.paths + other.paths)


class ElementPattern(Protocol):
    """Evaluation rule for the pattern of every element of an array"""

    def response(self, positions: np.ndarray, wavenumbers: np.ndarray, azimuth: float,
                 elevation: float) -> np.ndarray:
        """Pattern values, shape (M, F) for F wavenumbers"""
        ...

    def gradients(self, positions: np.ndarray, wavenumbers: np.ndarray, azimuth: float,
                  elevation: float) -> Tuple[np.ndarray, np.ndarray]:
        """Azimuth and elevation derivatives of :meth:`response`"""
        ...


class IsotropicPattern:
    """Isotropic elements: the pattern reduces to the plane-wave phase shift"""

    def response(self, positions, wavenumbers, azimuth, elevation):
        projection = positions @ direction_vector(azimuth, elevation)
        return np.exp(-1j * np.outer(projection, wavenumbers))

    def gradients(self, positions, wavenumbers, azimuth, elevation):
        response = self.response(positions, wavenumbers, azimuth, elevation)
        d_azimuth, d_elevation = direction_derivatives(azimuth, elevation)
        grad_azimuth = response * (-1j * np.outer(positions @ d_azimuth, wavenumbers))
        grad_elevation = response * (-1j * np.outer(positions @ d_elevation, wavenumbers))
        return grad_azimuth, grad_elevation


PATTERNS: Dict[str, ElementPattern] = {
    "isotropic": IsotropicPattern(),
}


@dataclass(frozen=True, eq=False)
class ArrayGeometry:
    """Base-station array: element positions [m] centred on the origin, carrier [Hz], pattern tag"""

    positions: np.ndarray
    carrier_frequency: float
    element_pattern: str = "isotropic"

    def __post_init__(self):
        positions = np.array(self.positions, dtype=float)
        if positions.ndim != 2 or positions.shape[1] != 3 or positions.shape[0] < 1:
            raise InvalidArgumentError(f"Positions must have shape (M, 3) with M >= 1, got {positions.shape}")
        if not np.all(np.isfinite(positions)):
            raise InvalidArgumentError("Element positions must be finite")
        if not self.carrier_frequency > 0:
            raise InvalidArgumentError(f"Carrier frequency must be positive, got {self.carrier_frequency}")
        if np.linalg.norm(positions.sum(axis=0)) > 1e-9:
            raise InvalidArgumentError("Element positions must sum to the zero vector")
        if np.unique(positions, axis=0).shape[0] != positions.shape[0]:
            raise InvalidArgumentError("Element positions must be pairwise distinct")
        if self.element_pattern not in PATTERNS:
            raise InvalidArgumentError(
                f"Unknown element pattern '{self.element_pattern}', available: {', '.join(PATTERNS)}")
        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)
        object.__setattr__(self, "carrier_frequency", float(self.carrier_frequency))

    @property
    def num_elements(self) -> int:
        return self.positions.shape[0]

    @property
    def pattern(self) -> ElementPattern:
        return PATTERNS[self.element_pattern]

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_frequency

    @property
    def is_xz_planar(self) -> bool:
        """True when every element lies in the x-z plane, where phi and -phi are indistinguishable"""
        return bool(np.all(self.positions[:, 1] == 0.0))

    def wavenumber(self, frequency: ArrayLike) -> np.ndarray:
        return 2 * np.pi * (self.carrier_frequency + np.asarray(frequency, dtype=float)) / SPEED_OF_LIGHT


@dataclass(frozen=True, eq=False)
class PilotGrid:
    """Pilot subcarriers: baseband frequencies [Hz], complex symbols and the uplink bandwidth B"""

    frequencies: np.ndarray
    symbols: np.ndarray
    bandwidth: float

    def __post_init__(self):
        frequencies = np.array(self.frequencies, dtype=float).reshape(-1)
        symbols = np.array(self.symbols, dtype=complex).reshape(-1)
        if frequencies.size < 1:
            raise InvalidArgumentError("A pilot grid needs at least one pilot")
        if symbols.shape != frequencies.shape:
            raise DimensionError("Pilot frequencies and symbols must have equal length")
        if not self.bandwidth > 0:
            raise InvalidArgumentError(f"Bandwidth must be positive, got {self.bandwidth}")
        if np.any(np.diff(frequencies) <= 0):
            raise InvalidArgumentError("Pilot frequencies must be strictly increasing")
        if np.any(np.abs(frequencies) > self.bandwidth / 2 * (1 + 1e-12)):
            raise InvalidArgumentError("Pilot frequencies must lie inside [-B/2, B/2]")
        if not np.all(np.isfinite(symbols)):
            raise InvalidArgumentError("Pilot symbols must be finite")
        frequencies.setflags(write=False)
        symbols.setflags(write=False)
        object.__setattr__(self, "frequencies", frequencies)
        object.__setattr__(self, "symbols", symbols)
        object.__setattr__(self, "bandwidth", float(self.bandwidth))

    @classmethod
    def uniform(cls, bandwidth: float, max_delay: float, symbol_energy: float = 1.0,
                num_pilots: Optional[int] = None) -> "PilotGrid":
        """Equal-energy pilots; by default spaced 1/max_delay with K = B max_delay + 1"""
        if not (bandwidth > 0 and max_delay > 0 and symbol_energy > 0):
            raise InvalidArgumentError("Bandwidth, maximum delay and symbol energy must be positive")
        if num_pilots is None:
            num_pilots = int(round(bandwidth * max_delay)) + 1
            frequencies = (np.arange(num_pilots) - (num_pilots - 1) / 2) / max_delay
        elif num_pilots < 1:
            raise InvalidArgumentError(f"Number of pilots must be positive, got {num_pilots}")
        elif num_pilots == 1:
            frequencies = np.zeros(1)
        else:
            frequencies = np.linspace(-bandwidth / 2, bandwidth / 2, num_pilots)
        symbols = np.full(num_pilots, np.sqrt(symbol_energy), dtype=complex)
        return cls(frequencies, symbols, bandwidth)

    @property
    def num_pilots(self) -> int:
        return self.frequencies.size

    @property
    def energies(self) -> np.ndarray:
        return np.abs(self.symbols) ** 2

    @property
    def total_energy(self) -> float:
        """E_T"""
        return float(np.sum(self.energies))

    @property
    def symbol_energy(self) -> float:
        """E_s, the mean per-pilot energy (exact per-pilot energy for uniform grids)"""
        return self.total_energy / self.num_pilots

    @property
    def is_uniform_energy(self) -> bool:
        return bool(np.allclose(self.energies, self.energies[0], rtol=1e-12, atol=0.0))

    @property
    def sigma_f_squared(self) -> float:
        """Energy-weighted second moment of the pilot frequencies, 0 for an all-zero grid"""
        total = self.total_energy
        if total == 0:
            return 0.0
        return float(np.sum(self.frequencies ** 2 * self.energies) / total)


@dataclass(frozen=True, eq=False)
class ChannelVector:
    """Channel response of all M elements at one baseband frequency"""

    frequency: float
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, dtype=complex).reshape(-1)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "frequency", float(self.frequency))

    def __len__(self) -> int:
        return self.values.size

    @property
    def norm_squared(self) -> float:
        return float(np.vdot(self.values, self.values).real)


@dataclass(frozen=True, eq=False)
class ReceivedPilots:
    """OFDM-demodulated pilots r_m(f_k), shape (M, K), and the noise variance they carry"""

    samples: np.ndarray
    noise_variance: float

    def __post_init__(self):
        samples = np.array(self.samples, dtype=complex)
        if samples.ndim != 2:
            raise DimensionError(f"Received samples must be an (M, K) matrix, got shape {samples.shape}")
        if self.noise_variance < 0:
            raise InvalidArgumentError(f"Noise variance must be non-negative, got {self.noise_variance}")
        object.__setattr__(self, "samples", samples)
        object.__setattr__(self, "noise_variance", float(self.noise_variance))

    @property
    def num_antennas(self) -> int:
        return self.samples.shape[0]

    @property
    def num_pilots(self) -> int:
        return self.samples.shape[1]


def build_planar_array(rows: int, cols: int, spacing: float, carrier_frequency: float) -> ArrayGeometry:
    """Rectangular rows x cols array in the x-z plane, centred on the origin"""
    if rows < 1 or cols < 1:
        raise InvalidArgumentError(f"Array dimensions must be positive, got {rows}x{cols}")
    if not spacing > 0:
        raise InvalidArgumentError(f"Element spacing must be positive, got {spacing}")
    if not carrier_frequency > 0:
        raise InvalidArgumentError(f"Carrier frequency must be positive, got {carrier_frequency}")
    horizontal = (np.arange(cols) - (cols - 1) / 2) * spacing
    vertical = (np.arange(rows) - (rows - 1) / 2) * spacing
    z, x = np.meshgrid(vertical, horizontal, indexing="ij")
    positions = np.column_stack([x.reshape(-1), np.zeros(rows * cols), z.reshape(-1)])
    return ArrayGeometry(positions, carrier_frequency)


def array_response(array: ArrayGeometry, azimuth: float, elevation: float,
                   frequency: ArrayLike, frozen_pattern: bool = False) -> np.ndarray:
    """Pattern vector a(phi, theta, f): shape (M,) for a scalar frequency, (M, F) otherwise.

    ``frozen_pattern`` evaluates every frequency at the carrier (no beam squint).
    """
    frequencies = np.atleast_1d(np.asarray(frequency, dtype=float))
    evaluated = np.zeros_like(frequencies) if frozen_pattern else frequencies
    values = array.pattern.response(array.positions, array.wavenumber(evaluated), azimuth, elevation)
    return values[:, 0] if np.ndim(frequency) == 0 else values


def array_response_gradients(array: ArrayGeometry, azimuth: float, elevation: float,
                             frequency: ArrayLike, frozen_pattern: bool = False) -> Tuple[np.ndarray, np.ndarray]:
    """Azimuth and elevation derivatives of :func:`array_response`, same shapes"""
    frequencies = np.atleast_1d(np.asarray(frequency, dtype=float))
    evaluated = np.zeros_like(frequencies) if frozen_pattern else frequencies
    grad_azimuth, grad_elevation = array.pattern.gradients(
        array.positions, array.wavenumber(evaluated), azimuth, elevation)
    if np.ndim(frequency) == 0:
        return grad_azimuth[:, 0], grad_elevation[:, 0]
    return grad_azimuth, grad_elevation


def _check_element(array: ArrayGeometry, element: int):
    if not 0 <= element < array.num_elements:
        raise InvalidArgumentError(f"Element index {element} out of range for an array of {array.num_elements}")


def antenna_pattern(array: ArrayGeometry, element: int, azimuth: float, elevation: float,
                    frequency: float) -> complex:
    """a_m(phi, theta, f) of one element"""
    _check_element(array, element)
    return complex(array_response(array, azimuth, elevation, float(frequency))[element])


def antenna_pattern_gradients(array: ArrayGeometry, element: int, azimuth: float, elevation: float,
                              frequency: float) -> Tuple[complex, complex]:
    """(da_m/dphi, da_m/dtheta) of one element, evaluated analytically"""
    _check_element(array, element)
    grad_azimuth, grad_elevation = array_response_gradients(array, azimuth, elevation, float(frequency))
    return complex(grad_azimuth[element]), complex(grad_elevation[element])


def channel_matrix(paths: PathSet, array: ArrayGeometry, frequencies: ArrayLike,
                   frozen_pattern: bool = False) -> np.ndarray:
    """h_m(f) for every element and every requested frequency, shape (M, F)"""
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
    response = np.zeros((array.num_elements, frequencies.size), dtype=complex)
    for path in paths:
        pattern = array_response(array, path.azimuth, path.elevation, frequencies, frozen_pattern)
        response += path.gain * pattern * np.exp(-2j * np.pi * frequencies * path.delay)[np.newaxis, :]
    return response


def channel_response(paths: PathSet, array: ArrayGeometry, frequency: float) -> ChannelVector:
    """h(f) = sum_l alpha_l a(phi_l, theta_l, f) exp(-j 2 pi f tau_l)"""
    if not isinstance(paths, PathSet) or len(paths) == 0:
        raise InvalidArgumentError("Channel response needs a non-empty path set")
    return ChannelVector(frequency, channel_matrix(paths, array, [frequency])[:, 0])


def derive_seed(master: int, *counters: int) -> int:
    """Child seed for (master, counters...) independent of evaluation order"""
    if master < 0 or any(c < 0 for c in counters):
        raise InvalidArgumentError("Seeds and counters must be non-negative integers")
    sequence = np.random.SeedSequence([int(master), *(int(c) for c in counters)])
    return int(sequence.generate_state(1, dtype=np.uint64)[0])


def complex_gaussian(rng: np.random.Generator, shape: Tuple[int, ...], variance: float) -> np.ndarray:
    """Circularly-symmetric complex Gaussian samples of the given variance"""
    scale = np.sqrt(variance / 2)
    real = rng.standard_normal(shape)
    imag = rng.standard_normal(shape)
    return scale * (real + 1j * imag)


def pilot_noise(seed: int, shape: Tuple[int, int], variance: float) -> np.ndarray:
    """w_m(f_k) for every element and pilot, each sample drawn from its own counter-keyed stream.

    The stream of sample (m, k) is Philox keyed on ``seed`` with (m, k) in the
    upper counter words, so a sample depends only on (seed, m, k).
    """
    if seed < 0:
        raise InvalidArgumentError(f"Seed must be non-negative, got {seed}")
    rows, cols = shape
    noise = np.empty((rows, cols), dtype=complex)
    for element in range(rows):
        for pilot in range(cols):
            counter = (element << 128) | (pilot << 192)
            rng = np.random.Generator(np.random.Philox(key=int(seed), counter=counter))
            noise[element, pilot] = complex_gaussian(rng, (), variance)
    return noise


def simulate_pilots(paths: PathSet, array: ArrayGeometry, pilots: PilotGrid, noise_variance: float,
                    seed: int) -> ReceivedPilots:
    """r_m(f_k) = h_m(f_k) s(f_k) + w_m(f_k), deterministic given the seed"""
    if noise_variance < 0:
        raise InvalidArgumentError(f"Noise variance must be non-negative, got {noise_variance}")
    clean = channel_matrix(paths, array, pilots.frequencies) * pilots.symbols[np.newaxis, :]
    if noise_variance == 0:
        return ReceivedPilots(clean, 0.0)
    return ReceivedPilots(clean + pilot_noise(seed, clean.shape, noise_variance), noise_variance)


__all__ = [
    "SPEED_OF_LIGHT",
    "PARAMETERS_PER_PATH",
    "PathParameters",
    "PathSet",
    "ElementPattern",
    "IsotropicPattern",
    "PATTERNS",
    "ArrayGeometry",
    "PilotGrid",
    "ChannelVector",
    "ReceivedPilots",
    "wrap_azimuth",
    "direction_vector",
    "direction_derivatives",
    "build_planar_array",
    "array_response",
    "array_response_gradients",
    "antenna_pattern",
    "antenna_pattern_gradients",
    "channel_matrix",
    "channel_response",
    "derive_seed",
    "complex_gaussian",
    "pilot_noise",
    "simulate_pilots",
]
