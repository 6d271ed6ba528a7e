"""SAGE maximum-likelihood extraction of specular paths and high-resolution extrapolation.

The estimator minimises ``sum_m sum_k |r_m(f_k) - sum_l alpha_l a_m(phi_l, theta_l, f_k)
exp(-j 2 pi f_k tau_l) s(f_k)|^2`` one path and one parameter at a time. Gains
are always set to their closed-form least-squares value, so every update
maximises the concentrated objective ``|sig^H R|^2 / ||sig||^2`` of the path
signature ``sig`` against the residual ``R`` the other paths leave.
"""

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from fddkit.engine.channel_model import (
    PARAMETERS_PER_PATH,
    ArrayGeometry,
    ChannelVector,
    PathParameters,
    PathSet,
    PilotGrid,
    ReceivedPilots,
    array_response,
    channel_matrix,
    channel_response,
    direction_vector,
    wrap_azimuth,
)
from fddkit.engine.errors import DimensionError, InvalidArgumentError, OverParameterizedError
from fddkit.utilities.messenger import Messenger

messenger = Messenger()


@dataclass(frozen=True)
class SageConfig:
    """Search granularity and stopping rules of one SAGE run"""

    num_paths: int
    delay_step: float = 1e-9
    angle_step: float = np.pi / 180
    max_iterations: int = 50
    convergence_threshold: float = 1e-6
    max_delay: float = 2.5e-6
    refinement_levels: int = 3
    refinement_factor: int = 10
    min_residual_reduction: Optional[float] = None

    def __post_init__(self):
        if self.num_paths < 1:
            raise InvalidArgumentError(f"SAGE needs at least one path, got {self.num_paths}")
        if not self.delay_step > 0 or not self.max_delay > 0:
            raise InvalidArgumentError("Delay step and maximum delay must be positive")
        if not 0 < self.angle_step <= np.pi / 90 * (1 + 1e-12):
            raise InvalidArgumentError(f"Angle step must lie in (0, pi/90], got {self.angle_step}")
        if self.max_iterations < 1:
            raise InvalidArgumentError("max_iterations must be at least 1")
        if not self.convergence_threshold > 0:
            raise InvalidArgumentError("Convergence threshold must be positive")
        if self.refinement_levels < 0 or self.refinement_factor < 2:
            raise InvalidArgumentError("Refinement needs levels >= 0 and a zoom factor >= 2")
        if self.min_residual_reduction is not None and not 0 < self.min_residual_reduction < 1:
            raise InvalidArgumentError("min_residual_reduction must lie in (0, 1)")


@dataclass(frozen=True, eq=False)
class SageResult:
    """Extracted paths, residual power after init and after every cycle, cycles used"""

    estimated_paths: PathSet
    residual_power: Tuple[float, ...]
    iterations_used: int
    negligible: Tuple[bool, ...] = ()
    objective_trace: Tuple[float, ...] = field(default=())

    @property
    def final_residual_power(self) -> float:
        return self.residual_power[-1]


class SageEstimator:
    """SAGE bound to one array, pilot grid and configuration.

    The coarse search tables (delay phasors and carrier-frequency pattern
    vectors on the angular grid) are built once and reused across runs.
    """

    def __init__(self, array: ArrayGeometry, pilots: PilotGrid, config: SageConfig):
        if config.delay_step > 1 / pilots.bandwidth * (1 + 1e-12):
            raise InvalidArgumentError(
                f"Delay step {config.delay_step:.3e} s exceeds 1/B = {1 / pilots.bandwidth:.3e} s")
        if pilots.total_energy == 0:
            raise InvalidArgumentError("SAGE needs at least one non-zero pilot symbol")
        if PARAMETERS_PER_PATH * config.num_paths > array.num_elements * pilots.num_pilots:
            raise OverParameterizedError(
                f"{config.num_paths} paths need {PARAMETERS_PER_PATH * config.num_paths} parameters, "
                f"only {array.num_elements * pilots.num_pilots} observations available")
        self.array = array
        self.pilots = pilots
        self.config = config
        self.max_delay = config.max_delay + config.delay_step

        self.delay_grid = np.arange(0.0, config.max_delay + config.delay_step / 2, config.delay_step)
        self._delay_phasors = np.exp(2j * np.pi * np.outer(self.delay_grid, pilots.frequencies))

        if array.is_xz_planar:
            azimuths = np.arange(0.0, np.pi + config.angle_step / 2, config.angle_step)
        else:
            azimuths = np.arange(-np.pi, np.pi - config.angle_step / 2, config.angle_step)
        elevations = np.clip(np.arange(0.0, np.pi + config.angle_step / 2, config.angle_step), 0.0, np.pi)
        grid_azimuth, grid_elevation = np.meshgrid(np.clip(azimuths, -np.pi, np.pi), elevations, indexing="ij")
        self.grid_azimuths = grid_azimuth.reshape(-1)
        self.grid_elevations = grid_elevation.reshape(-1)
        directions = direction_vector(self.grid_azimuths, self.grid_elevations)
        self._grid_conj = np.exp(1j * array.wavenumber(0.0) * (directions @ array.positions.T))

    def signature(self, path: PathParameters) -> np.ndarray:
        """Unit-gain contribution of one path to the received pilots, shape (M, K)"""
        return self._signature(path.delay, path.azimuth, path.elevation)

    def _signature(self, delay: float, azimuth: float, elevation: float) -> np.ndarray:
        frequencies = self.pilots.frequencies
        pattern = array_response(self.array, azimuth, elevation, frequencies)
        return pattern * (np.exp(-2j * np.pi * frequencies * delay) * self.pilots.symbols)[np.newaxis, :]

    @staticmethod
    def _fit(signature: np.ndarray, residual: np.ndarray) -> Tuple[complex, float]:
        """Closed-form gain and concentrated score |sig^H R|^2 / ||sig||^2"""
        energy = float(np.vdot(signature, signature).real)
        if energy == 0:
            return 0j, 0.0
        correlation = np.vdot(signature, residual)
        return correlation / energy, float(abs(correlation) ** 2 / energy)

    def _coarse_delay_noncoherent(self, despread: np.ndarray) -> float:
        scores = np.sum(np.abs(despread @ self._delay_phasors.T) ** 2, axis=0)
        return float(self.delay_grid[np.argmax(scores)])

    def _coarse_delay_coherent(self, despread: np.ndarray, azimuth: float, elevation: float) -> float:
        pattern = array_response(self.array, azimuth, elevation, self.pilots.frequencies)
        combined = np.sum(np.conj(pattern) * despread, axis=0)
        scores = np.abs(self._delay_phasors @ combined) ** 2
        return float(self.delay_grid[np.argmax(scores)])

    def _coarse_angles(self, despread: np.ndarray, delay: float) -> Tuple[float, float]:
        focused = despread @ np.exp(2j * np.pi * self.pilots.frequencies * delay)
        index = int(np.argmax(np.abs(self._grid_conj @ focused)))
        return float(self.grid_azimuths[index]), float(self.grid_elevations[index])

    def _coarse_path(self, residual: np.ndarray) -> Tuple[float, float, float]:
        despread = residual * np.conj(self.pilots.symbols)[np.newaxis, :]
        delay = self._coarse_delay_noncoherent(despread)
        azimuth, elevation = self._coarse_angles(despread, delay)
        delay = self._coarse_delay_coherent(despread, azimuth, elevation)
        azimuth, elevation = self._coarse_angles(despread, delay)
        return delay, azimuth, elevation

    def _check_received(self, received: ReceivedPilots):
        if received.samples.shape != (self.array.num_elements, self.pilots.num_pilots):
            raise DimensionError(
                f"Received pilots have shape {received.samples.shape}, expected "
                f"({self.array.num_elements}, {self.pilots.num_pilots})")

    def initialize(self, received: ReceivedPilots) -> SageResult:
        """Successive ordered cancellation on the coarse grid"""
        self._check_received(received)
        residual = received.samples.copy()
        power = float(np.vdot(residual, residual).real)
        paths: List[PathParameters] = []
        negligible: List[bool] = []
        for index in range(self.config.num_paths):
            delay, azimuth, elevation = self._coarse_path(residual)
            signature = self._signature(delay, azimuth, elevation)
            gain, score = self._fit(signature, residual)
            if score <= 0.0 or power == 0.0:
                gain, score = 0j, 0.0
            rule = self.config.min_residual_reduction
            if paths and rule is not None and power > 0 and score < rule * power:
                messenger.note(f"Stopped adding paths after {len(paths)}: residual reduction below {rule:.1%}")
                break
            candidate = residual - gain * signature
            new_power = float(np.vdot(candidate, candidate).real)
            is_negligible = not new_power < power
            if is_negligible:
                messenger.warning(f"Path {index} does not reduce the residual power and is flagged negligible")
                gain = 0j
            else:
                residual, power = candidate, new_power
            paths.append(PathParameters(gain, delay, azimuth, elevation))
            negligible.append(is_negligible)
        return SageResult(PathSet(tuple(paths)), (power,), 0, tuple(negligible), (power,))

    def _line_search(self, residual: np.ndarray, delay: float, azimuth: float, elevation: float,
                     parameter: int) -> Tuple[float, float, float]:
        """Zooming grid search of one parameter around its current value"""
        coarse = self.config.delay_step if parameter == 0 else self.config.angle_step
        current = (delay, azimuth, elevation)
        best_value = current[parameter]
        best_score = self._fit(self._signature(*current), residual)[1]
        for level in range(self.config.refinement_levels + 1):
            half_width = 2 if level == 0 else self.config.refinement_factor
            step = coarse / self.config.refinement_factor ** level
            candidates = best_value + step * np.arange(-half_width, half_width + 1)
            if parameter == 0:
                candidates = np.clip(candidates, 0.0, self.max_delay)
            elif parameter == 1:
                candidates = wrap_azimuth(candidates)
            else:
                candidates = np.clip(candidates, 0.0, np.pi)
            for candidate in candidates:
                trial = list(current)
                trial[parameter] = float(candidate)
                score = self._fit(self._signature(*trial), residual)[1]
                if score > best_score:
                    best_value, best_score = float(candidate), score
        updated = list(current)
        updated[parameter] = best_value
        return updated[0], updated[1], updated[2]

    def refine(self, init: SageResult, received: ReceivedPilots) -> SageResult:
        """Cyclic coordinate updates (delay, azimuth, elevation, gain) until convergence"""
        self._check_received(received)
        paths = list(init.estimated_paths)
        signatures = [self.signature(p) for p in paths]
        residual = received.samples - sum(p.gain * s for p, s in zip(paths, signatures))
        power = float(np.vdot(residual, residual).real)
        history = [power]
        trace = [power]
        iterations = 0
        for _ in range(self.config.max_iterations):
            iterations += 1
            start_power = power
            for index, path in enumerate(paths):
                residual = residual + path.gain * signatures[index]
                delay, azimuth, elevation = path.delay, path.azimuth, path.elevation
                for parameter in range(3):
                    delay, azimuth, elevation = self._line_search(residual, delay, azimuth, elevation, parameter)
                    signature = self._signature(delay, azimuth, elevation)
                    gain, _ = self._fit(signature, residual)
                    updated = residual - gain * signature
                    trace.append(float(np.vdot(updated, updated).real))
                paths[index] = PathParameters(gain, delay, azimuth, elevation)
                signatures[index] = signature
                residual = updated
            power = float(np.vdot(residual, residual).real)
            history.append(power)
            if start_power == 0 or (start_power - power) / start_power < self.config.convergence_threshold:
                break
        negligible = tuple(abs(p.gain) == 0 for p in paths)
        return SageResult(PathSet(tuple(paths)), tuple(history), iterations, negligible, tuple(trace))

    def estimate(self, received: ReceivedPilots) -> SageResult:
        return self.refine(self.initialize(received), received)


def sage_initialize(received: ReceivedPilots, pilots: PilotGrid, array: ArrayGeometry,
                    config: SageConfig) -> SageResult:
    return SageEstimator(array, pilots, config).initialize(received)


def sage_refine(init: SageResult, received: ReceivedPilots, pilots: PilotGrid, array: ArrayGeometry,
                config: SageConfig) -> SageResult:
    if len(init.estimated_paths) > config.num_paths:
        raise InvalidArgumentError("Initial estimate carries more paths than the configuration allows")
    return SageEstimator(array, pilots, config).refine(init, received)


def sage_estimate(received: ReceivedPilots, pilots: PilotGrid, array: ArrayGeometry,
                  config: SageConfig) -> SageResult:
    """Initialise by successive cancellation, then refine"""
    return SageEstimator(array, pilots, config).estimate(received)


def hr_extrapolate(result: SageResult, array: ArrayGeometry, frequency: float) -> ChannelVector:
    """Evaluate the channel model at the estimated paths"""
    return channel_response(result.estimated_paths, array, frequency)


def hr_extrapolate_many(result: SageResult, array: ArrayGeometry, frequencies: Sequence[float]) -> np.ndarray:
    """:func:`hr_extrapolate` for many frequencies at once, shape (M, F)"""
    return channel_matrix(result.estimated_paths, array, frequencies)


__all__ = [
    "SageConfig",
    "SageResult",
    "SageEstimator",
    "sage_initialize",
    "sage_refine",
    "sage_estimate",
    "hr_extrapolate",
    "hr_extrapolate_many",
]
