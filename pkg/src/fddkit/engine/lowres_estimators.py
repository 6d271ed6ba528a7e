"""Per-antenna LS estimation at the pilots and LMMSE inter/extrapolation."""

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from fddkit.engine.channel_model import ChannelVector, PilotGrid, ReceivedPilots
from fddkit.engine.errors import DimensionError, IllConditionedError, InvalidArgumentError, ZeroPilotError

CONDITION_LIMIT = 1e12


@dataclass(frozen=True, eq=False)
class LsEstimates:
    """h_LS,m(f_k) for every antenna and pilot, shape (M, K)"""

    values: np.ndarray
    pilots: PilotGrid

    @property
    def num_antennas(self) -> int:
        return self.values.shape[0]


@dataclass(frozen=True)
class LmmseModel:
    """Uniform power-delay prior: max delay, channel power P_h, noise variance, pilot energy E_s.

    P_h is the total channel power L E[|alpha|^2]; the default of 1 matches
    scenarios normalised to unit channel power.
    """

    max_delay: float
    noise_variance: float
    pilot_energy: float = 1.0
    channel_power: float = 1.0

    def __post_init__(self):
        if not self.max_delay > 0:
            raise InvalidArgumentError(f"Maximum delay must be positive, got {self.max_delay}")
        if not self.channel_power > 0:
            raise InvalidArgumentError(f"Channel power must be positive, got {self.channel_power}")
        if not self.pilot_energy > 0:
            raise InvalidArgumentError(f"Pilot energy must be positive, got {self.pilot_energy}")
        if self.noise_variance < 0:
            raise InvalidArgumentError(f"Noise variance must be non-negative, got {self.noise_variance}")


@dataclass(frozen=True, eq=False)
class ErrorStats:
    """Error correlation E(f) of a channel estimate, its diagonal and (for LMMSE) the bias"""

    frequency: float
    mse_per_antenna: np.ndarray
    error_correlation: np.ndarray
    bias: Optional[np.ndarray] = None

    @property
    def mean_mse(self) -> float:
        """tr E(f) / M"""
        return float(np.mean(self.mse_per_antenna))


def _check_pilots(pilots: PilotGrid):
    zero = np.flatnonzero(pilots.symbols == 0)
    if zero.size:
        index = int(zero[0])
        raise ZeroPilotError(index, float(pilots.frequencies[index]))


def ls_estimate(received: ReceivedPilots, pilots: PilotGrid) -> LsEstimates:
    """h_LS,m(f_k) = r_m(f_k) / s(f_k)"""
    if received.num_pilots != pilots.num_pilots:
        raise DimensionError(
            f"Received pilots carry {received.num_pilots} subcarriers, the pilot grid {pilots.num_pilots}")
    _check_pilots(pilots)
    return LsEstimates(received.samples / pilots.symbols[np.newaxis, :], pilots)


def ls_error_stats(pilots: PilotGrid, noise_variance: float, num_antennas: int, index: int) -> ErrorStats:
    """Analytic LS error statistics at pilot ``index``: (sigma^2/|s_k|^2) I"""
    if not 0 <= index < pilots.num_pilots:
        raise InvalidArgumentError(f"Pilot index {index} out of range")
    if pilots.symbols[index] == 0:
        raise ZeroPilotError(index, float(pilots.frequencies[index]))
    variance = noise_variance / pilots.energies[index]
    return ErrorStats(
        frequency=float(pilots.frequencies[index]),
        mse_per_antenna=np.full(num_antennas, variance),
        error_correlation=variance * np.eye(num_antennas, dtype=complex),
    )


def channel_autocorrelation(model: LmmseModel, delta_f):
    """C_h(df) = P_h exp(-j pi df tau_max) sinc(pi df tau_max)"""
    delta_f = np.asarray(delta_f, dtype=float)
    product = delta_f * model.max_delay
    # numpy's sinc is the normalised sin(pi x)/(pi x)
    value = model.channel_power * np.exp(-1j * np.pi * product) * np.sinc(product)
    return complex(value) if value.ndim == 0 else value


class LmmseSolver:
    """Factorised K x K normal equations C_LS p = c for one model and pilot grid"""

    def __init__(self, model: LmmseModel, pilots: PilotGrid):
        _check_pilots(pilots)
        self.model = model
        self.pilots = pilots
        frequencies = pilots.frequencies
        covariance = channel_autocorrelation(model, np.subtract.outer(frequencies, frequencies))
        covariance = np.atleast_2d(covariance) + np.diag(model.noise_variance / pilots.energies)
        self.covariance = covariance
        self.condition_number = float(np.linalg.cond(covariance))
        if not np.isfinite(self.condition_number) or self.condition_number > CONDITION_LIMIT:
            raise IllConditionedError("LMMSE covariance C_LS is numerically singular", self.condition_number)
        try:
            self._factor = cho_factor(covariance, lower=True)
        except LinAlgError as e:
            raise IllConditionedError(f"Cholesky factorisation of C_LS failed: {e}", self.condition_number) from e

    def cross_covariance(self, frequency: float) -> np.ndarray:
        """c_k = C_h(f_k - f)"""
        return np.atleast_1d(channel_autocorrelation(self.model, self.pilots.frequencies - frequency))

    def weights(self, frequency: float) -> np.ndarray:
        """p(f), length K; the estimate is p^H h_LS,m for every antenna"""
        return cho_solve(self._factor, self.cross_covariance(float(frequency)))

    def weight_matrix(self, frequencies) -> np.ndarray:
        """Weights for many target frequencies, one column each, shape (K, F)"""
        frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
        cross = channel_autocorrelation(self.model, np.subtract.outer(self.pilots.frequencies, frequencies))
        return cho_solve(self._factor, cross)

    def estimate(self, ls: LsEstimates, frequency: float) -> ChannelVector:
        if ls.values.shape[1] != self.pilots.num_pilots:
            raise DimensionError("LS estimates do not match the solver's pilot grid")
        return ChannelVector(frequency, ls.values @ np.conj(self.weights(frequency)))


def lmmse_weights(model: LmmseModel, pilots: PilotGrid, frequency: float) -> np.ndarray:
    return LmmseSolver(model, pilots).weights(frequency)


def lmmse_estimate(ls: LsEstimates, model: LmmseModel, frequency: float,
                   solver: Optional[LmmseSolver] = None) -> ChannelVector:
    """h_LMMSE,m(f) = p^H(f) h_LS,m with the same weights on every antenna"""
    solver = solver or LmmseSolver(model, ls.pilots)
    return solver.estimate(ls, frequency)


def lmmse_error_stats(model: LmmseModel, pilots: PilotGrid, true_channel_per_pilot: np.ndarray,
                      true_channel_at_f: ChannelVector, frequency: float,
                      solver: Optional[LmmseSolver] = None) -> ErrorStats:
    """Noise-only error statistics of the LMMSE estimate for a deterministic channel.

    With u_m = p^H h_m (the noiseless estimate) the bias is b = u - h(f) and
    E(f) = b b^H + (sum_k |p_k|^2 sigma^2 / |s_k|^2) I.
    """
    true_channel_per_pilot = np.asarray(true_channel_per_pilot, dtype=complex)
    if true_channel_per_pilot.ndim != 2 or true_channel_per_pilot.shape[1] != pilots.num_pilots:
        raise DimensionError(f"True channel must be (M, {pilots.num_pilots}), got {true_channel_per_pilot.shape}")
    if true_channel_per_pilot.shape[0] != len(true_channel_at_f):
        raise DimensionError("True channel at the pilots and at f disagree on the antenna count")
    solver = solver or LmmseSolver(model, pilots)
    weights = solver.weights(frequency)
    bias = true_channel_per_pilot @ np.conj(weights) - true_channel_at_f.values
    noise_power = float(np.sum(np.abs(weights) ** 2 * model.noise_variance / pilots.energies))
    correlation = np.outer(bias, np.conj(bias)) + noise_power * np.eye(bias.size)
    return ErrorStats(
        frequency=float(frequency),
        mse_per_antenna=np.abs(bias) ** 2 + noise_power,
        error_correlation=correlation,
        bias=bias,
    )


__all__ = [
    "CONDITION_LIMIT",
    "LsEstimates",
    "LmmseModel",
    "ErrorStats",
    "ls_estimate",
    "ls_error_stats",
    "channel_autocorrelation",
    "LmmseSolver",
    "lmmse_weights",
    "lmmse_estimate",
    "lmmse_error_stats",
]
