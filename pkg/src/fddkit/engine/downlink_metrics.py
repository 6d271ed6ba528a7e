"""Downlink performance under imperfect CSI: MRT, beamforming efficiency, SNR, spectral efficiency and SER."""

from dataclasses import dataclass
from typing import Callable, Optional, Tuple, Union

import numpy as np
from scipy.special import erfc
from scipy.stats import norm

from fddkit.engine.channel_model import ChannelVector, derive_seed
from fddkit.engine.errors import DimensionError, InvalidArgumentError
from fddkit.utilities.messenger import Messenger

messenger = Messenger()

SKIPPED_TRIALS_WARNING = 0.01

Estimator = Callable[[np.random.Generator], np.ndarray]
Vector = Union[ChannelVector, np.ndarray]


def _values(vector: Vector) -> np.ndarray:
    if isinstance(vector, ChannelVector):
        return vector.values
    return np.asarray(vector, dtype=complex).reshape(-1)


def _check_order(constellation_order: int):
    root = int(round(np.sqrt(constellation_order)))
    if constellation_order < 4 or root * root != constellation_order:
        raise InvalidArgumentError(f"Constellation order must be a perfect square >= 4, got {constellation_order}")


@dataclass(frozen=True)
class DownlinkConfig:
    """Downlink symbol energy E_d, receiver noise variance and square QAM order Q"""

    symbol_energy: float = 1.0
    noise_variance: float = 0.1
    constellation_order: int = 16

    def __post_init__(self):
        if not self.symbol_energy > 0:
            raise InvalidArgumentError(f"Downlink symbol energy must be positive, got {self.symbol_energy}")
        if not self.noise_variance > 0:
            raise InvalidArgumentError(f"Noise variance must be positive, got {self.noise_variance}")
        _check_order(self.constellation_order)


@dataclass(frozen=True)
class EfficiencyReport:
    frequency: float
    eta_monte_carlo: Optional[float]
    eta_approx: Optional[float]
    snr_downlink: float
    spectral_efficiency: float
    ser: float


def to_db(value):
    return 10 * np.log10(value)


def from_db(value):
    return 10 ** (np.asarray(value, dtype=float) / 10)


def mrt_beamformer(estimate: Vector) -> np.ndarray:
    """g = conj(h_hat) / ||h_hat||"""
    values = _values(estimate)
    magnitude = np.linalg.norm(values)
    if magnitude == 0:
        raise InvalidArgumentError("Cannot steer towards an all-zero channel estimate")
    return np.conj(values) / magnitude


def uniform_beamformer(num_antennas: int) -> np.ndarray:
    """Channel-ignorant beamformer 1/sqrt(M)"""
    if num_antennas < 1:
        raise InvalidArgumentError(f"Antenna count must be positive, got {num_antennas}")
    return np.full(num_antennas, 1 / np.sqrt(num_antennas), dtype=complex)


def beamforming_gain(true_channel: Vector, beamformer: np.ndarray) -> float:
    """|h^T g|^2 / ||h||^2 for a unit-norm beamformer"""
    channel = _values(true_channel)
    beamformer = np.asarray(beamformer, dtype=complex)
    if channel.shape != beamformer.shape:
        raise DimensionError("Channel and beamformer must have the same length")
    power = float(np.vdot(channel, channel).real)
    if power == 0:
        raise InvalidArgumentError("Beamforming gain is undefined for an all-zero channel")
    return float(abs(channel @ beamformer) ** 2 / power)


def normalized_correlation(estimates: np.ndarray, channels: np.ndarray) -> np.ndarray:
    """|h_hat^H h|^2 / (||h_hat||^2 ||h||^2) column by column; NaN where the estimate is zero"""
    estimates = np.asarray(estimates, dtype=complex)
    channels = np.asarray(channels, dtype=complex)
    if estimates.shape != channels.shape:
        raise DimensionError(f"Estimates {estimates.shape} and channels {channels.shape} disagree")
    energy = np.sum(np.abs(estimates) ** 2, axis=0)
    power = np.sum(np.abs(channels) ** 2, axis=0)
    if np.any(power == 0):
        raise InvalidArgumentError("Beamforming efficiency is undefined for an all-zero channel")
    correlation = np.abs(np.sum(np.conj(estimates) * channels, axis=0)) ** 2
    scale = energy * power
    return np.divide(correlation, scale, out=np.full(np.shape(scale), np.nan), where=energy > 0)


def efficiency_trials(true_channel: Vector, estimator: Estimator, trials: int, seed: int) -> np.ndarray:
    """Normalised correlation of a fresh estimate with the true channel per trial; NaN where the estimate is zero.

    Trial ``t`` hands the estimator a generator seeded with ``derive_seed(seed, t)``.
    """
    if trials < 1:
        raise InvalidArgumentError(f"At least one trial is required, got {trials}")
    channel = _values(true_channel)
    values = np.full(trials, np.nan)
    for trial in range(trials):
        rng = np.random.default_rng(derive_seed(seed, trial))
        estimate = np.asarray(estimator(rng), dtype=complex).reshape(-1)
        if estimate.shape != channel.shape:
            raise DimensionError(f"Estimator returned {estimate.shape[0]} antennas, expected {channel.size}")
        values[trial] = float(normalized_correlation(estimate, channel))
    return values


def efficiency_monte_carlo(true_channel: Vector, estimator: Estimator, trials: int, seed: int) -> float:
    """Sample mean of :func:`efficiency_trials` over the non-skipped trials"""
    values = efficiency_trials(true_channel, estimator, trials, seed)
    skipped = int(np.count_nonzero(np.isnan(values)))
    if skipped == trials:
        raise InvalidArgumentError("Every trial produced an all-zero estimate")
    if skipped > SKIPPED_TRIALS_WARNING * trials:
        messenger.warning(f"Skipped {skipped} of {trials} trials with an all-zero channel estimate")
    return float(np.nanmean(values))


def efficiency_confidence(values: np.ndarray, level: float = 0.95) -> Tuple[float, float]:
    """Normal-approximation confidence interval of the mean efficiency"""
    values = np.asarray(values, dtype=float)
    values = values[~np.isnan(values)]
    if values.size < 2:
        raise InvalidArgumentError("A confidence interval needs at least two trials")
    mean = float(np.mean(values))
    half = float(norm.ppf(0.5 + level / 2) * np.std(values, ddof=1) / np.sqrt(values.size))
    return mean - half, mean + half


def efficiency_approx(true_channel: Vector, error_correlation: np.ndarray) -> float:
    """Rayleigh-quotient approximation (||h||^2 + h^H E h / ||h||^2) / (||h||^2 + tr E)"""
    channel = _values(true_channel)
    correlation = np.asarray(error_correlation, dtype=complex)
    if correlation.shape != (channel.size, channel.size):
        raise DimensionError(f"Error correlation must be {channel.size}x{channel.size}, got {correlation.shape}")
    power = float(np.vdot(channel, channel).real)
    if power == 0:
        raise InvalidArgumentError("Beamforming efficiency is undefined for an all-zero channel")
    hermitian = (correlation + np.conj(correlation.T)) / 2
    eigenvalues = np.linalg.eigvalsh(hermitian)
    if eigenvalues[0] < -1e-9 * max(abs(eigenvalues[-1]), np.finfo(float).tiny):
        raise InvalidArgumentError(f"Error correlation is not positive semidefinite (min eigenvalue {eigenvalues[0]:.3e})")
    quotient = float(np.real(np.vdot(channel, hermitian @ channel))) / power
    trace = float(np.real(np.trace(hermitian)))
    return (power + quotient) / (power + trace)


def downlink_snr(true_channel: Vector, eta: float, config: DownlinkConfig) -> float:
    """SNR_DL = (E_d ||h||^2 / sigma^2) eta"""
    if not 0.0 <= eta <= 1.0:
        raise InvalidArgumentError(f"Beamforming efficiency must lie in [0, 1], got {eta}")
    channel = _values(true_channel)
    return config.symbol_energy * float(np.vdot(channel, channel).real) / config.noise_variance * eta


def spectral_efficiency(snr: float) -> float:
    if snr < 0:
        raise InvalidArgumentError(f"SNR must be non-negative, got {snr}")
    return float(np.log2(1 + snr))


def ser_mqam(snr: float, constellation_order: int) -> float:
    """Uncoded square-QAM symbol error rate, clipped to [0, 1] where the closed form exceeds 1"""
    _check_order(constellation_order)
    if snr < 0:
        raise InvalidArgumentError(f"SNR must be non-negative, got {snr}")
    root = np.sqrt(constellation_order)
    value = 2 * (root - 1) / root * erfc(np.sqrt(3 * snr / (2 * (constellation_order - 1))))
    return float(np.clip(value, 0.0, 1.0))


def efficiency_report(frequency: float, true_channel: Vector, config: DownlinkConfig,
                      eta_monte_carlo: Optional[float] = None, eta_approx: Optional[float] = None) -> EfficiencyReport:
    """SNR, SE and SER from the approximate efficiency, or from the Monte-Carlo one when absent"""
    eta = eta_approx if eta_approx is not None else eta_monte_carlo
    if eta is None:
        raise InvalidArgumentError("An efficiency report needs a Monte-Carlo or an approximate efficiency")
    snr = downlink_snr(true_channel, float(np.clip(eta, 0.0, 1.0)), config)
    return EfficiencyReport(
        frequency=float(frequency),
        eta_monte_carlo=eta_monte_carlo,
        eta_approx=eta_approx,
        snr_downlink=snr,
        spectral_efficiency=spectral_efficiency(snr),
        ser=ser_mqam(snr, config.constellation_order),
    )


__all__ = [
    "DownlinkConfig",
    "EfficiencyReport",
    "to_db",
    "from_db",
    "mrt_beamformer",
    "uniform_beamformer",
    "beamforming_gain",
    "normalized_correlation",
    "efficiency_trials",
    "efficiency_monte_carlo",
    "efficiency_confidence",
    "efficiency_approx",
    "downlink_snr",
    "spectral_efficiency",
    "ser_mqam",
    "efficiency_report",
]
