"""Cramér-Rao bound on the extrapolated channel.

Fisher information of the path parameters, the Jacobian of the channel at a
target frequency, the transformed bound ``C(f)``, the separated-rays closed
form and its extrapolation range, plus diagnostics for the assumptions under
which the two agree.
"""

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.linalg import LinAlgError, solve

from fddkit.engine.channel_model import (
    PARAMETERS_PER_PATH,
    ArrayGeometry,
    PathParameters,
    PathSet,
    PilotGrid,
    array_response,
    array_response_gradients,
    wrap_azimuth,
)
from fddkit.engine.errors import (
    DimensionError,
    ExtrapolationDomainError,
    IllConditionedFisherError,
    InvalidArgumentError,
)

CONDITION_LIMIT = 1e12
SEPARATION_THRESHOLD = 1e-3
SYMMETRY_THRESHOLD = 1e-6
BLOCK_DIAGONAL_THRESHOLD = 1e-6


def _derivatives(paths: PathSet, array: ArrayGeometry, frequencies: np.ndarray, weights: np.ndarray,
                 frozen_pattern: bool) -> np.ndarray:
    """d/dpsi of sum_l alpha_l a(f) exp(-j 2 pi f tau_l) w(f), shape (5L, M, F)"""
    rows = []
    for path in paths:
        pattern = array_response(array, path.azimuth, path.elevation, frequencies, frozen_pattern)
        grad_azimuth, grad_elevation = array_response_gradients(
            array, path.azimuth, path.elevation, frequencies, frozen_pattern)
        phasor = (np.exp(-2j * np.pi * frequencies * path.delay) * weights)[np.newaxis, :]
        rows.extend([
            path.gain * pattern * phasor * (-2j * np.pi * frequencies)[np.newaxis, :],
            path.gain * grad_azimuth * phasor,
            path.gain * grad_elevation * phasor,
            pattern * phasor,
            1j * pattern * phasor,
        ])
    return np.stack(rows)


def _equilibrate(entries: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Unit-diagonal scaling D^-1 F D^-1 and the scale D (zero where the diagonal vanishes)"""
    diagonal = np.clip(np.diag(entries), 0.0, None)
    scale = np.sqrt(diagonal)
    inverse = np.divide(1.0, scale, out=np.zeros_like(scale), where=scale > 0)
    return entries * np.outer(inverse, inverse), scale


@dataclass(frozen=True, eq=False)
class FisherMatrix:
    """5L x 5L Fisher information of (delay, azimuth, elevation, Re gain, Im gain) per path"""

    entries: np.ndarray
    paths: PathSet
    array: ArrayGeometry
    pilots: PilotGrid
    noise_variance: float
    frozen_pattern: bool = False

    @property
    def num_paths(self) -> int:
        return len(self.paths)

    @property
    def equilibrated(self) -> np.ndarray:
        return _equilibrate(self.entries)[0]

    @property
    def condition_number(self) -> float:
        """2-norm condition of the unit-diagonal scaled matrix, inf when a parameter carries no information"""
        scaled, scale = _equilibrate(self.entries)
        if np.any(scale == 0):
            return float("inf")
        return float(np.linalg.cond(scaled))

    def block(self, first: int, second: int) -> np.ndarray:
        """The 5 x 5 sub-block coupling path ``first`` with path ``second``"""
        rows = slice(first * PARAMETERS_PER_PATH, (first + 1) * PARAMETERS_PER_PATH)
        cols = slice(second * PARAMETERS_PER_PATH, (second + 1) * PARAMETERS_PER_PATH)
        return self.entries[rows, cols]


@dataclass(frozen=True, eq=False)
class CrlbResult:
    """Bound matrix C(f) on the channel error correlation and its summaries"""

    frequency: float
    bound_matrix: np.ndarray
    mean_bound: float
    simplified_bound: Optional[float]
    condition_number: float

    @property
    def per_antenna(self) -> np.ndarray:
        return np.real(np.diag(self.bound_matrix))


def fisher_matrix(paths: PathSet, array: ArrayGeometry, pilots: PilotGrid, noise_variance: float,
                  frozen_pattern: bool = False) -> FisherMatrix:
    """(2/sigma^2) sum_m sum_k Re(conj(dmu/dpsi_u) dmu/dpsi_v)"""
    if not noise_variance > 0:
        raise InvalidArgumentError(f"Fisher information needs a positive noise variance, got {noise_variance}")
    derivatives = _derivatives(paths, array, pilots.frequencies, pilots.symbols, frozen_pattern)
    flat = derivatives.reshape(derivatives.shape[0], -1)
    entries = 2.0 / noise_variance * np.real(np.conj(flat) @ flat.T)
    entries = (entries + entries.T) / 2
    return FisherMatrix(entries, paths, array, pilots, float(noise_variance), frozen_pattern)


def jacobian(paths: PathSet, array: ArrayGeometry, frequency: float, frozen_pattern: bool = False) -> np.ndarray:
    """G(f): row u holds dh_m(f)/dpsi_u for every antenna m, shape (5L, M)"""
    frequencies = np.array([float(frequency)])
    return _derivatives(paths, array, frequencies, np.ones(1), frozen_pattern)[:, :, 0]


def signature_correlations(paths: PathSet, array: ArrayGeometry, pilots: PilotGrid) -> np.ndarray:
    """Normalised |sig_l^H sig_l'| between the pilot signatures of every path pair, shape (L, L)"""
    signatures = []
    for path in paths:
        pattern = array_response(array, path.azimuth, path.elevation, pilots.frequencies)
        signature = pattern * (np.exp(-2j * np.pi * pilots.frequencies * path.delay) * pilots.symbols)
        signatures.append(signature.reshape(-1))
    stacked = np.array(signatures)
    norms = np.linalg.norm(stacked, axis=1)
    gram = np.abs(np.conj(stacked) @ stacked.T)
    scale = np.outer(norms, norms)
    return np.divide(gram, scale, out=np.zeros_like(gram), where=scale > 0)


def closest_pair(paths: PathSet, array: ArrayGeometry, pilots: PilotGrid) -> Tuple[Optional[Tuple[int, int]], Optional[float]]:
    if len(paths) < 2:
        return None, None
    correlations = signature_correlations(paths, array, pilots)
    upper = np.triu_indices(len(paths), k=1)
    index = int(np.argmax(correlations[upper]))
    first, second = int(upper[0][index]), int(upper[1][index])
    return (first, second), float(correlations[first, second])


def _check_conditioning(fisher: FisherMatrix) -> float:
    condition = fisher.condition_number
    if not np.isfinite(condition) or condition >= CONDITION_LIMIT:
        pair, correlation = closest_pair(fisher.paths, fisher.array, fisher.pilots)
        raise IllConditionedFisherError(condition, pair, correlation)
    return condition


def inverse_fisher_product(fisher: FisherMatrix, right: np.ndarray) -> np.ndarray:
    """I_psi^{-1} X for a complex right-hand side, solved on the equilibrated matrix"""
    _check_conditioning(fisher)
    scaled, scale = _equilibrate(fisher.entries)
    scaled_right = right / scale[:, np.newaxis]
    stacked = np.hstack([scaled_right.real, scaled_right.imag])
    try:
        solution = solve(scaled, stacked, assume_a="sym")
    except LinAlgError as e:
        pair, correlation = closest_pair(fisher.paths, fisher.array, fisher.pilots)
        raise IllConditionedFisherError(fisher.condition_number, pair, correlation) from e
    half = right.shape[1]
    return (solution[:, :half] + 1j * solution[:, half:]) / scale[:, np.newaxis]


def crlb_matrix(fisher: FisherMatrix, jac: np.ndarray, frequency: float) -> CrlbResult:
    """C(f) bounding E[(h - h_hat)(h - h_hat)^H] for any unbiased estimator of psi.

    The orientation G^T I^-1 conj(G) matches the error correlation matrix; its
    diagonal equals that of G^H I^-1 G.
    """
    jac = np.asarray(jac, dtype=complex)
    if jac.ndim != 2 or jac.shape[0] != fisher.entries.shape[0]:
        raise DimensionError(f"Jacobian must have {fisher.entries.shape[0]} rows, got shape {jac.shape}")
    condition = _check_conditioning(fisher)
    bound = jac.T @ inverse_fisher_product(fisher, np.conj(jac))
    bound = (bound + np.conj(bound.T)) / 2
    num_antennas = jac.shape[1]
    simplified = None
    sigma_f_squared = fisher.pilots.sigma_f_squared
    if sigma_f_squared > 0:
        simplified = simplified_crlb(fisher.num_paths, num_antennas, fisher.pilots.total_energy,
                                     float(np.sqrt(sigma_f_squared)), fisher.noise_variance, frequency)
    return CrlbResult(
        frequency=float(frequency),
        bound_matrix=bound,
        mean_bound=float(np.real(np.trace(bound)) / num_antennas),
        simplified_bound=simplified,
        condition_number=condition,
    )


def crlb(paths: PathSet, array: ArrayGeometry, pilots: PilotGrid, noise_variance: float, frequency: float,
         frozen_pattern: bool = False) -> CrlbResult:
    fisher = fisher_matrix(paths, array, pilots, noise_variance, frozen_pattern)
    return crlb_matrix(fisher, jacobian(paths, array, frequency, frozen_pattern), frequency)


def parameter_crlb(fisher: FisherMatrix) -> np.ndarray:
    """Diagonal of I_psi^-1: the variance bound of every real path parameter, in psi order"""
    identity = np.eye(fisher.entries.shape[0])
    return np.real(np.diag(inverse_fisher_product(fisher, identity)))


def simplified_crlb(num_paths: int, num_antennas: int, total_energy: float, sigma_f: float,
                    noise_variance: float, frequency: float) -> float:
    """(sigma^2/E_T)(L/M)(2 + (f/sigma_F)^2 / 2)"""
    if sigma_f <= 0:
        raise InvalidArgumentError(f"Mean squared bandwidth must be positive, got sigma_F = {sigma_f}")
    if num_paths < 1 or num_antennas < 1 or not total_energy > 0 or noise_variance < 0:
        raise InvalidArgumentError("Path count, antenna count and pilot energy must be positive")
    return noise_variance / total_energy * num_paths / num_antennas * (2 + 0.5 * (frequency / sigma_f) ** 2)


def mean_squared_bandwidth(pilots: PilotGrid) -> float:
    """sigma_F^2 = sum f_k^2 |s_k|^2 / sum |s_k|^2"""
    if pilots.total_energy == 0:
        raise InvalidArgumentError("Mean squared bandwidth is undefined for all-zero pilots")
    return pilots.sigma_f_squared


def extrapolation_range(gamma: float, num_antennas: int, num_pilots: int, num_paths: int, sigma_f: float) -> float:
    """Frequency offset at which the simplified bound reaches gamma times the in-band LS error"""
    ratio = num_antennas * num_pilots * gamma / (2 * num_paths)
    if ratio < 1:
        raise ExtrapolationDomainError(
            f"No extrapolation range exists: M K gamma / (2 L) = {ratio:.4g} < 1")
    return 2 * sigma_f * float(np.sqrt(ratio - 1))


def _normalised(first: np.ndarray, second: np.ndarray) -> float:
    scale = np.linalg.norm(first) * np.linalg.norm(second)
    if scale == 0:
        return 0.0
    return float(abs(np.vdot(first, second)) / scale)


@dataclass(frozen=True)
class PairSeparation:
    """Normalised inner products between the delay and angular signatures of two paths"""

    first: int
    second: int
    delay_products: Dict[str, float]
    angle_products: Dict[str, float]

    @property
    def delay_separated(self) -> bool:
        return max(self.delay_products.values()) < SEPARATION_THRESHOLD

    @property
    def angle_separated(self) -> bool:
        return max(self.angle_products.values()) < SEPARATION_THRESHOLD

    @property
    def separated(self) -> bool:
        return self.delay_separated or self.angle_separated


@dataclass(frozen=True)
class PathSymmetry:
    """Per-path symmetry of the pilot energy in frequency and of the array around the ray"""

    index: int
    frequency_moment: float
    azimuth_product: float
    elevation_product: float

    @property
    def symmetric(self) -> bool:
        return max(self.frequency_moment, self.azimuth_product, self.elevation_product) < SYMMETRY_THRESHOLD


@dataclass(frozen=True)
class SeparationReport:
    pairs: Tuple[PairSeparation, ...]
    paths: Tuple[PathSymmetry, ...]
    max_off_diagonal: float
    block_diagonal: bool
    condition_number: float

    @property
    def rays_separated(self) -> bool:
        return all(pair.separated for pair in self.pairs)

    @property
    def arrays_symmetric(self) -> bool:
        return all(path.symmetric for path in self.paths)

    def as_dict(self) -> dict:
        return {
            "rays_separated": self.rays_separated,
            "arrays_symmetric": self.arrays_symmetric,
            "block_diagonal": self.block_diagonal,
            "max_off_diagonal": self.max_off_diagonal,
            "condition_number": self.condition_number,
            "pairs": [
                {"first": p.first, "second": p.second, "separated": p.separated,
                 "delay": p.delay_products, "angle": p.angle_products}
                for p in self.pairs
            ],
            "paths": [
                {"index": p.index, "symmetric": p.symmetric, "frequency_moment": p.frequency_moment,
                 "azimuth_product": p.azimuth_product, "elevation_product": p.elevation_product}
                for p in self.paths
            ],
        }


def separation_diagnostics(paths: PathSet, array: ArrayGeometry, pilots: PilotGrid,
                           frozen_pattern: bool = False) -> SeparationReport:
    """Inner products behind the separated-rays and symmetry conditions, plus a Fisher block check.

    Angular products use the carrier-frequency pattern, where the Fisher
    information factorises into a delay part and an angular part.
    """
    frequencies = pilots.frequencies
    delay_signatures = []
    angle_signatures = []
    for path in paths:
        signal = pilots.symbols * np.exp(-2j * np.pi * frequencies * path.delay)
        delay_signatures.append((signal, -2j * np.pi * frequencies * signal))
        pattern = array_response(array, path.azimuth, path.elevation, 0.0)
        grad_azimuth, grad_elevation = array_response_gradients(array, path.azimuth, path.elevation, 0.0)
        angle_signatures.append((pattern, grad_azimuth, grad_elevation))

    pairs: List[PairSeparation] = []
    for first in range(len(paths)):
        for second in range(first + 1, len(paths)):
            s, ds = delay_signatures[first]
            t, dt = delay_signatures[second]
            a, da_az, da_el = angle_signatures[first]
            b, db_az, db_el = angle_signatures[second]
            delay_products = {
                "signal": _normalised(s, t),
                "derivative": _normalised(ds, dt),
                "cross": max(_normalised(ds, t), _normalised(s, dt)),
            }
            angle_products = {
                "pattern": _normalised(a, b),
                "azimuth": _normalised(da_az, db_az),
                "elevation": _normalised(da_el, db_el),
                "azimuth_elevation": max(_normalised(da_az, db_el), _normalised(da_el, db_az)),
                "azimuth_pattern": max(_normalised(da_az, b), _normalised(a, db_az)),
                "elevation_pattern": max(_normalised(da_el, b), _normalised(a, db_el)),
            }
            pairs.append(PairSeparation(first, second, delay_products, angle_products))

    symmetry: List[PathSymmetry] = []
    sigma_f = np.sqrt(pilots.sigma_f_squared)
    moment_scale = pilots.total_energy * sigma_f
    moment = float(abs(np.sum(frequencies * pilots.energies)) / moment_scale) if moment_scale > 0 else 0.0
    for index, (pattern, grad_azimuth, grad_elevation) in enumerate(angle_signatures):
        symmetry.append(PathSymmetry(index, moment, _normalised(grad_azimuth, pattern),
                                     _normalised(grad_elevation, pattern)))

    fisher = fisher_matrix(paths, array, pilots, 1.0, frozen_pattern)
    scaled = np.abs(fisher.equilibrated)
    mask = np.ones_like(scaled, dtype=bool)
    for index in range(len(paths)):
        block = slice(index * PARAMETERS_PER_PATH, (index + 1) * PARAMETERS_PER_PATH)
        mask[block, block] = False
    max_off_diagonal = float(scaled[mask].max()) if mask.any() else 0.0
    return SeparationReport(
        pairs=tuple(pairs),
        paths=tuple(symmetry),
        max_off_diagonal=max_off_diagonal,
        block_diagonal=max_off_diagonal < BLOCK_DIAGONAL_THRESHOLD,
        condition_number=fisher.condition_number,
    )


def merge_close_paths(paths: PathSet, target_frequency: float, delay_gap: Optional[float] = None,
                      angle_gap: float = np.deg2rad(0.1)) -> PathSet:
    """Replace rays closer than the gaps by one ray carrying the summed gain.

    The merged ray keeps the delay and angles of its strongest member. The
    default delay gap is 1/(10 |f_target|).
    """
    if delay_gap is None:
        if target_frequency == 0:
            raise InvalidArgumentError("A delay gap is required when the target frequency is 0")
        delay_gap = 1 / (10 * abs(target_frequency))
    if delay_gap < 0 or angle_gap < 0:
        raise InvalidArgumentError("Merge gaps must be non-negative")
    order = sorted(range(len(paths)), key=lambda i: -abs(paths[i].gain))
    used = set()
    merged: List[Tuple[int, PathParameters]] = []
    for leader in order:
        if leader in used:
            continue
        head = paths[leader]
        gain = 0j
        for other in order:
            if other in used:
                continue
            candidate = paths[other]
            if (abs(candidate.delay - head.delay) < delay_gap
                    and abs(float(wrap_azimuth(candidate.azimuth - head.azimuth))) < angle_gap
                    and abs(candidate.elevation - head.elevation) < angle_gap):
                gain += candidate.gain
                used.add(other)
        merged.append((leader, PathParameters(gain, head.delay, head.azimuth, head.elevation)))
    merged.sort(key=lambda item: item[0])
    return PathSet(tuple(path for _, path in merged))


__all__ = [
    "CONDITION_LIMIT",
    "FisherMatrix",
    "CrlbResult",
    "PairSeparation",
    "PathSymmetry",
    "SeparationReport",
    "fisher_matrix",
    "jacobian",
    "crlb_matrix",
    "crlb",
    "parameter_crlb",
    "inverse_fisher_product",
    "simplified_crlb",
    "mean_squared_bandwidth",
    "extrapolation_range",
    "signature_correlations",
    "closest_pair",
    "separation_diagnostics",
    "merge_close_paths",
]
