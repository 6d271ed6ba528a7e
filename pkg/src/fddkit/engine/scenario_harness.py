"""End-to-end experiments: surrogate scenarios, Monte-Carlo sweeps, user-drop CDFs and reports.

Every random draw is keyed on ``(seed, drop, trial)`` through
:func:`~fddkit.engine.channel_model.derive_seed`, so a sweep is a pure
function of its configuration.
"""

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from fddkit.engine.channel_model import (
    ArrayGeometry,
    ChannelVector,
    PathParameters,
    PathSet,
    PilotGrid,
    build_planar_array,
    channel_matrix,
    derive_seed,
    simulate_pilots,
    wrap_azimuth,
    SPEED_OF_LIGHT,
)
from fddkit.engine.crlb_engine import (
    closest_pair,
    crlb_matrix,
    extrapolation_range,
    fisher_matrix,
    jacobian,
    separation_diagnostics,
)
from fddkit.engine.downlink_metrics import (
    DownlinkConfig,
    efficiency_approx,
    efficiency_report,
    normalized_correlation,
    spectral_efficiency,
)
from fddkit.engine.errors import ExtrapolationDomainError, FddkitError, InvalidArgumentError
from fddkit.engine.lowres_estimators import LmmseModel, LmmseSolver, lmmse_error_stats, ls_estimate
from fddkit.engine.sage_estimator import SageConfig, SageEstimator, hr_extrapolate_many
from fddkit.utilities.messenger import Messenger

messenger = Messenger()

GENERATORS = ("clustered-surrogate", "explicit-paths")
ESTIMATORS = ("ls", "lmmse", "sage")
CSV_COLUMNS = (
    "frequency_hz", "mse_ls", "mse_lmmse", "mse_sage", "crlb_mean", "crlb_simplified",
    "eta_mc", "eta_approx", "se_bits", "ser",
)

PATHS_PER_CLUSTER = 4
INTRA_CLUSTER_DELAY_SPREAD = 30e-9
AZIMUTH_SPREAD = np.deg2rad(5.0)
ELEVATION_SPREAD = np.deg2rad(3.0)
ELEVATION_CENTER_RANGE = (np.deg2rad(60.0), np.deg2rad(120.0))
# the power-delay profile decays with tau_max / 3
DELAY_DECAY_FRACTION = 1 / 3
# full bound over the separated-rays value above which rows are flagged as coupled
COUPLING_LIMIT = 2.0


@dataclass(frozen=True)
class ArraySettings:
    rows: int = 4
    cols: int = 4
    spacing: Optional[float] = None  # half a carrier wavelength when unset

    @property
    def num_elements(self) -> int:
        return self.rows * self.cols


@dataclass(frozen=True)
class SageSettings:
    num_paths: Optional[int] = None  # the scenario's path count when unset
    delay_step: float = 1e-9
    angle_step: float = np.pi / 180
    max_iterations: int = 50
    convergence_threshold: float = 1e-6
    refinement_levels: int = 3
    min_residual_reduction: Optional[float] = None


@dataclass(frozen=True)
class DownlinkSettings:
    symbol_energy: float = 1.0
    snr: Optional[float] = None  # E_d / sigma^2 in dB, the pilot SNR when unset
    constellation_order: int = 16


@dataclass(frozen=True)
class SweepSettings:
    freq_min: float = -100e6
    freq_max: float = 100e6
    freq_steps: int = 21
    trials: int = 100
    estimators: Tuple[str, ...] = ESTIMATORS
    antennas: Tuple[Tuple[int, int], ...] = ((4, 4),)
    snrs: Tuple[float, ...] = (10.0,)
    drops: int = 0
    cdf_points: int = 101
    gamma: float = 1.0

    def __post_init__(self):
        if self.trials < 1:
            raise InvalidArgumentError(f"A sweep needs at least one trial, got {self.trials}")
        frequency_grid(self.freq_min, self.freq_max, self.freq_steps)
        if self.drops < 0:
            raise InvalidArgumentError(f"Drop count must be non-negative, got {self.drops}")
        if self.cdf_points < 2:
            raise InvalidArgumentError(f"A CDF grid needs at least two points, got {self.cdf_points}")
        if not self.gamma > 0:
            raise InvalidArgumentError(f"gamma must be positive, got {self.gamma}")

    @property
    def frequencies(self) -> np.ndarray:
        return frequency_grid(self.freq_min, self.freq_max, self.freq_steps)


@dataclass(frozen=True)
class ScenarioConfig:
    """One uplink/downlink scenario; angles in radians, times in seconds, frequencies in Hz"""

    num_paths: int = 10
    max_delay: float = 2.5e-6
    bandwidth: float = 20e6
    num_pilots: Optional[int] = None
    carrier: float = 3.5e9
    array: ArraySettings = field(default_factory=ArraySettings)
    pilot_snr: float = 10.0
    symbol_energy: float = 1.0
    seed: int = 0
    generator: str = "clustered-surrogate"
    num_clusters: Optional[int] = None
    paths: Tuple[PathParameters, ...] = ()
    sage: SageSettings = field(default_factory=SageSettings)
    downlink: DownlinkSettings = field(default_factory=DownlinkSettings)
    sweep: SweepSettings = field(default_factory=SweepSettings)

    def __post_init__(self):
        if self.generator not in GENERATORS:
            raise InvalidArgumentError(f"Unknown generator '{self.generator}', expected one of {', '.join(GENERATORS)}")
        if self.generator == "explicit-paths":
            if not self.paths:
                raise InvalidArgumentError("The explicit-paths generator needs at least one path")
            object.__setattr__(self, "num_paths", len(self.paths))
        if self.num_paths < 1:
            raise InvalidArgumentError(f"A scenario needs at least one path, got {self.num_paths}")
        if not (self.max_delay > 0 and self.bandwidth > 0 and self.carrier > 0 and self.symbol_energy > 0):
            raise InvalidArgumentError("Maximum delay, bandwidth, carrier and symbol energy must be positive")
        if self.seed < 0:
            raise InvalidArgumentError(f"Seed must be non-negative, got {self.seed}")
        if self.num_clusters is not None and not 1 <= self.num_clusters <= self.num_paths:
            raise InvalidArgumentError(f"Cluster count must lie in [1, {self.num_paths}], got {self.num_clusters}")
        if any(path.delay > self.max_delay for path in self.paths):
            raise InvalidArgumentError("Explicit path delays must not exceed max_delay")
        unknown = set(self.sweep.estimators) - set(ESTIMATORS)
        if unknown:
            raise InvalidArgumentError(f"Unknown estimators: {', '.join(sorted(unknown))}")
        sage = self.sage_config()
        if sage.delay_step > 1 / self.bandwidth * (1 + 1e-12):
            raise InvalidArgumentError(
                f"SAGE delay step {sage.delay_step:.3e} s exceeds 1/B = {1 / self.bandwidth:.3e} s")

    @property
    def noise_variance(self) -> float:
        """sigma^2 = E_s / 10^(SNR/10)"""
        return self.symbol_energy / 10 ** (self.pilot_snr / 10)

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.carrier

    def build_array(self) -> ArrayGeometry:
        spacing = self.array.spacing if self.array.spacing is not None else self.wavelength / 2
        return build_planar_array(self.array.rows, self.array.cols, spacing, self.carrier)

    def build_pilots(self) -> PilotGrid:
        return PilotGrid.uniform(self.bandwidth, self.max_delay, self.symbol_energy, self.num_pilots)

    def sage_config(self) -> SageConfig:
        settings = self.sage
        return SageConfig(
            num_paths=settings.num_paths or self.num_paths,
            delay_step=settings.delay_step,
            angle_step=settings.angle_step,
            max_iterations=settings.max_iterations,
            convergence_threshold=settings.convergence_threshold,
            max_delay=self.max_delay,
            refinement_levels=settings.refinement_levels,
            min_residual_reduction=settings.min_residual_reduction,
        )

    def downlink_config(self) -> DownlinkConfig:
        snr = self.downlink.snr if self.downlink.snr is not None else self.pilot_snr
        return DownlinkConfig(
            symbol_energy=self.downlink.symbol_energy,
            noise_variance=self.downlink.symbol_energy / 10 ** (snr / 10),
            constellation_order=self.downlink.constellation_order,
        )


@dataclass(frozen=True, eq=False)
class ClusteredDraw:
    """Surrogate paths with the cluster each belongs to and the cluster centres"""

    paths: PathSet
    clusters: np.ndarray
    cluster_delays: np.ndarray
    cluster_azimuths: np.ndarray
    cluster_elevations: np.ndarray


def frequency_grid(freq_min: float, freq_max: float, freq_steps: int) -> np.ndarray:
    if freq_steps < 1:
        raise InvalidArgumentError(f"Frequency grid needs at least one step, got {freq_steps}")
    if freq_steps == 1:
        return np.array([float(freq_min)])
    if freq_max < freq_min:
        raise InvalidArgumentError("freq_max must not be below freq_min")
    return np.linspace(freq_min, freq_max, freq_steps)


def draw_clustered_paths(num_paths: int, max_delay: float, rng: np.random.Generator,
                         num_clusters: Optional[int] = None) -> ClusteredDraw:
    """Clustered stand-in for a 3D urban-macro NLOS drop, normalised to unit channel power"""
    if num_paths < 1:
        raise InvalidArgumentError(f"A scenario needs at least one path, got {num_paths}")
    clusters = num_clusters or math.ceil(num_paths / PATHS_PER_CLUSTER)
    membership = np.arange(num_paths) * clusters // num_paths

    cluster_delays = rng.uniform(0.0, max_delay, clusters)
    cluster_azimuths = rng.uniform(-np.pi, np.pi, clusters)
    cluster_elevations = rng.uniform(*ELEVATION_CENTER_RANGE, clusters)

    delays = cluster_delays[membership] + rng.normal(0.0, INTRA_CLUSTER_DELAY_SPREAD, num_paths)
    delays = np.clip(delays, 0.0, max_delay)
    # a Laplacian with scale b has standard deviation b sqrt(2)
    azimuths = wrap_azimuth(cluster_azimuths[membership] + rng.laplace(0.0, AZIMUTH_SPREAD / np.sqrt(2), num_paths))
    elevations = np.clip(
        cluster_elevations[membership] + rng.laplace(0.0, ELEVATION_SPREAD / np.sqrt(2), num_paths), 0.0, np.pi)

    powers = np.exp(-delays / (DELAY_DECAY_FRACTION * max_delay))
    phases = rng.uniform(0.0, 2 * np.pi, num_paths)
    gains = np.sqrt(powers / powers.sum()) * np.exp(1j * phases)
    gains /= np.linalg.norm(gains)
    return ClusteredDraw(PathSet.from_arrays(gains, delays, azimuths, elevations), membership,
                         cluster_delays, cluster_azimuths, cluster_elevations)


def generate_scenario(config: ScenarioConfig, drop: int = 0) -> Tuple[PathSet, ArrayGeometry, PilotGrid]:
    """Paths, array and pilot grid of one user drop"""
    if config.generator == "explicit-paths":
        paths = PathSet(tuple(config.paths))
    else:
        rng = np.random.default_rng(np.random.SeedSequence([config.seed, drop]))
        paths = draw_clustered_paths(config.num_paths, config.max_delay, rng, config.num_clusters).paths
    return paths, config.build_array(), config.build_pilots()


@dataclass
class SweepRow:
    frequency: float
    mse_ls: Optional[float] = None
    mse_lmmse: Optional[float] = None
    mse_sage: Optional[float] = None
    crlb_mean: Optional[float] = None
    crlb_simplified: Optional[float] = None
    eta_mc: Optional[float] = None
    eta_approx: Optional[float] = None
    se_bits: Optional[float] = None
    ser: Optional[float] = None
    mse_lmmse_analytic: Optional[float] = None
    bound_inflation: Optional[float] = None
    standard_errors: Dict[str, float] = field(default_factory=dict)
    errors: List[str] = field(default_factory=list)

    @property
    def failed(self) -> bool:
        return bool(self.errors)

    @property
    def bound_comparable(self) -> bool:
        """False where path coupling inflates the bound past the separated-rays value"""
        return self.bound_inflation is None or self.bound_inflation <= COUPLING_LIMIT

    def csv_values(self) -> List[Optional[float]]:
        return [self.frequency] + [getattr(self, column) for column in CSV_COLUMNS[1:]]


@dataclass(frozen=True, eq=False)
class CdfTable:
    """Empirical CDF of per-drop values on an evenly spaced grid"""

    samples: np.ndarray
    grid: np.ndarray
    cdf: np.ndarray

    def evaluate(self, value: float) -> float:
        return float(np.searchsorted(self.samples, value, side="right") / self.samples.size)


@dataclass
class SweepResult:
    label: str
    scenario: Dict[str, object]
    rows: List[SweepRow]
    cdfs: Dict[str, CdfTable] = field(default_factory=dict)
    extrapolation_range: Optional[float] = None
    separation: Optional[Dict[str, object]] = None

    @property
    def all_failed(self) -> bool:
        return bool(self.rows) and all(row.failed for row in self.rows)


def compute_cdf(per_drop_values: Sequence[float], grid_points: int = 101) -> CdfTable:
    """Right-continuous empirical CDF sampled on grid_points values from min to max"""
    samples = np.sort(np.asarray(per_drop_values, dtype=float).reshape(-1))
    if samples.size == 0:
        raise InvalidArgumentError("A CDF needs at least one value")
    if grid_points < 2:
        raise InvalidArgumentError(f"A CDF grid needs at least two points, got {grid_points}")
    grid = np.linspace(samples[0], samples[-1], grid_points)
    cdf = np.searchsorted(samples, grid, side="right") / samples.size
    return CdfTable(samples, grid, cdf)


def _scenario_summary(config: ScenarioConfig, paths: PathSet, array: ArrayGeometry, pilots: PilotGrid,
                      drop: int) -> Dict[str, object]:
    return {
        "num_paths": len(paths),
        "num_antennas": array.num_elements,
        "num_pilots": pilots.num_pilots,
        "bandwidth": pilots.bandwidth,
        "max_delay": config.max_delay,
        "carrier": config.carrier,
        "pilot_snr": config.pilot_snr,
        "noise_variance": config.noise_variance,
        "sigma_f": float(np.sqrt(pilots.sigma_f_squared)),
        "seed": config.seed,
        "drop": drop,
        "generator": config.generator,
    }


def _label(config: ScenarioConfig) -> str:
    return f"M{config.array.num_elements}_snr{config.pilot_snr:g}"


def _pilot_indices(pilots: PilotGrid, frequencies: np.ndarray) -> List[Optional[int]]:
    indices = []
    for frequency in frequencies:
        match = np.flatnonzero(np.isclose(pilots.frequencies, frequency, rtol=0.0, atol=1e-6))
        indices.append(int(match[0]) if match.size else None)
    return indices


def _fill_bounds(rows: List[SweepRow], paths: PathSet, array: ArrayGeometry, pilots: PilotGrid,
                 noise_variance: float, true_channels: np.ndarray):
    """CRLB columns and the bound-based efficiency of every row"""
    try:
        fisher = fisher_matrix(paths, array, pilots, noise_variance)
    except FddkitError as e:
        for row in rows:
            row.errors.append(str(e))
        return
    for index, row in enumerate(rows):
        try:
            result = crlb_matrix(fisher, jacobian(paths, array, row.frequency), row.frequency)
            row.crlb_mean = result.mean_bound
            row.crlb_simplified = result.simplified_bound
            if result.simplified_bound:
                row.bound_inflation = result.mean_bound / result.simplified_bound
            row.eta_approx = efficiency_approx(true_channels[:, index], result.bound_matrix)
        except FddkitError as e:
            row.errors.append(str(e))
    _warn_coupled(rows, paths, array, pilots)


def _warn_coupled(rows: List[SweepRow], paths: PathSet, array: ArrayGeometry, pilots: PilotGrid):
    coupled = [row for row in rows if not row.bound_comparable]
    if not coupled:
        return
    worst = max(row.bound_inflation for row in coupled)
    pair, correlation = closest_pair(paths, array, pilots)
    messenger.warning(
        f"{len(coupled)} of {len(rows)} rows have a bound inflated up to {worst:.1f}x by coupled paths "
        f"(closest pair {pair}, signature correlation {correlation:.2f}); "
        "estimator MSE on these rows is not comparable with crlb_mean")


def _fill_downlink(rows: List[SweepRow], config: ScenarioConfig, true_channels: np.ndarray):
    downlink = config.downlink_config()
    for index, row in enumerate(rows):
        if row.eta_approx is None and row.eta_mc is None:
            continue
        try:
            report = efficiency_report(row.frequency, true_channels[:, index], downlink, row.eta_mc, row.eta_approx)
        except FddkitError as e:
            row.errors.append(str(e))
            continue
        row.se_bits = report.spectral_efficiency
        row.ser = report.ser


def run_sweep(config: ScenarioConfig, frequencies: Sequence[float], trials: int,
              estimators: Iterable[str], drop: int = 0) -> SweepResult:
    """Monte-Carlo MSE per estimator, CRLB, efficiency, SE and SER at every frequency"""
    if trials < 1:
        raise InvalidArgumentError(f"At least one trial is required, got {trials}")
    requested = set(estimators)
    unknown = requested - set(ESTIMATORS)
    if unknown:
        raise InvalidArgumentError(f"Unknown estimators: {', '.join(sorted(unknown))}")
    estimators = tuple(name for name in ESTIMATORS if name in requested)
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
    paths, array, pilots = generate_scenario(config, drop)
    noise_variance = config.noise_variance
    num_antennas = array.num_elements
    true_channels = channel_matrix(paths, array, frequencies)
    true_pilots = channel_matrix(paths, array, pilots.frequencies)
    rows = [SweepRow(float(f)) for f in frequencies]

    pilot_indices = _pilot_indices(pilots, frequencies)
    errors = {name: np.full((trials, frequencies.size), np.nan) for name in estimators}
    correlations = np.full((trials, frequencies.size), np.nan)
    primary = next((name for name in ("sage", "lmmse", "ls") if name in estimators), None)

    solver = None
    lmmse_weights = None
    if "lmmse" in estimators:
        model = LmmseModel(max_delay=config.max_delay, noise_variance=noise_variance,
                           pilot_energy=pilots.symbol_energy)
        try:
            solver = LmmseSolver(model, pilots)
            lmmse_weights = solver.weight_matrix(frequencies)
            for index, row in enumerate(rows):
                target = ChannelVector(row.frequency, true_channels[:, index])
                stats = lmmse_error_stats(model, pilots, true_pilots, target, row.frequency, solver)
                row.mse_lmmse_analytic = stats.mean_mse
        except FddkitError as e:
            messenger.warning(f"LMMSE disabled for this sweep: {e}")
            for row in rows:
                row.errors.append(str(e))
            solver = None

    sage = None
    if "sage" in estimators:
        try:
            sage = SageEstimator(array, pilots, config.sage_config())
        except FddkitError as e:
            messenger.warning(f"SAGE disabled for this sweep: {e}")
            for row in rows:
                row.errors.append(str(e))

    failed_sage_trials = 0
    for trial in messenger.progress(range(trials), f"[cyan]Simulating {_label(config)}", total=trials):
        received = simulate_pilots(paths, array, pilots, noise_variance, derive_seed(config.seed, drop, trial))
        ls = ls_estimate(received, pilots)
        estimates: Dict[str, np.ndarray] = {}
        if "ls" in estimators:
            for index, pilot in enumerate(pilot_indices):
                if pilot is not None:
                    difference = ls.values[:, pilot] - true_channels[:, index]
                    errors["ls"][trial, index] = np.vdot(difference, difference).real / num_antennas
            if primary == "ls":
                estimates["ls"] = np.column_stack([
                    ls.values[:, pilot] if pilot is not None else np.zeros(num_antennas, dtype=complex)
                    for pilot in pilot_indices
                ])
        if solver is not None:
            estimates["lmmse"] = ls.values @ np.conj(lmmse_weights)
        if sage is not None:
            try:
                estimates["sage"] = hr_extrapolate_many(sage.estimate(received), array, frequencies)
            except FddkitError as e:
                failed_sage_trials += 1
                messenger.warning(f"SAGE failed in trial {trial}: {e}")
        for name in ("lmmse", "sage"):
            if name in estimates:
                errors[name][trial] = np.sum(np.abs(estimates[name] - true_channels) ** 2, axis=0) / num_antennas
        if primary in estimates:
            correlations[trial] = normalized_correlation(estimates[primary], true_channels)

    if failed_sage_trials:
        messenger.warning(f"SAGE failed in {failed_sage_trials} of {trials} trials")

    for name, values in errors.items():
        for index, row in enumerate(rows):
            column = values[:, index]
            column = column[~np.isnan(column)]
            if column.size == 0:
                continue
            setattr(row, f"mse_{name}", float(np.mean(column)))
            row.standard_errors[name] = float(np.std(column, ddof=1) / np.sqrt(column.size)) if column.size > 1 else 0.0

    for index, row in enumerate(rows):
        column = correlations[:, index]
        if np.any(~np.isnan(column)):
            row.eta_mc = float(np.nanmean(column))

    _fill_bounds(rows, paths, array, pilots, noise_variance, true_channels)
    _fill_downlink(rows, config, true_channels)

    return SweepResult(
        label=_label(config),
        scenario=_scenario_summary(config, paths, array, pilots, drop),
        rows=rows,
        extrapolation_range=_range(config, paths, array, pilots),
        separation=separation_diagnostics(paths, array, pilots).as_dict(),
    )


def _range(config: ScenarioConfig, paths: PathSet, array: ArrayGeometry, pilots: PilotGrid) -> Optional[float]:
    if pilots.sigma_f_squared == 0:
        return None
    try:
        return extrapolation_range(config.sweep.gamma, array.num_elements, pilots.num_pilots, len(paths),
                                   float(np.sqrt(pilots.sigma_f_squared)))
    except ExtrapolationDomainError:
        return None


def compute_bounds(config: ScenarioConfig, frequencies: Sequence[float], drop: int = 0) -> SweepResult:
    """CRLB rows only: bound, efficiency approximation, SE and SER; no Monte-Carlo"""
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
    paths, array, pilots = generate_scenario(config, drop)
    true_channels = channel_matrix(paths, array, frequencies)
    rows = [SweepRow(float(f)) for f in frequencies]
    _fill_bounds(rows, paths, array, pilots, config.noise_variance, true_channels)
    _fill_downlink(rows, config, true_channels)
    return SweepResult(
        label=_label(config),
        scenario=_scenario_summary(config, paths, array, pilots, drop),
        rows=rows,
        extrapolation_range=_range(config, paths, array, pilots),
        separation=separation_diagnostics(paths, array, pilots).as_dict(),
    )


def cdf_label(prefix: str, frequency: float) -> str:
    return f"{prefix}_{frequency / 1e6:+g}MHz"


def run_drops(config: ScenarioConfig, frequencies: Sequence[float], drops: int,
              grid_points: int = 101) -> Dict[str, CdfTable]:
    """Spectral-efficiency CDFs over user drops, from the CRLB-level efficiency and from perfect CSI"""
    if drops < 1:
        raise InvalidArgumentError(f"At least one drop is required, got {drops}")
    frequencies = np.atleast_1d(np.asarray(frequencies, dtype=float))
    downlink = config.downlink_config()
    estimated = [[] for _ in frequencies]
    perfect = [[] for _ in frequencies]
    failed = 0
    for drop in messenger.progress(range(drops), "[cyan]Simulating user drops", total=drops):
        paths, array, pilots = generate_scenario(config, drop)
        true_channels = channel_matrix(paths, array, frequencies)
        try:
            fisher = fisher_matrix(paths, array, pilots, config.noise_variance)
            values = []
            for index, frequency in enumerate(frequencies):
                bound = crlb_matrix(fisher, jacobian(paths, array, frequency), frequency).bound_matrix
                eta = efficiency_approx(true_channels[:, index], bound)
                values.append(efficiency_report(frequency, true_channels[:, index], downlink,
                                                eta_approx=eta).spectral_efficiency)
        except FddkitError as e:
            failed += 1
            messenger.warning(f"Drop {drop} skipped: {e}")
            continue
        for index in range(frequencies.size):
            estimated[index].append(values[index])
            power = float(np.vdot(true_channels[:, index], true_channels[:, index]).real)
            perfect[index].append(spectral_efficiency(downlink.symbol_energy * power / downlink.noise_variance))
    if failed == drops:
        raise InvalidArgumentError("Every drop failed; no CDF can be formed")
    tables: Dict[str, CdfTable] = {}
    for index, frequency in enumerate(frequencies):
        tables[cdf_label("se", frequency)] = compute_cdf(estimated[index], grid_points)
        tables[cdf_label("se_perfect", frequency)] = compute_cdf(perfect[index], grid_points)
    return tables


def run_grid(config: ScenarioConfig, frequencies: Sequence[float], trials: int,
             estimators: Iterable[str]) -> List[SweepResult]:
    """:func:`run_sweep` for every (array, SNR) pair of the sweep settings"""
    estimators = tuple(estimators)
    results = []
    for rows, cols in config.sweep.antennas:
        for snr in config.sweep.snrs:
            variant = replace(config, array=replace(config.array, rows=rows, cols=cols), pilot_snr=snr)
            result = run_sweep(variant, frequencies, trials, estimators)
            if config.sweep.drops:
                result.cdfs.update(run_drops(variant, frequencies, config.sweep.drops, config.sweep.cdf_points))
            results.append(result)
    return results


def _format(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return ""
    return "{:.12e}".format(value)


def write_report(result: SweepResult, path) -> List[Path]:
    """CSV of the sweep rows plus one ``<stem>_cdf_<label>.csv`` per CDF table; returns the files written"""
    path = Path(path)
    if path.parent and not path.parent.exists():
        path.parent.mkdir(parents=True, exist_ok=True)
    written = [path]
    with open(path, "w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for row in result.rows:
            writer.writerow([_format(value) for value in row.csv_values()])
    for label, table in sorted(result.cdfs.items()):
        cdf_path = path.with_name(f"{path.stem}_cdf_{label}.csv")
        with open(cdf_path, "w", encoding="utf-8", newline="") as handle:
            writer = csv.writer(handle, lineterminator="\n")
            writer.writerow(("value", "cdf"))
            for value, probability in zip(table.grid, table.cdf):
                writer.writerow((_format(float(value)), _format(float(probability))))
        written.append(cdf_path)
    return written


def _json_number(value):
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return None
    return value


def result_to_dict(result: SweepResult) -> Dict[str, object]:
    rows = []
    for row in result.rows:
        data = asdict(row)
        rows.append({key: _json_number(value) if not isinstance(value, (dict, list)) else value
                     for key, value in data.items()})
    return {
        "label": result.label,
        "scenario": result.scenario,
        "rows": rows,
        "cdfs": {label: [float(v) for v in table.samples] for label, table in result.cdfs.items()},
        "extrapolation_range": _json_number(result.extrapolation_range),
        "separation": result.separation,
    }


def result_from_dict(data: Dict[str, object], grid_points: int = 101) -> SweepResult:
    rows = [SweepRow(**row) for row in data["rows"]]
    cdfs = {label: compute_cdf(samples, grid_points) for label, samples in data.get("cdfs", {}).items()}
    return SweepResult(
        label=data["label"],
        scenario=data["scenario"],
        rows=rows,
        cdfs=cdfs,
        extrapolation_range=data.get("extrapolation_range"),
        separation=data.get("separation"),
    )


def save_result(results: Sequence[SweepResult], path) -> Path:
    """Persist sweep results as JSON so reports can be re-rendered"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as handle:
        json.dump({"results": [result_to_dict(r) for r in results]}, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def load_result(path, grid_points: int = 101) -> List[SweepResult]:
    with open(path, "r", encoding="utf-8") as handle:
        data = json.load(handle)
    return [result_from_dict(item, grid_points) for item in data["results"]]


__all__ = [
    "GENERATORS",
    "ESTIMATORS",
    "CSV_COLUMNS",
    "COUPLING_LIMIT",
    "ArraySettings",
    "SageSettings",
    "DownlinkSettings",
    "SweepSettings",
    "ScenarioConfig",
    "ClusteredDraw",
    "SweepRow",
    "SweepResult",
    "CdfTable",
    "frequency_grid",
    "draw_clustered_paths",
    "generate_scenario",
    "run_sweep",
    "compute_bounds",
    "compute_cdf",
    "cdf_label",
    "run_drops",
    "run_grid",
    "write_report",
    "result_to_dict",
    "result_from_dict",
    "save_result",
    "load_result",
]
