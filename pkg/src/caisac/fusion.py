"""Stage-2 sensing: MRC weighting, delay/Doppler feature fusion, grid searches.

Delay vectors of the two bands live on subcarrier-spacing grids an integer
factor Q apart; stretching the high band's indices by Q puts both on the low
band's grid so they can be combined coherently. Doppler vectors combine
directly once the carrier-duration products are equal. Estimation is a matched
phase-ramp search over a uniform range or velocity grid.
"""

from __future__ import annotations

from contextlib import contextmanager
from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT
from .errors import (
    BandsNotAlignedError,
    InvalidInputError,
    PairingError,
    PipelineStageError,
)
from .preproc import (
    ccc_delay_feature,
    ccc_doppler_feature,
    estimate_aoa,
    remove_tx_data,
    default_regularization,
    delay_weights,
    doppler_weights,
    spatial_filter,
)
from .waveform import ArrayConfig, CarrierComponentConfig, band_ratio


@dataclass(frozen=True)
class FusionWeights:
    """Inverse-noise-variance combining weights; they sum to one exactly."""

    w_low: float
    w_high: float


def mrc_weights(sigma2_low: float, sigma2_high: float) -> FusionWeights:
    """Maximal-ratio weights: each band weighted by the other band's noise variance."""
    if sigma2_low <= 0 or sigma2_high <= 0:
        raise InvalidInputError("noise variances must be positive")
    w_low = sigma2_high / (sigma2_low + sigma2_high)
    return FusionWeights(w_low=w_low, w_high=1.0 - w_low)


def effective_noise_pair(sigma2_low: float, sigma2_high: float) -> tuple[float, float]:
    """Noise pair to use for weighting; zero variances fall back to equal weights."""
    if sigma2_low < 0 or sigma2_high < 0:
        raise InvalidInputError("noise variances must be non-negative")
    if sigma2_low == 0 and sigma2_high == 0:
        return 1.0, 1.0
    tiny = 1e-30 * max(sigma2_low, sigma2_high)
    return max(sigma2_low, tiny), max(sigma2_high, tiny)


@dataclass(frozen=True)
class SearchGrid:
    """Uniform search grid; value eta (1-based) is min + (eta - 1) (max - min) / count."""

    min_value: float
    max_value: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise InvalidInputError("grid count must be >= 2")
        if not self.max_value > self.min_value:
            raise InvalidInputError("grid max must exceed min")

    @property
    def step(self) -> float:
        return (self.max_value - self.min_value) / self.count

    @property
    def values(self) -> np.ndarray:
        return self.min_value + self.step * np.arange(self.count)


@dataclass
class FusedDelayVector:
    """Delay feature vector on the common stretched grid, with gap bookkeeping."""

    samples: np.ndarray
    support_mask: np.ndarray
    stretch: int
    recovery_warning: bool = False


@dataclass
class EstimateSet:
    """Aligned per-target estimates, tagged with the method that produced them."""

    ranges_m: np.ndarray
    velocities_mps: np.ndarray
    angles_rad: np.ndarray
    method_tag: str

    def __len__(self) -> int:
        return len(self.ranges_m)


def fuse_delay(g_low: np.ndarray, g_high: np.ndarray, q: int,
               weights: FusionWeights) -> FusedDelayVector:
    """Merge weighted delay vectors onto the low band's subcarrier grid.

    High-band element n'' lands at index Q n''; collisions with low-band entries
    are halved after adding (plain averaging). When the low band reaches at
    least as far as the stretched high band, the output is dense (case 2);
    otherwise gaps remain and the support mask records them (case 1).
    """
    if q < 1 or int(q) != q:
        raise InvalidInputError("stretch factor q must be a positive integer")
    q = int(q)
    n1, n2 = len(g_low), len(g_high)
    low = weights.w_low * np.asarray(g_low)
    high = weights.w_high * np.asarray(g_high)
    high_idx = q * np.arange(n2)
    if n1 - 1 >= q * (n2 - 1):
        fused = low.astype(complex).copy()
        fused[high_idx] += high
        fused[high_idx] /= 2.0
        mask = np.ones(n1, dtype=bool)
    else:
        fused = np.zeros(q * n2, dtype=complex)
        fused[:n1] = low
        fused[high_idx] += high
        collide = high_idx[high_idx <= n1 - 1]
        fused[collide] /= 2.0
        mask = np.zeros(q * n2, dtype=bool)
        mask[:n1] = True
        mask[high_idx] = True
    return FusedDelayVector(samples=fused, support_mask=mask, stretch=q)


def range_search_matrix(grid: SearchGrid, length: int, delta_f_hz: float) -> np.ndarray:
    """Matched delay-ramp matrix, rows indexed by candidate range."""
    xi = np.arange(length)
    return np.exp(2j * np.pi * delta_f_hz * (2.0 / SPEED_OF_LIGHT)
                  * np.outer(grid.values, xi))


def range_search(samples: np.ndarray, grid: SearchGrid, delta_f_hz: float,
                 matrix: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Peak of the matched delay profile over the range grid."""
    if matrix is None:
        matrix = range_search_matrix(grid, len(samples), delta_f_hz)
    profile = matrix @ np.asarray(samples)
    return float(grid.values[int(np.argmax(np.abs(profile)))]), profile


def recover_missing(fused: FusedDelayVector, max_sparsity: int, grid: SearchGrid,
                    delta_f_hz: float, residual_tol_factor: float = 1e-3,
                    dictionary: np.ndarray | None = None) -> FusedDelayVector:
    """Fill support gaps by orthogonal matching pursuit over delay-ramp atoms.

    Atoms are conjugate rows of the range-search matrix (one per grid range).
    Filled entries are preserved exactly; only gaps receive the reconstruction.
    If the residual stays above the threshold after ``max_sparsity`` atoms the
    gaps are left at zero and the warning flag is set.
    """
    if max_sparsity < 1:
        raise InvalidInputError("max_sparsity must be >= 1")
    mask = fused.support_mask
    if mask.all():
        return fused
    filled = np.flatnonzero(mask)
    if filled.size < 2 * max_sparsity:
        raise InvalidInputError(
            f"{filled.size} filled entries cannot support sparsity {max_sparsity}"
        )
    if dictionary is None:
        dictionary = np.conj(range_search_matrix(grid, len(fused.samples), delta_f_hz)).T
    observed = fused.samples[filled]
    atoms = dictionary[filled]                      # (n_filled, n_atoms)
    atom_norm = np.sqrt(float(filled.size))        # unit-modulus atoms share one norm
    threshold = residual_tol_factor * float(np.linalg.norm(observed))

    residual = observed.copy()
    chosen: list[int] = []
    coef = np.zeros(0, dtype=complex)
    for _ in range(max_sparsity):
        scores = np.abs(np.conj(atoms).T @ residual) / atom_norm
        scores[chosen] = -1.0
        chosen.append(int(np.argmax(scores)))
        basis = atoms[:, chosen]
        coef, *_ = np.linalg.lstsq(basis, observed, rcond=None)
        residual = observed - basis @ coef
        if np.linalg.norm(residual) <= threshold:
            break
    if np.linalg.norm(residual) > threshold:
        return FusedDelayVector(samples=fused.samples.copy(), support_mask=mask.copy(),
                                stretch=fused.stretch, recovery_warning=True)
    reconstruction = dictionary[:, chosen] @ coef
    out = fused.samples.copy()
    gaps = ~mask
    out[gaps] = reconstruction[gaps]
    return FusedDelayVector(samples=out, support_mask=np.ones_like(mask),
                            stretch=fused.stretch, recovery_warning=False)


def fuse_doppler(e_low: np.ndarray, e_high: np.ndarray, cfg_low: CarrierComponentConfig,
                 cfg_high: CarrierComponentConfig, weights: FusionWeights,
                 coherence_rel_tol: float = 1e-9) -> np.ndarray:
    """Merge weighted Doppler vectors once the carrier-duration products agree.

    The shorter vector is zero-padded; the overlap is averaged, the tail keeps
    the longer band's values.
    """
    p1 = cfg_low.carrier_duration_product
    p2 = cfg_high.carrier_duration_product
    if abs(p1 - p2) > coherence_rel_tol * p1:
        raise BandsNotAlignedError(
            f"carrier-duration products differ: {p1:.6f} vs {p2:.6f}; align the CP first"
        )
    low = weights.w_low * np.asarray(e_low)
    high = weights.w_high * np.asarray(e_high)
    m1, m2 = len(low), len(high)
    if m1 == m2:
        return (low + high) / 2.0
    if m1 > m2:
        fused = low.astype(complex).copy()
        fused[:m2] = (low[:m2] + high) / 2.0
    else:
        fused = high.astype(complex).copy()
        fused[:m1] = (low + high[:m1]) / 2.0
    return fused


def velocity_search_matrix(grid: SearchGrid, length: int, fc_t_product: float) -> np.ndarray:
    """Matched Doppler-ramp matrix, columns indexed by candidate velocity."""
    m = np.arange(length)
    return np.exp(-2j * np.pi * fc_t_product * (2.0 / SPEED_OF_LIGHT)
                  * np.outer(m, grid.values))


def velocity_search(samples: np.ndarray, grid: SearchGrid, fc_t_product: float,
                    matrix: np.ndarray | None = None) -> tuple[float, np.ndarray]:
    """Peak of the matched Doppler profile over the velocity grid."""
    if matrix is None:
        matrix = velocity_search_matrix(grid, len(samples), fc_t_product)
    profile = np.asarray(samples) @ matrix
    return float(grid.values[int(np.argmax(np.abs(profile)))]), profile


def data_level_fuse(est_low: EstimateSet, est_high: EstimateSet,
                    sigma2_low: float, sigma2_high: float,
                    cfg_low: CarrierComponentConfig, cfg_high: CarrierComponentConfig,
                    factor_band: str = "high") -> EstimateSet:
    """Fuse per-band parameter estimates with accuracy-and-noise weights.

    The weight factor uses the high band's symbol count for ranges and its
    subcarrier count for velocities by default; ``factor_band`` switches to the
    low band's counts. Targets are paired by sorting each band's list by range.
    """
    if len(est_low) != len(est_high):
        raise PairingError("per-band estimate lists differ in length")
    if sigma2_low < 0 or sigma2_high < 0 or (sigma2_low == 0 and sigma2_high == 0):
        raise InvalidInputError("need at least one positive noise variance")
    if factor_band not in ("high", "low"):
        raise InvalidInputError("factor_band must be 'high' or 'low'")
    ref = cfg_high if factor_band == "high" else cfg_low
    spacing_ratio = cfg_high.subcarrier_spacing_hz / cfg_low.subcarrier_spacing_hz
    factor_r = spacing_ratio * ref.num_symbols
    factor_v = spacing_ratio * ref.num_subcarriers
    w_r = sigma2_low * factor_r / (sigma2_low * factor_r + sigma2_high)
    w_v = sigma2_low * factor_v / (sigma2_low * factor_v + sigma2_high)

    order_low = np.argsort(est_low.ranges_m, kind="stable")
    order_high = np.argsort(est_high.ranges_m, kind="stable")
    r1 = np.asarray(est_low.ranges_m)[order_low]
    r2 = np.asarray(est_high.ranges_m)[order_high]
    v1 = np.asarray(est_low.velocities_mps)[order_low]
    v2 = np.asarray(est_high.velocities_mps)[order_high]
    return EstimateSet(
        ranges_m=r1 + w_r * (r2 - r1),
        velocities_mps=v1 + w_v * (v2 - v1),
        angles_rad=np.asarray(est_low.angles_rad)[order_low],
        method_tag="data-level",
    )


def default_range_grid(cfg_low: CarrierComponentConfig,
                       cfg_high: CarrierComponentConfig) -> SearchGrid:
    """Ranges the shortest CP can support, 4 Q N2 grid points."""
    q = band_ratio(cfg_low, cfg_high).q
    r_max = SPEED_OF_LIGHT * min(cfg_low.cp_duration_s, cfg_high.cp_duration_s) / 2.0
    return SearchGrid(min_value=0.0, max_value=r_max, count=4 * q * cfg_high.num_subcarriers)


def default_velocity_grid(cfg_low: CarrierComponentConfig,
                          cfg_high: CarrierComponentConfig) -> SearchGrid:
    """Velocities respecting the ten-times-Doppler spacing margin on both bands."""
    v_max = SPEED_OF_LIGHT / 20.0 * min(
        cfg_low.subcarrier_spacing_hz / cfg_low.carrier_freq_hz,
        cfg_high.subcarrier_spacing_hz / cfg_high.carrier_freq_hz,
    )
    count = 8 * max(cfg_low.num_symbols, cfg_high.num_symbols)
    return SearchGrid(min_value=-v_max, max_value=v_max, count=count)


@dataclass
class SearchOperators:
    """Precomputed matched-filter matrices shared across trials."""

    range_grid: SearchGrid
    velocity_grid: SearchGrid
    fused_range_matrix: np.ndarray
    low_range_matrix: np.ndarray
    high_range_matrix: np.ndarray
    fused_velocity_matrix: np.ndarray
    low_velocity_matrix: np.ndarray
    high_velocity_matrix: np.ndarray
    omp_dictionary: np.ndarray | None = None
    fused_length: int = 0


def build_search_operators(cfg_low: CarrierComponentConfig, cfg_high: CarrierComponentConfig,
                           range_grid: SearchGrid, velocity_grid: SearchGrid) -> SearchOperators:
    q = band_ratio(cfg_low, cfg_high).q
    n1, n2 = cfg_low.num_subcarriers, cfg_high.num_subcarriers
    fused_len = n1 if n1 - 1 >= q * (n2 - 1) else q * n2
    df1 = cfg_low.subcarrier_spacing_hz
    fused_range = range_search_matrix(range_grid, fused_len, df1)
    m_fused = max(cfg_low.num_symbols, cfg_high.num_symbols)
    return SearchOperators(
        range_grid=range_grid,
        velocity_grid=velocity_grid,
        fused_range_matrix=fused_range,
        low_range_matrix=range_search_matrix(range_grid, n1, df1),
        high_range_matrix=range_search_matrix(range_grid, n2, cfg_high.subcarrier_spacing_hz),
        fused_velocity_matrix=velocity_search_matrix(
            velocity_grid, m_fused, cfg_low.carrier_duration_product),
        low_velocity_matrix=velocity_search_matrix(
            velocity_grid, cfg_low.num_symbols, cfg_low.carrier_duration_product),
        high_velocity_matrix=velocity_search_matrix(
            velocity_grid, cfg_high.num_symbols, cfg_high.carrier_duration_product),
        omp_dictionary=np.conj(fused_range).T,
        fused_length=fused_len,
    )


def _unit_scale(vec: np.ndarray, weights: np.ndarray) -> tuple[np.ndarray, float]:
    """Rescale a feature vector so its lag-0 element matches the weight taper.

    The lag-0 element of a conjugate-product feature is real and carries the
    squared per-band gain; dividing it out puts both bands on the common
    unit-ramp scale before combining. Phases are untouched. Returns the scaled
    vector and the removed power scale (zero means nothing was removed).
    """
    scale = vec[0].real / weights[0]
    if scale <= 0:
        return vec, 0.0
    return vec / scale, float(scale)


def _normalized_noise_pair(sigma2_low: float, sigma2_high: float,
                           scale_low: float, scale_high: float) -> tuple[float, float]:
    """Noise variances on the unit-ramp feature scale.

    Combining weights must compare bands after the gain normalisation, so each
    band's variance is divided by the power scale removed from its features
    (the per-band received signal power estimate).
    """
    eff_low = sigma2_low / scale_low if scale_low > 0 else sigma2_low
    eff_high = sigma2_high / scale_high if scale_high > 0 else sigma2_high
    return effective_noise_pair(eff_low, eff_high)


@contextmanager
def _stage(tag: str):
    try:
        yield
    except PipelineStageError:
        raise
    except Exception as exc:
        raise PipelineStageError(f"stage '{tag}': {exc}") from exc


def _stage1_features(echo_low, echo_high, frame_low, frame_high, cfg_low, cfg_high,
                     array: ArrayConfig, angle_grid_rad, num_targets, regularization,
                     pad_insufficient_peaks=False):
    """Shared preprocessing: data removal, low-band MUSIC, per-band features."""
    reg_low = default_regularization(array.num_tx) if regularization is None else regularization
    with _stage("remove_tx_data"):
        est_low = remove_tx_data(echo_low, frame_low, reg_low)
        est_high = remove_tx_data(echo_high, frame_high, reg_low)
    with _stage("estimate_aoa"):
        aoa = estimate_aoa(est_low, angle_grid_rad, array.d_over_lambda(cfg_low),
                           model_order=num_targets,
                           pad_to_order=pad_insufficient_peaks)
    features = []
    with _stage("spatial_filter_ccc"):
        for i, angle in enumerate(aoa.angles_rad):
            per_band = []
            for est, cfg, frame in ((est_low, cfg_low, frame_low),
                                    (est_high, cfg_high, frame_high)):
                grid = spatial_filter(est, angle, frame.tx_beamformer,
                                      array.d_over_lambda(cfg), target_index=i)
                g, scale = _unit_scale(ccc_delay_feature(grid),
                                       delay_weights(cfg.num_subcarriers))
                e, _ = _unit_scale(ccc_doppler_feature(grid),
                                   doppler_weights(cfg.num_symbols))
                per_band.append((g, e, scale))
            features.append(per_band)
    return aoa, features


def symbol_level_pipeline(echo_low, echo_high, frame_low, frame_high,
                          cfg_low: CarrierComponentConfig, cfg_high: CarrierComponentConfig,
                          array: ArrayConfig, range_grid: SearchGrid,
                          velocity_grid: SearchGrid, angle_grid_rad,
                          num_targets: int | None = None, regularization: float | None = None,
                          noise_variances: tuple[float, float] | None = None,
                          operators: SearchOperators | None = None,
                          pad_insufficient_peaks: bool = False) -> EstimateSet:
    """Coherent two-band pipeline: features are fused before any parameter search."""
    if num_targets == 0:
        return EstimateSet(np.empty(0), np.empty(0), np.empty(0), "symbol-level")
    if operators is None:
        operators = build_search_operators(cfg_low, cfg_high, range_grid, velocity_grid)
    q = band_ratio(cfg_low, cfg_high).q
    s_low, s_high = noise_variances if noise_variances is not None else (
        echo_low.noise_variance, echo_high.noise_variance)

    aoa, features = _stage1_features(echo_low, echo_high, frame_low, frame_high,
                                     cfg_low, cfg_high, array, angle_grid_rad,
                                     num_targets, regularization,
                                     pad_insufficient_peaks=pad_insufficient_peaks)
    ranges, velocities = [], []
    for (g_low, e_low, scale_low), (g_high, e_high, scale_high) in (
            (f[0], f[1]) for f in features):
        weights = mrc_weights(*_normalized_noise_pair(s_low, s_high,
                                                      scale_low, scale_high))
        with _stage("fuse_delay"):
            fused = fuse_delay(g_low, g_high, q, weights)
            fused = recover_missing(fused, max_sparsity=max(aoa.model_order, 1),
                                    grid=operators.range_grid,
                                    delta_f_hz=cfg_low.subcarrier_spacing_hz,
                                    dictionary=operators.omp_dictionary)
        with _stage("range_search"):
            r_hat, _ = range_search(fused.samples, operators.range_grid,
                                    cfg_low.subcarrier_spacing_hz,
                                    matrix=operators.fused_range_matrix)
        with _stage("fuse_doppler"):
            f_vec = fuse_doppler(e_low, e_high, cfg_low, cfg_high, weights)
        with _stage("velocity_search"):
            v_hat, _ = velocity_search(f_vec, operators.velocity_grid,
                                       cfg_low.carrier_duration_product,
                                       matrix=operators.fused_velocity_matrix)
        ranges.append(r_hat)
        velocities.append(v_hat)
    return EstimateSet(
        ranges_m=np.asarray(ranges),
        velocities_mps=np.asarray(velocities),
        angles_rad=np.asarray(aoa.angles_rad),
        method_tag="symbol-level",
    )


def data_level_pipeline(echo_low, echo_high, frame_low, frame_high,
                        cfg_low: CarrierComponentConfig, cfg_high: CarrierComponentConfig,
                        array: ArrayConfig, range_grid: SearchGrid,
                        velocity_grid: SearchGrid, angle_grid_rad,
                        num_targets: int | None = None, regularization: float | None = None,
                        noise_variances: tuple[float, float] | None = None,
                        operators: SearchOperators | None = None,
                        factor_band: str = "high",
                        pad_insufficient_peaks: bool = False):
    """Baseline: each band estimates on its own, then the parameter estimates fuse.

    Returns (fused, per-band low, per-band high) estimate sets. Preprocessing is
    shared with the coherent pipeline so the comparison isolates the fusion stage.
    """
    empty = EstimateSet(np.empty(0), np.empty(0), np.empty(0), "data-level")
    if num_targets == 0:
        return empty, empty, empty
    if operators is None:
        operators = build_search_operators(cfg_low, cfg_high, range_grid, velocity_grid)
    s_low, s_high = noise_variances if noise_variances is not None else (
        echo_low.noise_variance, echo_high.noise_variance)

    aoa, features = _stage1_features(echo_low, echo_high, frame_low, frame_high,
                                     cfg_low, cfg_high, array, angle_grid_rad,
                                     num_targets, regularization,
                                     pad_insufficient_peaks=pad_insufficient_peaks)
    mean_scale_low = float(np.mean([f[0][2] for f in features])) if features else 0.0
    mean_scale_high = float(np.mean([f[1][2] for f in features])) if features else 0.0
    eff_low, eff_high = _normalized_noise_pair(s_low, s_high,
                                               mean_scale_low, mean_scale_high)
    per_band_sets = []
    for b, (cfg, r_mat, v_mat) in enumerate((
            (cfg_low, operators.low_range_matrix, operators.low_velocity_matrix),
            (cfg_high, operators.high_range_matrix, operators.high_velocity_matrix))):
        ranges, velocities = [], []
        for per_band in features:
            g, e, _ = per_band[b]
            with _stage("per_band_search"):
                r_hat, _ = range_search(g, operators.range_grid,
                                        cfg.subcarrier_spacing_hz, matrix=r_mat)
                v_hat, _ = velocity_search(e, operators.velocity_grid,
                                           cfg.carrier_duration_product, matrix=v_mat)
            ranges.append(r_hat)
            velocities.append(v_hat)
        per_band_sets.append(EstimateSet(
            ranges_m=np.asarray(ranges),
            velocities_mps=np.asarray(velocities),
            angles_rad=np.asarray(aoa.angles_rad),
            method_tag="per-band",
        ))
    with _stage("data_level_fuse"):
        fused = data_level_fuse(per_band_sets[0], per_band_sets[1], eff_low, eff_high,
                                cfg_low, cfg_high, factor_band=factor_band)
    return fused, per_band_sets[0], per_band_sets[1]
