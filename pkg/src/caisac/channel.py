"""Sensing and communication channels, echo-cube synthesis.

The sensing channel of each band is a sum over targets of a complex attenuation,
a delay ramp across subcarriers, a Doppler ramp across symbols, and the outer
product of receive and transmit steering vectors. Per-band additive noise
variances are independent inputs; band coupling is not modelled (echoes are
assumed perfectly separated by matched filtering).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT
from .errors import CpTooShortError, DimensionMismatchError, InvalidConfigError, InvalidInputError
from .waveform import ArrayConfig, CarrierComponentConfig, SensingFrame


@dataclass(frozen=True)
class TargetTruth:
    """Ground truth for one point target."""

    range_m: float
    velocity_mps: float
    angle_rad: float
    rcs_variance: float = 1.0

    def __post_init__(self):
        if self.range_m <= 0:
            raise InvalidConfigError("range_m must be positive")
        if abs(self.angle_rad) >= np.pi / 2:
            raise InvalidConfigError("angle_rad must lie in (-pi/2, pi/2)")
        if self.rcs_variance < 0:
            raise InvalidConfigError("rcs_variance must be non-negative")

    @property
    def delay_s(self) -> float:
        return 2.0 * self.range_m / SPEED_OF_LIGHT

    def doppler_hz(self, carrier_freq_hz: float) -> float:
        return 2.0 * carrier_freq_hz * self.velocity_mps / SPEED_OF_LIGHT


@dataclass
class EchoCube:
    """Received sensing samples of one band, indexed (rx antenna, subcarrier, symbol)."""

    samples: np.ndarray
    noise_variance: float
    band_index: int = 0


def steering(angle_rad: float, num_elements: int, d_over_lambda: float) -> np.ndarray:
    """Uniform-linear-array steering vector exp(j 2 pi p (d/lambda) sin(angle))."""
    if num_elements < 1:
        raise InvalidInputError("num_elements must be >= 1")
    p = np.arange(num_elements)
    return np.exp(2j * np.pi * p * d_over_lambda * np.sin(angle_rad))


def attenuation_scale(wavelength_m: float, range_m: float) -> float:
    """Deterministic part of the two-way attenuation, sqrt(lambda^2 / ((4 pi)^3 r^4))."""
    if range_m <= 0:
        raise InvalidInputError("range_m must be positive")
    return float(np.sqrt(wavelength_m ** 2 / ((4.0 * np.pi) ** 3 * range_m ** 4)))


def attenuation(wavelength_m: float, range_m: float, rcs_sample: complex) -> complex:
    """Complex target gain: attenuation scale times the drawn reflectivity sample."""
    return attenuation_scale(wavelength_m, range_m) * rcs_sample


def draw_rcs_samples(targets, rng: np.random.Generator) -> np.ndarray:
    """One zero-mean complex-normal reflectivity draw per target (frame-constant)."""
    out = np.empty(len(targets), dtype=complex)
    for i, t in enumerate(targets):
        std = np.sqrt(t.rcs_variance / 2.0)
        out[i] = std * (rng.standard_normal() + 1j * rng.standard_normal())
    return out


def sensing_channel(cfg: CarrierComponentConfig, array: ArrayConfig, targets,
                    m: int, n: int, rcs_samples) -> np.ndarray:
    """N_R x N_T sensing channel matrix at symbol m, subcarrier n."""
    if not (0 <= m < cfg.num_symbols and 0 <= n < cfg.num_subcarriers):
        raise InvalidInputError("symbol or subcarrier index out of range")
    dl = array.d_over_lambda(cfg)
    t_total = cfg.symbol_duration_s
    h = np.zeros((array.num_rx, array.num_tx), dtype=complex)
    for tgt, rcs in zip(targets, rcs_samples):
        kappa = attenuation(cfg.wavelength_m, tgt.range_m, rcs)
        phase = np.exp(2j * np.pi * (tgt.doppler_hz(cfg.carrier_freq_hz) * m * t_total
                                     - n * cfg.subcarrier_spacing_hz * tgt.delay_s))
        a_rx = steering(tgt.angle_rad, array.num_rx, dl)
        a_tx = steering(tgt.angle_rad, array.num_tx, dl)
        h += kappa * phase * np.outer(a_rx, a_tx)
    return h


def simulate_echo(cfg: CarrierComponentConfig, array: ArrayConfig, targets,
                  frame: SensingFrame, noise_variance: float, rng_seed,
                  rcs_samples=None) -> EchoCube:
    """Synthesize one band's echo cube y = H W d + z.

    Reflectivity samples are drawn once per call (frame-constant) unless supplied.
    The additive noise is complex normal with the given per-band variance.
    """
    if noise_variance < 0:
        raise InvalidInputError("noise_variance must be non-negative")
    n_sub, n_sym = cfg.num_subcarriers, cfg.num_symbols
    if frame.data.shape != (array.num_tx, n_sub, n_sym):
        raise DimensionMismatchError(
            f"frame data shape {frame.data.shape} does not match "
            f"({array.num_tx}, {n_sub}, {n_sym})"
        )
    if targets:
        max_delay = max(t.delay_s for t in targets)
        if max_delay > cfg.cp_duration_s:
            raise CpTooShortError(
                f"band {cfg.band_index}: max delay {max_delay:g} s exceeds CP {cfg.cp_duration_s:g} s"
            )
    rng = np.random.default_rng(rng_seed)
    if rcs_samples is None:
        rcs_samples = draw_rcs_samples(targets, rng)

    beamformed = np.einsum("ts,snm->tnm", frame.tx_beamformer, frame.data)
    cube = np.zeros((array.num_rx, n_sub, n_sym), dtype=complex)
    dl = array.d_over_lambda(cfg)
    t_total = cfg.symbol_duration_s
    m_idx = np.arange(n_sym)
    n_idx = np.arange(n_sub)
    for tgt, rcs in zip(targets, rcs_samples):
        kappa = attenuation(cfg.wavelength_m, tgt.range_m, rcs)
        doppler_ramp = np.exp(2j * np.pi * tgt.doppler_hz(cfg.carrier_freq_hz) * m_idx * t_total)
        delay_ramp = np.exp(-2j * np.pi * n_idx * cfg.subcarrier_spacing_hz * tgt.delay_s)
        a_rx = steering(tgt.angle_rad, array.num_rx, dl)
        a_tx = steering(tgt.angle_rad, array.num_tx, dl)
        tx_proj = np.einsum("t,tnm->nm", a_tx, beamformed)
        cube += kappa * a_rx[:, None, None] * (delay_ramp[:, None] * doppler_ramp[None, :] * tx_proj)[None]
    if noise_variance > 0:
        std = np.sqrt(noise_variance / 2.0)
        cube = cube + std * (rng.standard_normal(cube.shape) + 1j * rng.standard_normal(cube.shape))
    return EchoCube(samples=cube, noise_variance=float(noise_variance), band_index=cfg.band_index)


def estimate_noise_variance(echo: EchoCube, guard_subcarriers) -> float:
    """Sample noise variance over subcarriers known to carry no transmission.

    Fusion weighting normally receives the configured variances; this is the
    fallback when they must be measured, using a guard band the sensing frame
    left empty.
    """
    guard = np.asarray(guard_subcarriers, dtype=int)
    if guard.size == 0:
        raise InvalidInputError("need at least one guard subcarrier")
    if guard.min() < 0 or guard.max() >= echo.samples.shape[1]:
        raise InvalidInputError("guard subcarrier index out of range")
    return float(np.mean(np.abs(echo.samples[:, guard, :]) ** 2))


@dataclass
class CommChannelRealization:
    """Frequency-selective MIMO channel: L i.i.d. Rayleigh taps of shape N_T x N_U."""

    taps: np.ndarray  # (L, N_T, N_U)

    @property
    def num_paths(self) -> int:
        return self.taps.shape[0]


def comm_channel(num_paths: int, num_tx: int, num_ue: int, rng_seed) -> CommChannelRealization:
    """Draw L unit-variance Rayleigh taps."""
    if num_paths < 1:
        raise InvalidInputError("num_paths must be >= 1")
    rng = np.random.default_rng(rng_seed)
    taps = (rng.standard_normal((num_paths, num_tx, num_ue))
            + 1j * rng.standard_normal((num_paths, num_tx, num_ue))) / np.sqrt(2.0)
    return CommChannelRealization(taps=taps)


def freq_response(realization: CommChannelRealization, n: int, num_subcarriers: int) -> np.ndarray:
    """Per-subcarrier response sum_l taps[l] exp(-j 2 pi n l / N)."""
    phases = np.exp(-2j * np.pi * n * np.arange(realization.num_paths) / num_subcarriers)
    return np.einsum("l,ltu->tu", phases, realization.taps)


def freq_response_all(realization: CommChannelRealization, num_subcarriers: int) -> np.ndarray:
    """All subcarrier responses stacked, shape (N, N_T, N_U)."""
    l_idx = np.arange(realization.num_paths)
    n_idx = np.arange(num_subcarriers)
    phases = np.exp(-2j * np.pi * np.outer(n_idx, l_idx) / num_subcarriers)
    return np.einsum("nl,ltu->ntu", phases, realization.taps)
