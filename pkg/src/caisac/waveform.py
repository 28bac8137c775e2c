"""Band numerology, timing, CP alignment between two carrier components, and frame generation.

The two carrier components (CCs) are tied together by two ratios: the integer
subcarrier-spacing ratio Q and the fractional carrier offset rho. Equalising the
carrier-frequency/symbol-duration products of the two bands is what makes their
Doppler phase ramps identical, and the cyclic prefix of the low band is the knob
that achieves it. CP lengths are therefore kept real-valued; only the time-domain
export rounds them to whole samples.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .constants import SPEED_OF_LIGHT
from .errors import (
    CpTooShortError,
    InconsistentConfigError,
    InvalidConfigError,
    InvalidInputError,
    OverloadedSpatialLayersError,
    UnsupportedNumerologyError,
)


@dataclass(frozen=True)
class CarrierComponentConfig:
    """Physical-layer numerology of one carrier component."""

    carrier_freq_hz: float
    subcarrier_spacing_hz: float
    num_subcarriers: int
    num_symbols: int
    cp_length_samples: float
    band_index: int = 0

    def __post_init__(self):
        if self.carrier_freq_hz <= 0:
            raise InvalidConfigError("carrier_freq_hz must be positive")
        if self.subcarrier_spacing_hz <= 0:
            raise InvalidConfigError("subcarrier_spacing_hz must be positive")
        if self.num_subcarriers < 1:
            raise InvalidConfigError("num_subcarriers must be a positive integer")
        if self.num_symbols < 1:
            raise InvalidConfigError("num_symbols must be a positive integer")
        if self.cp_length_samples < 0:
            raise InvalidConfigError("cp_length_samples must be non-negative")

    @property
    def wavelength_m(self) -> float:
        return SPEED_OF_LIGHT / self.carrier_freq_hz

    @property
    def elementary_symbol_duration_s(self) -> float:
        return 1.0 / self.subcarrier_spacing_hz

    @property
    def cp_duration_s(self) -> float:
        return self.cp_length_samples * self.elementary_symbol_duration_s / self.num_subcarriers

    @property
    def symbol_duration_s(self) -> float:
        return self.elementary_symbol_duration_s + self.cp_duration_s

    @property
    def carrier_duration_product(self) -> float:
        """Carrier frequency times total symbol duration; drives the Doppler ramp."""
        return self.carrier_freq_hz * self.symbol_duration_s

    @property
    def bandwidth_hz(self) -> float:
        return self.num_subcarriers * self.subcarrier_spacing_hz


def derive_timing(cfg: CarrierComponentConfig) -> tuple[float, float, float]:
    """Return (elementary duration, CP duration, total symbol duration) in seconds."""
    t_ofdm = cfg.elementary_symbol_duration_s
    t_cp = cfg.cp_duration_s
    return t_ofdm, t_cp, t_ofdm + t_cp


def check_doppler_headroom(cfg: CarrierComponentConfig, max_doppler_hz: float) -> None:
    """Subcarrier spacing must be at least ten times the largest Doppler shift."""
    if max_doppler_hz < 0:
        raise InvalidInputError("max_doppler_hz must be non-negative")
    if cfg.subcarrier_spacing_hz < 10.0 * max_doppler_hz:
        raise InvalidConfigError(
            f"band {cfg.band_index}: subcarrier spacing {cfg.subcarrier_spacing_hz:g} Hz "
            f"is below 10x the maximum Doppler shift {max_doppler_hz:g} Hz"
        )


@dataclass(frozen=True)
class BandPairRatio:
    """Integer spacing ratio Q and fractional carrier offset rho of a band pair."""

    q: int
    rho: float


def band_ratio(low: CarrierComponentConfig, high: CarrierComponentConfig,
               rel_tol: float = 1e-9) -> BandPairRatio:
    """Derive (Q, rho) from two band configs.

    Q is the spacing ratio (must be an integer >= 2), rho the leftover fraction of
    the carrier-frequency ratio, required to lie in [0, 1).
    """
    ratio = high.subcarrier_spacing_hz / low.subcarrier_spacing_hz
    q = round(ratio)
    if q < 2 or abs(ratio - q) > rel_tol * ratio:
        raise UnsupportedNumerologyError(
            f"subcarrier spacing ratio {ratio:g} is not an integer >= 2"
        )
    rho = high.carrier_freq_hz / low.carrier_freq_hz - q
    if rho >= 1.0 or rho < 0.0:
        raise InconsistentConfigError(
            f"carrier ratio {high.carrier_freq_hz / low.carrier_freq_hz:g} is inconsistent "
            f"with spacing ratio {q} (fractional part {rho:g} outside [0, 1))"
        )
    return BandPairRatio(q=q, rho=rho)


def align_cp(low: CarrierComponentConfig, high: CarrierComponentConfig,
             max_delay_s: float | None = None) -> float:
    """Low-band CP length (in samples) that equalises both carrier-duration products.

    N_s1 = (1 + rho/Q) * (N1/N2) * N_s2 + N1 * rho / Q

    With the returned value, carrier_freq * symbol_duration is identical on both
    bands to within rounding. If ``max_delay_s`` is given, both CP durations must
    cover it.
    """
    pair = band_ratio(low, high)
    n1 = low.num_subcarriers
    n2 = high.num_subcarriers
    ns1 = (1.0 + pair.rho / pair.q) * (n1 / n2) * high.cp_length_samples + n1 * pair.rho / pair.q
    if max_delay_s is not None:
        aligned = replace(low, cp_length_samples=ns1)
        shortest = min(aligned.cp_duration_s, high.cp_duration_s)
        if shortest < max_delay_s:
            raise CpTooShortError(
                f"shortest CP {shortest:g} s does not cover the maximum delay {max_delay_s:g} s"
            )
    return ns1


def aligned_low_band(low: CarrierComponentConfig, high: CarrierComponentConfig,
                     max_delay_s: float | None = None) -> CarrierComponentConfig:
    """Copy of ``low`` with its CP set by :func:`align_cp`."""
    return replace(low, cp_length_samples=align_cp(low, high, max_delay_s=max_delay_s))


@dataclass(frozen=True)
class ArrayConfig:
    """Monostatic array geometry shared by both bands."""

    num_tx: int
    num_rx: int
    element_spacing_m: float

    def __post_init__(self):
        if self.num_tx < 1 or self.num_rx < 1:
            raise InvalidConfigError("antenna counts must be positive")
        if self.element_spacing_m <= 0:
            raise InvalidConfigError("element_spacing_m must be positive")

    @classmethod
    def half_wavelength(cls, num_tx: int, num_rx: int, highest_carrier_freq_hz: float) -> "ArrayConfig":
        """Default geometry: half the wavelength of the highest band, no grating lobes there."""
        return cls(num_tx=num_tx, num_rx=num_rx,
                   element_spacing_m=0.5 * SPEED_OF_LIGHT / highest_carrier_freq_hz)

    def d_over_lambda(self, cfg: CarrierComponentConfig) -> float:
        return self.element_spacing_m / cfg.wavelength_m


@dataclass
class CommFrame:
    """Communication payload of one band.

    ``symbols`` is the stacked (U * N) x M matrix, rows grouped subcarrier-major.
    ``precoder_blocks`` holds the per-subcarrier N_T x U precoder blocks of the
    block-diagonal precoder. ``precoded`` is the stacked (N * N_T) x M transmit matrix.
    """

    symbols: np.ndarray
    precoder_blocks: np.ndarray
    precoded: np.ndarray

    @property
    def num_subcarriers(self) -> int:
        return self.precoder_blocks.shape[0]

    @property
    def num_tx(self) -> int:
        return self.precoder_blocks.shape[1]

    @property
    def num_users(self) -> int:
        return self.precoder_blocks.shape[2]

    @property
    def num_symbols(self) -> int:
        return self.symbols.shape[1]

    def symbols_at(self, n: int) -> np.ndarray:
        """Per-subcarrier M x U symbol block."""
        u = self.num_users
        return self.symbols[n * u:(n + 1) * u].T

    def precoded_at(self, n: int) -> np.ndarray:
        """Per-subcarrier N_T x M transmit block."""
        t = self.num_tx
        return self.precoded[n * t:(n + 1) * t]


_QPSK = np.array([1 + 1j, 1 - 1j, -1 + 1j, -1 - 1j]) / np.sqrt(2.0)


def _haar_unitary(n: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary via QR with phase normalisation."""
    z = (rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def generate_comm_frame(cfg: CarrierComponentConfig, num_tx: int, num_users: int,
                        rng_seed) -> CommFrame:
    """Unit-power QPSK payload precoded by seeded random unitary column subsets."""
    if num_users > num_tx:
        raise OverloadedSpatialLayersError(
            f"{num_users} users exceed {num_tx} transmit antennas"
        )
    rng = np.random.default_rng(rng_seed)
    n, m = cfg.num_subcarriers, cfg.num_symbols
    syms = _QPSK[rng.integers(0, 4, size=(n, num_users, m))]
    blocks = np.empty((n, num_tx, num_users), dtype=complex)
    precoded = np.empty((n, num_tx, m), dtype=complex)
    for i in range(n):
        blocks[i] = _haar_unitary(num_tx, rng)[:, :num_users]
        precoded[i] = blocks[i] @ syms[i]
    return CommFrame(
        symbols=syms.reshape(n * num_users, m),
        precoder_blocks=blocks,
        precoded=precoded.reshape(n * num_tx, m),
    )


@dataclass
class SensingFrame:
    """Dedicated constant-modulus sensing payload of one band."""

    data: np.ndarray            # (N_T, N, M), every entry unit modulus
    tx_beamformer: np.ndarray   # (N_T, N_T)


def generate_sensing_frame(cfg: CarrierComponentConfig, array: ArrayConfig,
                           steer_toward_rad: float | None = None,
                           rng_seed=None) -> SensingFrame:
    """Unit-modulus random-phase sensing data with an optional steered beamformer.

    With ``steer_toward_rad`` set, the beamformer is a unitary matrix whose first
    column is the conjugate transmit steering vector (unit norm); rank is preserved.
    """
    rng = np.random.default_rng(rng_seed)
    phases = rng.uniform(0.0, 2.0 * np.pi,
                         size=(array.num_tx, cfg.num_subcarriers, cfg.num_symbols))
    data = np.exp(1j * phases)
    if steer_toward_rad is None:
        w = np.eye(array.num_tx, dtype=complex)
    else:
        nt = array.num_tx
        dl = array.d_over_lambda(cfg)
        a_tx = np.exp(2j * np.pi * np.arange(nt) * dl * np.sin(steer_toward_rad))
        first = np.conj(a_tx) / np.sqrt(nt)
        basis = np.eye(nt, dtype=complex)
        basis[:, 0] = first
        q, _ = np.linalg.qr(basis)
        # QR may flip the leading column's phase; pin it back
        q[:, 0] = first
        w = q
    return SensingFrame(data=data, tx_beamformer=w)


def to_time_domain(frame_freq: np.ndarray, cfg: CarrierComponentConfig) -> np.ndarray:
    """Per-symbol IDFT with cyclic prefix, for waveform export.

    ``frame_freq`` has shape (..., N, M); the result has shape (..., N + round(N_s), M).
    The sensing pipeline itself stays in the frequency domain; this exists so the
    transmit signal can be written out or fed to external tooling.
    """
    frame_freq = np.asarray(frame_freq)
    if frame_freq.shape[-2] != cfg.num_subcarriers:
        raise InvalidConfigError(
            f"frame has {frame_freq.shape[-2]} subcarrier rows, config expects {cfg.num_subcarriers}"
        )
    time = np.fft.ifft(frame_freq, axis=-2)
    n_cp = int(round(cfg.cp_length_samples))
    if n_cp == 0:
        return time
    cp = time[..., time.shape[-2] - n_cp:, :]
    return np.concatenate([cp, time], axis=-2)
