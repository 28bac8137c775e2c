"""Received communication signal and closed-form mutual information.

MI is evaluated per subcarrier as log2 det(I + H^H R H / sigma^2) and summed,
then scaled by the number of OFDM symbols. Aggregating two bands adds their
per-subcarrier Gram terms inside one determinant, which can only increase the
value (the added term is positive semidefinite).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .channel import freq_response_all
from .errors import DimensionMismatchError, InvalidInputError
from .waveform import CommFrame


@dataclass
class MiReport:
    """Mutual information of one operating point."""

    mi_bits: float
    per_band_mi_bits: list
    snr_db: float
    num_ue_antennas: int
    mi_bits_per_re: float = field(default=float("nan"))


def default_input_covariance(frame: CommFrame, total_power: float = 1.0) -> np.ndarray:
    """Per-subcarrier transmit covariance (P/U) W_n W_n^H implied by the precoder."""
    u = frame.num_users
    return (total_power / u) * np.einsum("ntu,nsu->nts", frame.precoder_blocks,
                                         np.conj(frame.precoder_blocks))


def simulate_comm_rx(frames, channels, noise_variance: float, rng_seed) -> np.ndarray:
    """Received matrix Y = sum_b X^b H^b + W, stacked (N * M) x N_U.

    ``frames`` and ``channels`` are per-band sequences; all bands must share the
    subcarrier and symbol counts, and each frame's antenna count must match its
    channel realization.
    """
    if len(frames) != len(channels) or not frames:
        raise DimensionMismatchError("need one channel realization per frame")
    n = frames[0].num_subcarriers
    m = frames[0].num_symbols
    n_ue = channels[0].taps.shape[2]
    y = None
    for frame, chan in zip(frames, channels):
        if frame.num_subcarriers != n or frame.num_symbols != m:
            raise DimensionMismatchError("bands disagree on subcarrier or symbol counts")
        if chan.taps.shape[1] != frame.num_tx or chan.taps.shape[2] != n_ue:
            raise DimensionMismatchError("channel tap shape does not match the frame")
        h = freq_response_all(chan, n)                       # (N, N_T, N_U)
        x = frame.precoded.reshape(n, frame.num_tx, m)       # (N, N_T, M)
        contrib = np.einsum("ntm,ntu->nmu", x, h).reshape(n * m, n_ue)
        y = contrib if y is None else y + contrib
    if noise_variance < 0:
        raise InvalidInputError("noise_variance must be non-negative")
    if noise_variance > 0:
        rng = np.random.default_rng(rng_seed)
        std = np.sqrt(noise_variance / 2.0)
        y = y + std * (rng.standard_normal(y.shape) + 1j * rng.standard_normal(y.shape))
    return y


def _check_covariance(r: np.ndarray) -> np.ndarray:
    r = np.asarray(r)
    herm = 0.5 * (r + np.conj(np.swapaxes(r, -1, -2)))
    eigs = np.linalg.eigvalsh(herm)
    floor = -1e-10 * max(1.0, float(np.max(np.abs(eigs))))
    if np.min(eigs) < floor:
        raise InvalidInputError("input covariance is not positive semidefinite")
    return herm


def _gram(freq_responses: np.ndarray, covariances: np.ndarray) -> np.ndarray:
    """Per-subcarrier H^H R H, shape (N, N_U, N_U)."""
    return np.einsum("ntu,nts,nsv->nuv", np.conj(freq_responses), covariances, freq_responses)


def _mi_bits_from_gram(gram: np.ndarray, noise_variance: float, num_symbols: int) -> float:
    n_ue = gram.shape[-1]
    eye = np.eye(n_ue)
    sign, logdet = np.linalg.slogdet(eye + gram / noise_variance)
    if np.any(sign.real <= 0):
        raise InvalidInputError("determinant is not positive; covariance invalid")
    return float(num_symbols * np.sum(logdet) / np.log(2.0))


def _broadcast_cov(covariance, n: int) -> np.ndarray:
    covariance = np.asarray(covariance)
    if covariance.ndim == 2:
        covariance = np.broadcast_to(covariance, (n,) + covariance.shape)
    return covariance


def mi_single_band(freq_responses: np.ndarray, input_covariance, noise_variance: float,
                   num_symbols: int) -> float:
    """Closed-form MI in bits per frame for one band.

    ``freq_responses`` has shape (N, N_T, N_U); ``input_covariance`` is a single
    N_T x N_T matrix or a stack of N of them (per-subcarrier transmit covariance).
    """
    if noise_variance <= 0:
        raise InvalidInputError("noise_variance must be positive")
    h = np.asarray(freq_responses)
    if h.ndim != 3:
        raise DimensionMismatchError("freq_responses must have shape (N, N_T, N_U)")
    r = _check_covariance(_broadcast_cov(input_covariance, h.shape[0]))
    if r.shape[-1] != h.shape[1]:
        raise DimensionMismatchError("covariance size does not match transmit antennas")
    return _mi_bits_from_gram(_gram(h, r), noise_variance, num_symbols)


def mi_ca(freq_responses_per_band, input_covariance_per_band, noise_variance: float,
          num_symbols: int, snr_db: float = float("nan")) -> MiReport:
    """Carrier-aggregated MI plus the per-band values.

    Both bands must share the subcarrier count and the UE antenna count; the two
    per-subcarrier Gram terms are summed inside one determinant.
    """
    if noise_variance <= 0:
        raise InvalidInputError("noise_variance must be positive")
    if len(freq_responses_per_band) != len(input_covariance_per_band):
        raise DimensionMismatchError("need one covariance per band")
    shapes = [np.asarray(h).shape for h in freq_responses_per_band]
    if any(len(s) != 3 for s in shapes):
        raise DimensionMismatchError("freq responses must have shape (N, N_T, N_U)")
    if any((s[0], s[2]) != (shapes[0][0], shapes[0][2]) for s in shapes):
        raise DimensionMismatchError(
            "aggregated MI assumes equal subcarrier and UE antenna counts across bands"
        )
    gram_total = None
    per_band = []
    for h, r in zip(freq_responses_per_band, input_covariance_per_band):
        h = np.asarray(h)
        r = _check_covariance(_broadcast_cov(r, h.shape[0]))
        g = _gram(h, r)
        per_band.append(_mi_bits_from_gram(g, noise_variance, num_symbols))
        gram_total = g if gram_total is None else gram_total + g
    total = _mi_bits_from_gram(gram_total, noise_variance, num_symbols)
    n, _, n_ue = shapes[0]
    return MiReport(
        mi_bits=total,
        per_band_mi_bits=per_band,
        snr_db=snr_db,
        num_ue_antennas=n_ue,
        mi_bits_per_re=total / (n * num_symbols),
    )
