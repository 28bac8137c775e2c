"""Fisher information, Cramer-Rao bounds, and error metrics.

The Fisher information of one band over (sin-angle, delay, Doppler-scale) has
closed-form entries in the array, subcarrier, and symbol index sums; the
brute-force oracle evaluates the same entries as literal triple sums over the
per-sample phase derivatives. Aggregating bands sums their matrices.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .constants import SPEED_OF_LIGHT
from .errors import DegenerateGeometryError, InvalidInputError
from .fusion import EstimateSet
from .waveform import ArrayConfig, CarrierComponentConfig


@dataclass
class FisherInfo3:
    """3x3 Fisher information over (sin theta, tau, gamma) with gamma = 2 v / c."""

    matrix: np.ndarray
    snr_linear: float


@dataclass
class CrlbReport:
    """Per-parameter CRLBs in physical units."""

    crlb_angle_rad2: float
    crlb_range_m2: float
    crlb_velocity_mps2: float
    band_tag: str


@dataclass
class ArmseReport:
    """Average (over targets) root mean squared estimation error."""

    armse_range_m: float
    armse_velocity_mps: float
    num_trials: int
    snr_db: float


def _theta_sums(cfg: CarrierComponentConfig, array: ArrayConfig):
    """Closed-form index sums entering the FIM and CRLB expressions."""
    nr, nb, mb = array.num_rx, cfg.num_subcarriers, cfg.num_symbols
    dl = array.d_over_lambda(cfg)
    df = cfg.subcarrier_spacing_hz
    fct = cfg.carrier_duration_product
    sum_p2 = (nr - 1) * nr * (2 * nr - 1) / 6.0
    sum_n2 = (nb - 1) * nb * (2 * nb - 1) / 6.0
    sum_m2 = (mb - 1) * mb * (2 * mb - 1) / 6.0
    sum_p = nr * (nr - 1) / 2.0
    sum_n = nb * (nb - 1) / 2.0
    sum_m = mb * (mb - 1) / 2.0
    return {
        "p": dl ** 2 * sum_p2,
        "n": df ** 2 * sum_n2,
        "m": fct ** 2 * sum_m2,
        "pn": dl * df * sum_p * sum_n,
        "pm": dl * fct * sum_p * sum_m,
        "mn": df * fct * sum_m * sum_n,
    }


def fim_band(cfg: CarrierComponentConfig, array: ArrayConfig, snr_linear: float) -> FisherInfo3:
    """Closed-form single-band FIM at per-sample SNR ``snr_linear``."""
    if snr_linear < 0:
        raise InvalidInputError("snr_linear must be non-negative")
    t = _theta_sums(cfg, array)
    nr, nb, mb = array.num_rx, cfg.num_subcarriers, cfg.num_symbols
    f = np.array([
        [mb * nb * t["p"], -mb * t["pn"], nb * t["pm"]],
        [-mb * t["pn"], mb * nr * t["n"], -nr * t["mn"]],
        [nb * t["pm"], -nr * t["mn"], nb * nr * t["m"]],
    ])
    return FisherInfo3(matrix=snr_linear * (2.0 * np.pi) ** 2 * f, snr_linear=snr_linear)


def fim_numeric_oracle(cfg: CarrierComponentConfig, array: ArrayConfig,
                       snr_linear: float) -> FisherInfo3:
    """Literal triple-sum FIM over the per-sample phase-derivative products."""
    if snr_linear < 0:
        raise InvalidInputError("snr_linear must be non-negative")
    dl = array.d_over_lambda(cfg)
    df = cfg.subcarrier_spacing_hz
    fct = cfg.carrier_duration_product
    f = np.zeros((3, 3))
    for p in range(array.num_rx):
        for m in range(cfg.num_symbols):
            for n in range(cfg.num_subcarriers):
                g = np.array([p * dl, -n * df, m * fct])
                f += np.outer(g, g)
    return FisherInfo3(matrix=snr_linear * (2.0 * np.pi) ** 2 * f, snr_linear=snr_linear)


_PARAM_NAMES = ("sin_theta", "delay", "doppler_scale")


def _name_degenerate(cfg: CarrierComponentConfig, array: ArrayConfig) -> str:
    if array.num_rx == 1:
        return "sin_theta"
    if cfg.num_subcarriers == 1:
        return "delay"
    if cfg.num_symbols == 1:
        return "doppler_scale"
    return "joint geometry"


def crlb_band(fim: FisherInfo3, cfg: CarrierComponentConfig, array: ArrayConfig,
              cross_check_tol: float = 1e-9) -> tuple[float, float, float]:
    """Single-band CRLBs in the (sin theta, tau, gamma) parametrisation.

    Evaluates the closed forms and cross-checks them against the diagonal of
    the inverted Fisher matrix; a disagreement beyond ``cross_check_tol``
    (relative) means the closed forms were fed an inconsistent matrix.
    """
    t = _theta_sums(cfg, array)
    nr, nb, mb = array.num_rx, cfg.num_subcarriers, cfg.num_symbols
    varpi = fim.snr_linear
    det_factor = (
        mb * nb * nr * t["p"] * t["n"] * t["m"]
        + 2.0 * t["pn"] * t["pm"] * t["mn"]
        - nb * t["pm"] ** 2 * t["n"]
        - mb * t["pn"] ** 2 * t["m"]
        - nr * t["mn"] ** 2 * t["p"]
    )
    if varpi <= 0 or det_factor <= 0 or not np.isfinite(det_factor):
        raise DegenerateGeometryError(
            f"Fisher information singular: no information about {_name_degenerate(cfg, array)}"
        )
    gamma_mimo = 1.0 / (varpi * (2.0 * np.pi) ** 2 * det_factor)
    crlb_sin = gamma_mimo * nr * (mb * nb * t["n"] * t["m"] - t["mn"] ** 2) / (mb * nb)
    crlb_tau = gamma_mimo * nb * (mb * nr * t["p"] * t["m"] - t["pm"] ** 2) / (mb * nr)
    crlb_gam = gamma_mimo * mb * (nb * nr * t["p"] * t["n"] - t["pn"] ** 2) / (nb * nr)

    inv_diag = np.diag(np.linalg.inv(fim.matrix))
    closed = np.array([crlb_sin, crlb_tau, crlb_gam])
    if not np.allclose(inv_diag, closed, rtol=cross_check_tol, atol=0.0):
        raise InvalidInputError(
            "closed-form CRLBs disagree with the Fisher matrix inverse; "
            "matrix does not match the given config"
        )
    return float(crlb_sin), float(crlb_tau), float(crlb_gam)


def _crlb_report(total_fim: np.ndarray, theta_rad: float, band_tag: str) -> CrlbReport:
    scale = (2.0 / SPEED_OF_LIGHT) ** 2
    try:
        angle = np.linalg.inv(np.cos(theta_rad) * total_fim)[0, 0]
        inv_scaled = np.linalg.inv(scale * total_fim)
    except np.linalg.LinAlgError as exc:
        raise DegenerateGeometryError(f"summed Fisher information singular: {exc}") from exc
    if not np.all(np.isfinite(inv_scaled)):
        raise DegenerateGeometryError("summed Fisher information singular")
    return CrlbReport(
        crlb_angle_rad2=float(angle),
        crlb_range_m2=float(inv_scaled[1, 1]),
        crlb_velocity_mps2=float(inv_scaled[2, 2]),
        band_tag=band_tag,
    )


def crlb_single(fim: FisherInfo3, theta_rad: float, band_tag: str) -> CrlbReport:
    """Physical-unit CRLBs of one band alone."""
    return _crlb_report(fim.matrix, theta_rad, band_tag)


def crlb_ca(fim_low: FisherInfo3, fim_high: FisherInfo3, theta_rad: float) -> CrlbReport:
    """Aggregated CRLBs: the two bands' Fisher matrices add before inversion."""
    return _crlb_report(fim_low.matrix + fim_high.matrix, theta_rad, "ca")


def armse(estimate_sets: list[EstimateSet], truth, snr_db: float = float("nan")) -> ArmseReport:
    """RMSE per target across trials, averaged over targets."""
    if not estimate_sets:
        raise InvalidInputError("need at least one trial")
    n_targets = len(truth)
    sq_r = np.zeros(n_targets)
    sq_v = np.zeros(n_targets)
    for est in estimate_sets:
        if len(est) != n_targets:
            raise InvalidInputError("estimate set size does not match the truth")
        sq_r += (np.asarray(est.ranges_m) - np.array([t.range_m for t in truth])) ** 2
        sq_v += (np.asarray(est.velocities_mps)
                 - np.array([t.velocity_mps for t in truth])) ** 2
    n_trials = len(estimate_sets)
    return ArmseReport(
        armse_range_m=float(np.mean(np.sqrt(sq_r / n_trials))),
        armse_velocity_mps=float(np.mean(np.sqrt(sq_v / n_trials))),
        num_trials=n_trials,
        snr_db=snr_db,
    )


def theoretical_rmse(bandwidth_hz: float, snr_linear: float, num_symbols: int,
                     carrier_freq_hz: float, total_symbol_duration_s: float) -> tuple[float, float]:
    """Reference accuracies: c / (2 B sqrt(2 chi)) and c / (2 M f_C T sqrt(2 chi))."""
    if min(bandwidth_hz, snr_linear, num_symbols, carrier_freq_hz,
           total_symbol_duration_s) <= 0:
        raise InvalidInputError("all theoretical-RMSE inputs must be positive")
    root = np.sqrt(2.0 * snr_linear)
    sigma_r = SPEED_OF_LIGHT / (2.0 * bandwidth_hz * root)
    sigma_v = SPEED_OF_LIGHT / (2.0 * num_symbols * carrier_freq_hz
                                * total_symbol_duration_s * root)
    return float(sigma_r), float(sigma_v)
