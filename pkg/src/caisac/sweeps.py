"""Monte Carlo sweeps and CSV emission.

All randomness flows through the seed-splitting rule in :mod:`caisac.seeds`, so
a sweep is a pure function of (scenario, master seed) and reruns are
byte-identical. Wall-clock timings go to a side log, never into the CSVs.

CSV schemas (v1; header row, RFC 4180, fixed column order):

    results.csv    scenario_id, seed, snr_db, trial, method, target_index,
                   r_true_m, r_hat_m, v_true_mps, v_hat_mps,
                   theta_true_deg, theta_hat_deg
    summary.csv    snr_db, method, armse_range_m, armse_velocity_mps,
                   crlb_rmse_range_m_ca, crlb_rmse_velocity_mps_ca,
                   theo_rmse_range_m_low, theo_rmse_range_m_high,
                   theo_rmse_velocity_mps_low, theo_rmse_velocity_mps_high,
                   improvement_range_vs_data, improvement_velocity_vs_data
    mi.csv         snr_db, n_ue, mi_single_low, mi_single_high, mi_ca,
                   mi_ca_per_re
    crlb.csv       snr_db, band_tag, crlb_range, crlb_velocity, crlb_angle,
                   crlb_rmse_range_m, crlb_rmse_velocity_mps, crlb_rmse_angle_rad
    bandwidth.csv  n2, n1, crlb_range_m2_ca, crlb_velocity_mps2_ca,
                   crlb_rmse_range_m_ca, crlb_rmse_velocity_mps_ca
"""

from __future__ import annotations

import concurrent.futures
import csv
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import seeds
from .channel import attenuation_scale, comm_channel, freq_response_all, simulate_echo
from .comm_mi import (
    _broadcast_cov,
    _check_covariance,
    _gram,
    _mi_bits_from_gram,
    default_input_covariance,
)
from .errors import InvalidConfigError
from .fusion import (
    build_search_operators,
    data_level_pipeline,
    symbol_level_pipeline,
)
from .metrics import armse, crlb_ca, crlb_single, fim_band, theoretical_rmse
from .scenario import Scenario
from .waveform import generate_comm_frame, generate_sensing_frame


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # plain-float repr, also for numpy scalars
    if isinstance(value, (np.integer,)):
        return str(int(value))
    return str(value)


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def received_power_per_antenna(scenario: Scenario, cfg) -> float:
    """Mean per-RE echo power at one receive antenna for a whole scene.

    Each target contributes its expected squared gain times the transmit
    antenna count (the random sensing vector projects with mean power N_T).
    """
    total = 0.0
    for t in scenario.targets:
        total += attenuation_scale(cfg.wavelength_m, t.range_m) ** 2 * t.rcs_variance
    return total * scenario.array.num_tx


def band_noise_variances(scenario: Scenario, snr_db: float) -> tuple[float, float]:
    """Per-band noise variances from the received per-RE SNR convention.

    The grid SNR applies to the low band; the high band is offset by
    ``hf_snr_offset_db`` (negative means noisier). ``inf`` SNR means noiseless.
    """
    out = []
    for cfg, offset in ((scenario.cfg_low, 0.0), (scenario.cfg_high, scenario.hf_snr_offset_db)):
        snr = snr_db + offset
        if np.isinf(snr):
            out.append(0.0)
        else:
            out.append(received_power_per_antenna(scenario, cfg) * 10.0 ** (-snr / 10.0))
    return out[0], out[1]


def _run_trial(scenario: Scenario, snr_db: float, trial: int, operators):
    """One Monte Carlo trial; returns {method: EstimateSet}."""
    sigma_low, sigma_high = band_noise_variances(scenario, snr_db)
    frames = []
    echoes = []
    for band, (cfg, sigma) in enumerate(
            ((scenario.cfg_low, sigma_low), (scenario.cfg_high, sigma_high)), start=1):
        frame = generate_sensing_frame(
            cfg, scenario.array,
            rng_seed=seeds.child_seed(scenario.master_seed, seeds.STAGE_SENSING_FRAME, trial, band))
        echo = simulate_echo(
            cfg, scenario.array, scenario.targets, frame, sigma,
            rng_seed=seeds.child_seed(scenario.master_seed, seeds.STAGE_ECHO, trial, band))
        frames.append(frame)
        echoes.append(echo)

    common = dict(
        echo_low=echoes[0], echo_high=echoes[1],
        frame_low=frames[0], frame_high=frames[1],
        cfg_low=scenario.cfg_low, cfg_high=scenario.cfg_high,
        array=scenario.array,
        range_grid=scenario.range_grid, velocity_grid=scenario.velocity_grid,
        angle_grid_rad=scenario.angle_grid_rad,
        num_targets=scenario.num_targets,
        operators=operators,
        # a trial whose spectrum separates fewer peaks than targets is counted
        # through its (large) errors rather than aborting the sweep
        pad_insufficient_peaks=True,
    )
    results = {}
    if "symbol" in scenario.methods:
        results["symbol-level"] = symbol_level_pipeline(**common)
    if "data" in scenario.methods or "per-band" in scenario.methods:
        fused, low, high = data_level_pipeline(**common)
        if "data" in scenario.methods:
            results["data-level"] = fused
        if "per-band" in scenario.methods:
            results["per-band-low"] = low
            results["per-band-high"] = high
    return results


# per-worker state for the process pool: the matched-filter matrices are tens
# of megabytes, so they are built once per worker instead of pickled per task
_WORKER = {}


def _init_worker(scenario: Scenario) -> None:
    _WORKER["scenario"] = scenario
    _WORKER["operators"] = build_search_operators(
        scenario.cfg_low, scenario.cfg_high, scenario.range_grid, scenario.velocity_grid)


def _trial_task(args):
    snr_db, trial = args
    return (snr_db, trial), _run_trial(_WORKER["scenario"], snr_db, trial,
                                       _WORKER["operators"])


def run_sweep(scenario: Scenario, out_dir, threads: int = 1):
    """ARMSE sweep over the scenario's SNR grid; writes results.csv and summary.csv."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()

    tasks = [(snr, trial)
             for snr in scenario.snr_grid_db for trial in range(scenario.trials)]
    outcomes = {}
    if threads > 1:
        # workers are separate processes; the parent keeps no library state
        with concurrent.futures.ProcessPoolExecutor(
                max_workers=threads, initializer=_init_worker,
                initargs=(scenario,)) as pool:
            for key, value in pool.map(_trial_task, tasks, chunksize=4):
                outcomes[key] = value
    else:
        operators = build_search_operators(scenario.cfg_low, scenario.cfg_high,
                                           scenario.range_grid, scenario.velocity_grid)
        for snr, trial in tasks:
            outcomes[(snr, trial)] = _run_trial(scenario, snr, trial, operators)

    result_rows = []
    summary_rows = []
    theta0 = scenario.targets[0].angle_rad if scenario.targets else 0.0
    for snr in scenario.snr_grid_db:
        per_method = {}
        for trial in range(scenario.trials):
            for method, est in outcomes[(snr, trial)].items():
                per_method.setdefault(method, []).append(est)
                for i in range(len(est)):
                    t = scenario.targets[i]
                    result_rows.append([
                        scenario.scenario_id, scenario.master_seed, snr, trial, method, i,
                        t.range_m, float(est.ranges_m[i]),
                        t.velocity_mps, float(est.velocities_mps[i]),
                        float(np.degrees(t.angle_rad)), float(np.degrees(est.angles_rad[i])),
                    ])
        reports = {method: armse(sets, scenario.targets, snr_db=snr)
                   for method, sets in per_method.items()}
        refs = _reference_columns(scenario, snr, theta0)
        for method in sorted(reports):
            rep = reports[method]
            improvement_r = improvement_v = ""
            if method == "symbol-level" and "data-level" in reports:
                data_rep = reports["data-level"]
                if data_rep.armse_range_m > 0:
                    improvement_r = 1.0 - rep.armse_range_m / data_rep.armse_range_m
                if data_rep.armse_velocity_mps > 0:
                    improvement_v = 1.0 - rep.armse_velocity_mps / data_rep.armse_velocity_mps
            summary_rows.append([snr, method, rep.armse_range_m, rep.armse_velocity_mps,
                                 *refs, improvement_r, improvement_v])

    results_path = out_dir / "results.csv"
    summary_path = out_dir / "summary.csv"
    _write_csv(results_path,
               ["scenario_id", "seed", "snr_db", "trial", "method", "target_index",
                "r_true_m", "r_hat_m", "v_true_mps", "v_hat_mps",
                "theta_true_deg", "theta_hat_deg"], result_rows)
    _write_csv(summary_path,
               ["snr_db", "method", "armse_range_m", "armse_velocity_mps",
                "crlb_rmse_range_m_ca", "crlb_rmse_velocity_mps_ca",
                "theo_rmse_range_m_low", "theo_rmse_range_m_high",
                "theo_rmse_velocity_mps_low", "theo_rmse_velocity_mps_high",
                "improvement_range_vs_data", "improvement_velocity_vs_data"], summary_rows)
    _append_log(out_dir, f"simulate: {len(tasks)} trials in {time.perf_counter() - t_start:.2f} s")
    return results_path, summary_path


def _reference_columns(scenario: Scenario, snr_db: float, theta0: float):
    """CRLB and theoretical-RMSE reference values at one grid SNR."""
    if np.isinf(snr_db):
        return [0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    chi_low = 10.0 ** (snr_db / 10.0)
    chi_high = 10.0 ** ((snr_db + scenario.hf_snr_offset_db) / 10.0)
    f_low = fim_band(scenario.cfg_low, scenario.array, chi_low)
    f_high = fim_band(scenario.cfg_high, scenario.array, chi_high)
    ca = crlb_ca(f_low, f_high, theta0)
    theo_r_low, theo_v_low = theoretical_rmse(
        scenario.cfg_low.bandwidth_hz, chi_low, scenario.cfg_low.num_symbols,
        scenario.cfg_low.carrier_freq_hz, scenario.cfg_low.symbol_duration_s)
    theo_r_high, theo_v_high = theoretical_rmse(
        scenario.cfg_high.bandwidth_hz, chi_high, scenario.cfg_high.num_symbols,
        scenario.cfg_high.carrier_freq_hz, scenario.cfg_high.symbol_duration_s)
    return [np.sqrt(ca.crlb_range_m2), np.sqrt(ca.crlb_velocity_mps2),
            theo_r_low, theo_r_high, theo_v_low, theo_v_high]


def run_mi_sweep(scenario: Scenario, out_dir, draws: int | None = None):
    """Mutual information over the SNR grid for each UE antenna count.

    Channel draws are nested over the UE antenna counts: smaller counts use
    column subsets of the same realization, so the antenna ordering holds per
    draw. Bands must share the subcarrier count, and the symbol scale uses the
    smaller of the two symbol counts: the aggregated closed form is only valid
    for equal per-band shapes.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    t_start = time.perf_counter()
    low, high = scenario.cfg_low, scenario.cfg_high
    if low.num_subcarriers != high.num_subcarriers:
        raise InvalidConfigError("MI aggregation assumes equal subcarrier counts per band")
    n = low.num_subcarriers
    m_shared = min(low.num_symbols, high.num_symbols)
    n_ue_list = sorted(scenario.comm_n_ue_list)
    n_ue_max = n_ue_list[-1]
    draws = scenario.comm_channel_draws if draws is None else draws

    grams = {k: {"low": [], "high": [], "ca": []} for k in n_ue_list}
    for draw in range(draws):
        per_band_gram = {}
        for band, cfg in (("low", low), ("high", high)):
            band_idx = 1 if band == "low" else 2
            frame = generate_comm_frame(
                cfg, scenario.array.num_tx, scenario.comm_num_users,
                rng_seed=seeds.child_seed(scenario.master_seed, seeds.STAGE_COMM_FRAME,
                                          draw, band_idx))
            cov = _check_covariance(_broadcast_cov(
                default_input_covariance(frame, scenario.comm_total_power), n))
            chan = comm_channel(
                scenario.comm_num_paths, scenario.array.num_tx, n_ue_max,
                rng_seed=seeds.child_seed(scenario.master_seed, seeds.STAGE_COMM_CHANNEL,
                                          draw, band_idx))
            h_full = freq_response_all(chan, n)
            per_band_gram[band] = {k: _gram(h_full[:, :, :k], cov) for k in n_ue_list}
        for k in n_ue_list:
            g_low = per_band_gram["low"][k]
            g_high = per_band_gram["high"][k]
            grams[k]["low"].append(g_low)
            grams[k]["high"].append(g_high)
            grams[k]["ca"].append(g_low + g_high)

    rows = []
    for snr in scenario.snr_grid_db:
        if not np.isfinite(snr):
            continue  # noiseless points have no finite MI
        sigma2 = 10.0 ** (-snr / 10.0) * scenario.comm_total_power
        for k in n_ue_list:
            mi = {}
            for tag in ("low", "high", "ca"):
                mi[tag] = float(np.mean([
                    _mi_bits_from_gram(g, sigma2, m_shared) for g in grams[k][tag]]))
            rows.append([snr, k, mi["low"], mi["high"], mi["ca"],
                         mi["ca"] / (n * m_shared)])
    path = out_dir / "mi.csv"
    _write_csv(path, ["snr_db", "n_ue", "mi_single_low", "mi_single_high",
                      "mi_ca", "mi_ca_per_re"], rows)
    _append_log(out_dir, f"mi: {draws} draws in {time.perf_counter() - t_start:.2f} s")
    return path


def run_crlb_sweep(scenario: Scenario, out_dir):
    """Closed-form CRLB curves per band and aggregated, over the SNR grid."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    theta0 = scenario.targets[0].angle_rad if scenario.targets else 0.0
    rows = []
    for snr in scenario.snr_grid_db:
        if not np.isfinite(snr):
            continue  # bounds vanish without noise
        chi = 10.0 ** (snr / 10.0)
        f_low = fim_band(scenario.cfg_low, scenario.array, chi)
        f_high = fim_band(scenario.cfg_high, scenario.array, chi)
        for tag, report in (
                ("low", crlb_single(f_low, theta0, "low")),
                ("high", crlb_single(f_high, theta0, "high")),
                ("ca", crlb_ca(f_low, f_high, theta0))):
            rows.append([snr, tag, report.crlb_range_m2, report.crlb_velocity_mps2,
                         report.crlb_angle_rad2,
                         float(np.sqrt(report.crlb_range_m2)),
                         float(np.sqrt(report.crlb_velocity_mps2)),
                         float(np.sqrt(report.crlb_angle_rad2))])
    path = out_dir / "crlb.csv"
    _write_csv(path, ["snr_db", "band_tag", "crlb_range", "crlb_velocity", "crlb_angle",
                      "crlb_rmse_range_m", "crlb_rmse_velocity_mps", "crlb_rmse_angle_rad"],
               rows)
    return path


BANDWIDTH_SUBCARRIER_BUDGET = 2560
BANDWIDTH_WEIGHT_HIGH = 4


def bandwidth_split(n2: int) -> int:
    """Low-band subcarrier count under the shared budget N1 + 4 N2 = 2560."""
    n1 = BANDWIDTH_SUBCARRIER_BUDGET - BANDWIDTH_WEIGHT_HIGH * n2
    if n1 < 1:
        raise InvalidConfigError(f"infeasible split: n2={n2} leaves n1={n1}")
    return n1


def run_bandwidth_sweep(scenario: Scenario, out_dir, snr_db: float = -20.0,
                        n2_values=None):
    """Aggregated CRLBs against the high band's subcarrier count under the budget.

    CP durations are held fixed while the subcarrier counts trade off, so the
    carrier-duration products stay aligned across the sweep.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if n2_values is None:
        n2_values = range(8, 637, 4)
    theta0 = scenario.targets[0].angle_rad if scenario.targets else 0.0
    chi = 10.0 ** (snr_db / 10.0)
    low0, high0 = scenario.cfg_low, scenario.cfg_high
    rows = []
    for n2 in n2_values:
        n1 = bandwidth_split(int(n2))
        # keep the CP *durations*: samples rescale with the subcarrier count
        low = replace(low0, num_subcarriers=n1,
                      cp_length_samples=low0.cp_length_samples * n1 / low0.num_subcarriers)
        high = replace(high0, num_subcarriers=int(n2),
                       cp_length_samples=high0.cp_length_samples * n2 / high0.num_subcarriers)
        report = crlb_ca(fim_band(low, scenario.array, chi),
                         fim_band(high, scenario.array, chi), theta0)
        rows.append([int(n2), n1, report.crlb_range_m2, report.crlb_velocity_mps2,
                     float(np.sqrt(report.crlb_range_m2)),
                     float(np.sqrt(report.crlb_velocity_mps2))])
    path = out_dir / "bandwidth.csv"
    _write_csv(path, ["n2", "n1", "crlb_range_m2_ca", "crlb_velocity_mps2_ca",
                      "crlb_rmse_range_m_ca", "crlb_rmse_velocity_mps_ca"], rows)
    return path


def _append_log(out_dir: Path, message: str) -> None:
    # wall-clock timing stays out of the deterministic CSVs
    with open(out_dir / "run_log.txt", "a", encoding="utf-8") as fh:
        fh.write(message + "\n")
