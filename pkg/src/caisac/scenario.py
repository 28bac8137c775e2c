"""Scenario files: flat key-value text with dotted section names.

Schema (all keys optional unless noted; unknown keys are errors):

    scenario.id                    string tag written into result rows
    band1.carrier_freq_hz          float, required
    band1.subcarrier_spacing_hz    float, required
    band1.num_subcarriers          int, required
    band1.num_symbols              int, required
    band1.cp_length_samples        float or 'auto' (derive from band2 CP alignment)
    band2.*                        same keys; cp_length_samples must be numeric
    array.num_tx / array.num_rx    ints, required
    array.element_spacing_m        float or 'auto' (half the high band's wavelength)
    array.element_spacing_lambda_low   float alternative: multiples of the low
                                       band's wavelength (exclusive with *_m)
    targetN.range_m / velocity_mps / angle_deg / rcs_variance   one block per
                                   target, numbered consecutively from 1
    sim.snr_grid_db                comma list of floats; 'inf' means noiseless
    sim.trials                     int >= 1
    sim.master_seed                int
    sim.methods                    comma subset of symbol,data,per-band
    sim.hf_snr_offset_db           float, received-SNR offset of the high band
    grid.range_min_m / range_max_m / range_count        floats/int or absent (defaults)
    grid.velocity_min_mps / velocity_max_mps / velocity_count
    grid.angle_min_deg / angle_max_deg / angle_step_deg
    comm.num_paths / num_users / channel_draws / total_power
    comm.n_ue_list                 comma list of ints

Targets are sorted by angle at load so estimate/truth association is by rank.
When symbol-level fusion is requested the two bands' carrier-duration products
must already agree (or band1 CP set to 'auto' so the loader aligns them).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .channel import TargetTruth
from .errors import InvalidConfigError, ScenarioError
from .fusion import SearchGrid, default_range_grid, default_velocity_grid
from .waveform import ArrayConfig, CarrierComponentConfig, align_cp, check_doppler_headroom

_METHODS = ("symbol", "data", "per-band")


@dataclass(frozen=True)
class Scenario:
    """Everything one sweep needs, loaded from a scenario file."""

    scenario_id: str
    cfg_low: CarrierComponentConfig
    cfg_high: CarrierComponentConfig
    array: ArrayConfig
    targets: tuple
    snr_grid_db: tuple
    trials: int
    master_seed: int
    methods: tuple
    hf_snr_offset_db: float
    range_grid: SearchGrid
    velocity_grid: SearchGrid
    angle_min_rad: float
    angle_max_rad: float
    angle_step_rad: float
    comm_num_paths: int = 4
    comm_num_users: int = 4
    comm_channel_draws: int = 200
    comm_total_power: float = 1.0
    comm_n_ue_list: tuple = (4, 5, 6)

    @property
    def angle_grid_rad(self) -> np.ndarray:
        count = int(math.floor((self.angle_max_rad - self.angle_min_rad)
                               / self.angle_step_rad)) + 1
        return self.angle_min_rad + self.angle_step_rad * np.arange(count)

    @property
    def num_targets(self) -> int:
        return len(self.targets)


def _parse_lines(text: str, source: str) -> dict:
    pairs = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ScenarioError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if not key or not value:
            raise ScenarioError(f"{source}:{lineno}: empty key or value")
        if key in pairs:
            raise ScenarioError(f"{source}:{lineno}: duplicate key {key!r}")
        pairs[key] = (value, lineno)
    return pairs


_REQUIRED = object()


class _KeyReader:
    def __init__(self, pairs: dict, source: str):
        self.pairs = dict(pairs)
        self.source = source

    def take(self, key: str, convert, default=_REQUIRED):
        if key in self.pairs:
            value, lineno = self.pairs.pop(key)
            try:
                return convert(value)
            except ScenarioError:
                raise
            except Exception as exc:
                raise ScenarioError(f"{self.source}:{lineno}: bad value for {key}: {exc}") from exc
        if default is _REQUIRED:
            raise ScenarioError(f"{self.source}: missing required key {key}")
        return default

    def reject_unknown(self):
        if self.pairs:
            key, (_, lineno) = next(iter(sorted(self.pairs.items(), key=lambda kv: kv[1][1])))
            raise ScenarioError(f"{self.source}:{lineno}: unknown key {key!r}")


def _float(value: str) -> float:
    return float(value)


def _int(value: str) -> int:
    f = float(value)
    if f != int(f):
        raise ValueError(f"{value} is not an integer")
    return int(f)


def _float_list(value: str) -> tuple:
    return tuple(float(v.strip()) for v in value.split(",") if v.strip())


def _int_list(value: str) -> tuple:
    return tuple(_int(v.strip()) for v in value.split(",") if v.strip())


def _methods(value: str) -> tuple:
    methods = tuple(v.strip() for v in value.split(",") if v.strip())
    for m in methods:
        if m not in _METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {_METHODS}")
    return methods


def scenario_from_text(text: str, source: str = "<string>") -> Scenario:
    reader = _KeyReader(_parse_lines(text, source), source)

    scenario_id = reader.take("scenario.id", str, "scenario")

    def band(prefix: str, index: int, cp):
        return CarrierComponentConfig(
            carrier_freq_hz=reader.take(f"{prefix}.carrier_freq_hz", _float),
            subcarrier_spacing_hz=reader.take(f"{prefix}.subcarrier_spacing_hz", _float),
            num_subcarriers=reader.take(f"{prefix}.num_subcarriers", _int),
            num_symbols=reader.take(f"{prefix}.num_symbols", _int),
            cp_length_samples=cp,
            band_index=index,
        )

    def _float_or_auto(value: str):
        return value if value == "auto" else float(value)

    cp1_raw = reader.take("band1.cp_length_samples", _float_or_auto)
    cfg_high = band("band2", 2, reader.take("band2.cp_length_samples", _float))
    cfg_low = band("band1", 1, 0.0 if cp1_raw == "auto" else cp1_raw)

    num_tx = reader.take("array.num_tx", _int)
    num_rx = reader.take("array.num_rx", _int)
    spacing = reader.take("array.element_spacing_m", str, "auto")
    spacing_ll = reader.take("array.element_spacing_lambda_low", _float, None)
    if spacing_ll is not None:
        if spacing != "auto":
            raise ScenarioError(f"{source}: give element_spacing_m or "
                                "element_spacing_lambda_low, not both")
        element_spacing = spacing_ll * cfg_low.wavelength_m
    elif spacing == "auto":
        element_spacing = 0.5 * cfg_high.wavelength_m
    else:
        element_spacing = float(spacing)
    array = ArrayConfig(num_tx=num_tx, num_rx=num_rx, element_spacing_m=element_spacing)

    targets = []
    index = 1
    while any(k.startswith(f"target{index}.") for k in reader.pairs):
        targets.append(TargetTruth(
            range_m=reader.take(f"target{index}.range_m", _float),
            velocity_mps=reader.take(f"target{index}.velocity_mps", _float),
            angle_rad=math.radians(reader.take(f"target{index}.angle_deg", _float)),
            rcs_variance=reader.take(f"target{index}.rcs_variance", _float, 1.0),
        ))
        index += 1
    targets.sort(key=lambda t: t.angle_rad)

    snr_grid = reader.take("sim.snr_grid_db", _float_list,
                           tuple(float(v) for v in range(-20, -4)))
    trials = reader.take("sim.trials", _int, 100)
    master_seed = reader.take("sim.master_seed", _int, 1)
    methods = reader.take("sim.methods", _methods, ("symbol", "data"))
    hf_offset = reader.take("sim.hf_snr_offset_db", _float, -5.0)
    if trials < 1:
        raise ScenarioError(f"{source}: sim.trials must be >= 1")

    if cp1_raw == "auto":
        cfg_low = replace(cfg_low, cp_length_samples=align_cp(cfg_low, cfg_high))

    r_min = reader.take("grid.range_min_m", _float, None)
    r_max = reader.take("grid.range_max_m", _float, None)
    r_count = reader.take("grid.range_count", _int, None)
    if r_min is None and r_max is None and r_count is None:
        range_grid = default_range_grid(cfg_low, cfg_high)
    else:
        base = default_range_grid(cfg_low, cfg_high)
        range_grid = SearchGrid(
            min_value=base.min_value if r_min is None else r_min,
            max_value=base.max_value if r_max is None else r_max,
            count=base.count if r_count is None else r_count,
        )
    v_min = reader.take("grid.velocity_min_mps", _float, None)
    v_max = reader.take("grid.velocity_max_mps", _float, None)
    v_count = reader.take("grid.velocity_count", _int, None)
    if v_min is None and v_max is None and v_count is None:
        velocity_grid = default_velocity_grid(cfg_low, cfg_high)
    else:
        base = default_velocity_grid(cfg_low, cfg_high)
        velocity_grid = SearchGrid(
            min_value=base.min_value if v_min is None else v_min,
            max_value=base.max_value if v_max is None else v_max,
            count=base.count if v_count is None else v_count,
        )
    angle_min = math.radians(reader.take("grid.angle_min_deg", _float, 1.0))
    angle_max = math.radians(reader.take("grid.angle_max_deg", _float, 89.0))
    angle_step = math.radians(reader.take("grid.angle_step_deg", _float, 0.05))

    comm_num_paths = reader.take("comm.num_paths", _int, 4)
    comm_num_users = reader.take("comm.num_users", _int, 4)
    comm_draws = reader.take("comm.channel_draws", _int, 200)
    comm_power = reader.take("comm.total_power", _float, 1.0)
    n_ue_list = reader.take("comm.n_ue_list", _int_list, (4, 5, 6))

    reader.reject_unknown()

    scenario = Scenario(
        scenario_id=scenario_id,
        cfg_low=cfg_low,
        cfg_high=cfg_high,
        array=array,
        targets=tuple(targets),
        snr_grid_db=snr_grid,
        trials=trials,
        master_seed=master_seed,
        methods=methods,
        hf_snr_offset_db=hf_offset,
        range_grid=range_grid,
        velocity_grid=velocity_grid,
        angle_min_rad=angle_min,
        angle_max_rad=angle_max,
        angle_step_rad=angle_step,
        comm_num_paths=comm_num_paths,
        comm_num_users=comm_num_users,
        comm_channel_draws=comm_draws,
        comm_total_power=comm_power,
        comm_n_ue_list=n_ue_list,
    )
    _validate(scenario, source)
    return scenario


def _validate(scenario: Scenario, source: str) -> None:
    low, high = scenario.cfg_low, scenario.cfg_high
    if "symbol" in scenario.methods:
        p1 = low.carrier_duration_product
        p2 = high.carrier_duration_product
        if abs(p1 - p2) > 1e-9 * p1:
            raise ScenarioError(
                f"{source}: symbol-level fusion needs aligned CPs: carrier-duration "
                f"products {p1:.6f} vs {p2:.6f} (set band1.cp_length_samples = auto)"
            )
    if scenario.targets:
        max_delay = max(t.delay_s for t in scenario.targets)
        for cfg in (low, high):
            if cfg.cp_duration_s < max_delay:
                raise ScenarioError(
                    f"{source}: band {cfg.band_index} CP {cfg.cp_duration_s:g} s shorter "
                    f"than the maximum round-trip delay {max_delay:g} s"
                )
            max_doppler = max(abs(t.doppler_hz(cfg.carrier_freq_hz))
                              for t in scenario.targets)
            try:
                check_doppler_headroom(cfg, max_doppler)
            except InvalidConfigError as exc:
                raise ScenarioError(f"{source}: {exc}") from exc


def load_scenario(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        return scenario_from_text(fh.read(), source=str(path))
