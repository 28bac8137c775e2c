"""Shared fixtures: reference numerologies and the bundled scenarios."""

from pathlib import Path

import numpy as np
import pytest

from caisac import ArrayConfig, CarrierComponentConfig
from caisac.scenario import load_scenario

REPO_ROOT = Path(__file__).resolve().parents[1]
SCENARIO_DIR = REPO_ROOT / "scenarios"


@pytest.fixture(scope="session")
def table2_low():
    return CarrierComponentConfig(
        carrier_freq_hz=3.5e9, subcarrier_spacing_hz=30e3,
        num_subcarriers=512, num_symbols=14,
        cp_length_samples=162.304, band_index=1)


@pytest.fixture(scope="session")
def table2_high():
    return CarrierComponentConfig(
        carrier_freq_hz=28e9, subcarrier_spacing_hz=240e3,
        num_subcarriers=512, num_symbols=28,
        cp_length_samples=162.304, band_index=2)


@pytest.fixture(scope="session")
def table2_array():
    return ArrayConfig.half_wavelength(num_tx=128, num_rx=128,
                                       highest_carrier_freq_hz=28e9)


@pytest.fixture(scope="session")
def desk_scenario():
    return load_scenario(SCENARIO_DIR / "desk.scenario")


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
