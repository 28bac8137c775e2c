"""caisac: two-band carrier-aggregated MIMO-OFDM ISAC link simulator.

Deterministic, seedable numerics for a base station that senses targets and
serves users on a low and a high frequency band at once: waveform numerology
with CP alignment, sensing and communication channels, the two-stage coherent
sensing fusion pipeline, closed-form mutual information and Cramer-Rao bounds,
and a Monte Carlo harness with CSV and plot emission.
"""

from .constants import SPEED_OF_LIGHT
from .errors import (
    BandsNotAlignedError,
    CaIsacError,
    CpTooShortError,
    DegenerateFrameError,
    DegenerateGeometryError,
    DimensionMismatchError,
    InconsistentConfigError,
    InsufficientPeaksError,
    InvalidConfigError,
    InvalidInputError,
    OverloadedSpatialLayersError,
    PairingError,
    PipelineStageError,
    PlotError,
    ScenarioError,
    UnsupportedNumerologyError,
)
from .waveform import (
    ArrayConfig,
    BandPairRatio,
    CarrierComponentConfig,
    CommFrame,
    SensingFrame,
    align_cp,
    aligned_low_band,
    band_ratio,
    check_doppler_headroom,
    derive_timing,
    generate_comm_frame,
    generate_sensing_frame,
    to_time_domain,
)
from .channel import (
    CommChannelRealization,
    EchoCube,
    TargetTruth,
    attenuation,
    attenuation_scale,
    comm_channel,
    freq_response,
    freq_response_all,
    sensing_channel,
    simulate_echo,
    steering,
)
from .comm_mi import MiReport, default_input_covariance, mi_ca, mi_single_band, simulate_comm_rx
from .preproc import (
    AoAEstimate,
    ChannelEstimateCube,
    FeatureVectorPair,
    TargetDelayDopplerGrid,
    ccc_delay_feature,
    ccc_doppler_feature,
    delay_weights,
    doppler_weights,
    estimate_aoa,
    extract_features,
    make_angle_grid,
    remove_tx_data,
    spatial_filter,
)
from .fusion import (
    EstimateSet,
    FusedDelayVector,
    FusionWeights,
    SearchGrid,
    data_level_fuse,
    data_level_pipeline,
    default_range_grid,
    default_velocity_grid,
    fuse_delay,
    fuse_doppler,
    mrc_weights,
    range_search,
    recover_missing,
    symbol_level_pipeline,
    velocity_search,
)
from .metrics import (
    ArmseReport,
    CrlbReport,
    FisherInfo3,
    armse,
    crlb_band,
    crlb_ca,
    crlb_single,
    fim_band,
    fim_numeric_oracle,
    theoretical_rmse,
)
from .scenario import Scenario, load_scenario, scenario_from_text

__version__ = "0.1.0"
