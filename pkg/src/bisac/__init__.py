"""Link-level simulator for bistatic OFDM integrated sensing and communication."""

from .channel import (
    NoiseConfig,
    PathParams,
    Scenario,
    ScenarioConfig,
    apply_channel_and_noise,
    build_cfr,
    sample_scenario,
    steering_doppler,
    steering_range,
)
from .constants import SPEED_OF_LIGHT
from .fec import LdpcCode, decode_bp, decode_bp_batch, default_code, encode
from .harness import SweepConfig, SweepRecord, run_sweep, write_results
from .modem import constellation, demodulate_llr, map_to_grid, demap_from_grid, modulate
from .pipeline import build_tx_frame, comm_equalize, run_frame, sensing_equalize
from .planner import (
    FramePlan,
    Numerology,
    PlannerError,
    REMap,
    SensingRequirements,
    build_re_map,
    compute_burst,
    compute_spacings,
    spectral_efficiency,
)
from .radar import CfarConfig, Periodogram, ca_cfar, match_detections, periodogram, target_snr

__version__ = "0.1.0"

__all__ = [
    "SPEED_OF_LIGHT",
    "CfarConfig",
    "FramePlan",
    "LdpcCode",
    "NoiseConfig",
    "Numerology",
    "PathParams",
    "Periodogram",
    "PlannerError",
    "REMap",
    "Scenario",
    "ScenarioConfig",
    "SensingRequirements",
    "SweepConfig",
    "SweepRecord",
    "apply_channel_and_noise",
    "build_cfr",
    "build_re_map",
    "build_tx_frame",
    "ca_cfar",
    "comm_equalize",
    "compute_burst",
    "compute_spacings",
    "constellation",
    "decode_bp",
    "decode_bp_batch",
    "default_code",
    "demap_from_grid",
    "demodulate_llr",
    "encode",
    "map_to_grid",
    "match_detections",
    "modulate",
    "periodogram",
    "run_frame",
    "run_sweep",
    "sample_scenario",
    "sensing_equalize",
    "spectral_efficiency",
    "steering_doppler",
    "steering_range",
    "target_snr",
    "write_results",
]
