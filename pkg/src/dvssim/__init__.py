"""Single-pixel DVS event camera simulator.

Circuit-derived photoreceptor/buffer dynamics, physically scaled
shot-noise synthesis, and a first-passage-time stochastic event
generator that keeps noise-event statistics accurate at simulation
timesteps up to ~1000x longer than naive threshold checking.
"""

from .circuit import (
    BiasPoint,
    NoiseModel,
    OperatingPoint,
    PixelParams,
    build_noise_model,
    compute_operating_point,
    eval_noise_psd,
    eval_tf,
    reduce_to_ou,
)
from .errors import ConfigError, FitConvergenceError, ParameterError
from .events import ComparatorState, EventRecord, check_fpt, check_naive
from .filters import FilterState
from .fitting import MeasuredPsd, fit_psd_params
from .fpt import (
    BridgeQuery,
    OuParams,
    crossing_probability,
    oracle_fine_step,
    sample_crossing_time,
)
from .noise import NoiseSynth, welch_psd
from .pixel import PixelSimState, simulate_waveform, step_signal

__version__ = "0.1.0"

__all__ = [
    "BiasPoint",
    "BridgeQuery",
    "ComparatorState",
    "ConfigError",
    "EventRecord",
    "FilterState",
    "FitConvergenceError",
    "MeasuredPsd",
    "NoiseModel",
    "NoiseSynth",
    "OperatingPoint",
    "OuParams",
    "ParameterError",
    "PixelParams",
    "PixelSimState",
    "build_noise_model",
    "check_fpt",
    "check_naive",
    "compute_operating_point",
    "crossing_probability",
    "eval_noise_psd",
    "eval_tf",
    "fit_psd_params",
    "oracle_fine_step",
    "reduce_to_ou",
    "sample_crossing_time",
    "simulate_waveform",
    "step_signal",
    "welch_psd",
]
