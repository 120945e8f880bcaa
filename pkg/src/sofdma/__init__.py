"""Simulator and planning toolkit for asynchronous massive access over sparse OFDMA."""

from .channel import (ChannelRealization, FrameTruth, Observation, Waveform, draw_channel,
                      draw_delay, observe, outage_probability, synth_frequency, synth_subframe2)
from .codebook import (PRF_VERSION, Codebook, DeviceCodeword, assign_subcarriers,
                       decode_subframe0, encode_subframe0, encode_subframe1, encode_subframe2)
from .delay import (DelayEstimate, DelaySearchState, correlate, crude_estimate, estimate_delay,
                    refine_estimate)
from .detector import (SubcarrierVerdict, classify, decode_candidate, detect_zeroton,
                       estimate_phase, verify_singleton)
from .harness import (ConfigError, ExperimentConfig, TrialRecord, load_config, parse_config,
                      run_grouping_experiment, run_sweep, run_trial)
from .params import (GroupingPlan, SystemParams, check_eta_admissible, codelength,
                     derive_simulation_params, derive_theorem_params, plan_grouping)
from .sic import DecodeReport, cancel, estimate_amplitude, ideal_oracle_peel, peel

__version__ = "0.1.0"
