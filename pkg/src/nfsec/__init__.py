"""Secrecy beamforming and artificial noise for near-field fluid antennas."""

from .bcd import (AuxiliaryState, BcdOptions, BcdResult, CurvatureSystem,
                  balance_streams, bcd_optimize, build_curvature,
                  solve_primal, surrogate_value, waterfill)
from .config import ExperimentConfig, Variant, load_config
from .errors import (ConfigurationError, NfsecError, NumericalError,
                     TrialFailureError)
from .geometry import (ChannelPair, ReceiverGeometry, ScenarioGeometry,
                       channel_matrix, channel_pair, rayleigh_distance,
                       whiten)
from .hybrid import HybridRealization, embed_an, fit_hybrid, normalize_power
from .metrics import (BeamformerState, decompose_rate_terms,
                      field_power_maps, rate_bob, rate_eve, secrecy_rate)
from .ports import (SelectionOptions, SelectionResult, select_ports,
                    selection_matrix, uniform_support)

__version__ = "0.1.0"

__all__ = [
    "AuxiliaryState", "BcdOptions", "BcdResult", "BeamformerState",
    "ChannelPair", "ConfigurationError", "CurvatureSystem",
    "ExperimentConfig", "HybridRealization", "NfsecError", "NumericalError",
    "ReceiverGeometry", "ScenarioGeometry", "SelectionOptions",
    "SelectionResult", "TrialFailureError", "Variant", "balance_streams",
    "bcd_optimize", "build_curvature", "channel_matrix", "channel_pair",
    "decompose_rate_terms", "embed_an", "field_power_maps", "fit_hybrid",
    "load_config", "normalize_power", "rate_bob", "rate_eve",
    "rayleigh_distance", "secrecy_rate", "select_ports", "selection_matrix",
    "solve_primal", "surrogate_value", "uniform_support", "waterfill",
    "whiten",
]
