"""Biased-MZI variable optical attenuator models and CV-QKD key-rate analysis."""
__version__ = "0.1.0"

from .photonics import AttenuationCurve, attenuation, max_attenuation_deviation, solve_operating_point
from .drive import ChipModel, calibrate_chip, chip_operating_point
from .noise import PhaseNoiseConfig, calibrate_noise_to_std, simulate_phase_noise
from .security import QKDParams, holevo_bound, mutual_information, secret_key_rate
from .harness import ScenarioConfig, compare_designs, run_scenario

__all__ = [
    "AttenuationCurve",
    "ChipModel",
    "PhaseNoiseConfig",
    "QKDParams",
    "ScenarioConfig",
    "attenuation",
    "calibrate_chip",
    "calibrate_noise_to_std",
    "chip_operating_point",
    "compare_designs",
    "holevo_bound",
    "max_attenuation_deviation",
    "mutual_information",
    "run_scenario",
    "secret_key_rate",
    "simulate_phase_noise",
    "solve_operating_point",
]
