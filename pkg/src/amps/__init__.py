"""Simulation and voltage-asymmetry optimisation for asymmetric modular pulse synthesizers."""

from .core import (
    AmpsError,
    ContractError,
    InfeasibleError,
    LevelSet,
    SampledWaveform,
    StateTrajectory,
    StateVector,
    UnsupportedConfigurationError,
    VoltageArray,
    enumerate_levels,
    output_voltage,
)
from .metrics import Spectrum, band_energy_ratio, spectrum, total_distortion
from .modulation import NlmConfig, PscPwmConfig, TieBreak, nlm_modulate, psc_pwm_modulate
from .optimizer import OptimizationProblem, OptimizationResult, geometric_array, objective, optimize
from .waveforms import WaveformKind, biphasic, gaussian_polyphasic, make_reference, monophasic

__version__ = "0.1.0"
