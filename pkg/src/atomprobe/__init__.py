"""Quantum scattering of slow atoms on structured light sheets.

Absorption and detection probabilities for piecewise-constant laser
profiles, in both the adiabatic complex-potential picture and the full
two-channel one; gradient-based profile optimization; wavepacket
detection statistics.  Internal units: hbar = 1, lengths in um, times
in us.  Public constructors accept cm/s, 1/s, and um.
"""
from .errors import (ConfigError, ConvergenceError, DefectiveSegmentError,
                     IllConditionedError, NumericalError, OptimizationError)
from .units import (AtomSpecies, cesium_default, kinetic_energy,
                    rate_internal_to_per_s, rate_per_s_to_internal,
                    recoil_velocity, species_from_si,
                    velocity_to_wavenumber, wavenumber_to_velocity)
from .potential import (ComplexPotentialProfile, LaserProfile, Segment,
                        laser_from_potential, potential_from_laser,
                        profile_from_potential, profile_to_potential,
                        profile_weak_driving, segments_from_dicts,
                        segments_to_dicts, weak_driving_ratio)
from .scatter import (GradientRecord, ScatteringAmplitudes,
                      absorption_gradient, one_channel_wavefunction,
                      solve_one_channel, solve_one_channel_batch,
                      transfer_matrix_segment)
from .oracles import oracle_one_channel, oracle_two_channel
from .twochannel import (ChannelComparison, TwoChannelAmplitudes,
                         compare_channels, solve_two_channel,
                         solve_two_channel_batch, two_channel_wavefunction)
from .objective import (KGrid, OptimizationProblem, OptimizationResult,
                        ParameterBounds, embed_profile, grid_from_velocities,
                        objective_gradient, objective_value, optimize,
                        uniform_velocity_grid)
from .wavepacket import (DetectionRecord, WavepacketSpec, propagate,
                         stationary_detection_average)
from .config import (RunConfig, config_to_dict, dumps_config, load_config,
                     loads_config)

__all__ = [
    "AtomSpecies", "cesium_default", "species_from_si", "kinetic_energy",
    "recoil_velocity", "velocity_to_wavenumber", "wavenumber_to_velocity",
    "rate_internal_to_per_s", "rate_per_s_to_internal",
    "Segment", "LaserProfile", "ComplexPotentialProfile",
    "potential_from_laser", "laser_from_potential", "profile_to_potential",
    "profile_from_potential", "weak_driving_ratio", "profile_weak_driving",
    "segments_to_dicts", "segments_from_dicts",
    "ScatteringAmplitudes", "GradientRecord", "transfer_matrix_segment",
    "solve_one_channel", "solve_one_channel_batch", "absorption_gradient",
    "one_channel_wavefunction",
    "oracle_one_channel", "oracle_two_channel",
    "TwoChannelAmplitudes", "ChannelComparison", "solve_two_channel",
    "solve_two_channel_batch", "compare_channels", "two_channel_wavefunction",
    "KGrid", "uniform_velocity_grid", "grid_from_velocities",
    "ParameterBounds", "OptimizationProblem", "OptimizationResult",
    "objective_value", "objective_gradient", "optimize", "embed_profile",
    "WavepacketSpec", "DetectionRecord", "propagate",
    "stationary_detection_average",
    "RunConfig", "load_config", "loads_config", "dumps_config",
    "config_to_dict",
    "ConfigError", "NumericalError", "IllConditionedError",
    "ConvergenceError", "DefectiveSegmentError", "OptimizationError",
]
__version__ = "0.1.0"
