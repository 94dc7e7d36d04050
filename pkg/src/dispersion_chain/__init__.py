"""Dispersion-chain kinetics on phase-space grids."""

from .analytic import (
    DeltaState,
    cold_state,
    gaussian_field,
    laguerre,
    oscillator_grid,
    quantum_pressure_check,
    rank3_oscillator_state,
    rotate_phase_point,
    wigner_oscillator,
)
from .closures import Closure, PhysicalParams, moyal_closure
from .config import RunConfig, parse_config
from .conservation import (
    divergence_identity_check,
    energy_law_residual,
    energy_residual_first,
    energy_residual_second,
    implied_top_mean,
    mixed_covariance,
    moment_law_residual,
    momentum_residual_first,
    momentum_residual_second,
    rank3_motion_residual,
    theorem5_check,
)
from .core import (
    AxisGrid,
    DistributionField,
    KinematicIndexSet,
    MeanField,
    make_grid,
    marginalize,
    mean_kinematic,
    nested_average,
)
from .dumpio import read_grid_dump, write_grid_dump
from .errors import (
    ChainError,
    ConfigurationError,
    DomainError,
    DumpFormatError,
    StepSizeError,
    UndefinedEntropyError,
)
from .h_entropy import HReport, RegionDecomposition, h_function, h_theorem_residual, negative_region, track_f0_minus
from .moments import MomentTensorField, central_moment2, central_moment3, raw_moment
from .operators import (
    DissipationField,
    EntropyField,
    apply_pi,
    chain_dissipation,
    chain_log_residual,
    chain_velocities,
    dissipation_source,
    entropy_field,
)
from .reports import ResidualReport
from .runner import run
from .transport import (
    evolve,
    step_rank1,
    step_rank2_first_group,
    step_rank2_second_group,
    step_rank3_first_group,
)

__all__ = [
    "apply_pi",
    "AxisGrid",
    "central_moment2",
    "central_moment3",
    "chain_dissipation",
    "chain_log_residual",
    "chain_velocities",
    "ChainError",
    "Closure",
    "cold_state",
    "ConfigurationError",
    "DeltaState",
    "dissipation_source",
    "DissipationField",
    "DistributionField",
    "divergence_identity_check",
    "DomainError",
    "DumpFormatError",
    "energy_law_residual",
    "energy_residual_first",
    "energy_residual_second",
    "entropy_field",
    "EntropyField",
    "evolve",
    "gaussian_field",
    "h_function",
    "h_theorem_residual",
    "HReport",
    "implied_top_mean",
    "KinematicIndexSet",
    "laguerre",
    "make_grid",
    "marginalize",
    "mean_kinematic",
    "MeanField",
    "mixed_covariance",
    "moment_law_residual",
    "MomentTensorField",
    "momentum_residual_first",
    "momentum_residual_second",
    "moyal_closure",
    "negative_region",
    "nested_average",
    "oscillator_grid",
    "parse_config",
    "PhysicalParams",
    "quantum_pressure_check",
    "rank3_motion_residual",
    "rank3_oscillator_state",
    "raw_moment",
    "read_grid_dump",
    "RegionDecomposition",
    "ResidualReport",
    "rotate_phase_point",
    "run",
    "RunConfig",
    "step_rank1",
    "step_rank2_first_group",
    "step_rank2_second_group",
    "step_rank3_first_group",
    "StepSizeError",
    "theorem5_check",
    "track_f0_minus",
    "UndefinedEntropyError",
    "wigner_oscillator",
    "write_grid_dump",
]

__version__ = "0.1.0"
