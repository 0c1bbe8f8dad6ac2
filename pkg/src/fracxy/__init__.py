"""Lattice toolkit for the generalized n-well XY model.

Builds lattice domains, evaluates the truncated multi-well bond energies,
detects fractional vortices and string defects, computes flat norms of
vorticity measures via minimal connections, and relaxes phase fields to
estimate core and renormalized energies.
"""

from .lattice import (
    Disk,
    DomainError,
    LatticeDomain,
    Rectangle,
    build_domain,
    cell_triangles,
    shape_from_dict,
)
from .potentials import PotentialSpec, eval_base, eval_fn_eps, subgradient_fn_eps
from .fields import (
    InterpolatedField,
    ScalarField,
    SpinField,
    StringSet,
    dirichlet_energy,
    exp_map,
    extract_strings,
    interpolate_affine,
    interpolate_u_hat,
    jump_pairs,
)
from .energy import EnergyBreakdown, energy_fn_eps, energy_sym, energy_xy, gradient_fn_eps
from .topology import (
    VorticityMeasure,
    cell_vorticity,
    cell_vorticities,
    elastic_diff,
    flat_distance,
    flat_norm,
    flat_norm_lp_oracle,
    project_P,
    stokes_check,
    vorticity_measure,
)
from .solvers import (
    GammaEstimate,
    RelaxationConfig,
    RelaxResult,
    VortexPrescription,
    construct_field,
    core_energy_frac,
    core_energy_sym,
    gamma_extrapolate,
    relax,
    renormalized_energy_estimate,
)
from .experiments import ExperimentConfig, load_config, run_experiment

__all__ = [
    "Disk",
    "DomainError",
    "EnergyBreakdown",
    "ExperimentConfig",
    "GammaEstimate",
    "InterpolatedField",
    "LatticeDomain",
    "PotentialSpec",
    "Rectangle",
    "RelaxResult",
    "RelaxationConfig",
    "ScalarField",
    "SpinField",
    "StringSet",
    "VortexPrescription",
    "VorticityMeasure",
    "build_domain",
    "cell_triangles",
    "cell_vorticities",
    "cell_vorticity",
    "construct_field",
    "core_energy_frac",
    "core_energy_sym",
    "dirichlet_energy",
    "elastic_diff",
    "energy_fn_eps",
    "energy_sym",
    "energy_xy",
    "eval_base",
    "eval_fn_eps",
    "exp_map",
    "extract_strings",
    "flat_distance",
    "flat_norm",
    "flat_norm_lp_oracle",
    "gamma_extrapolate",
    "gradient_fn_eps",
    "interpolate_affine",
    "interpolate_u_hat",
    "jump_pairs",
    "load_config",
    "project_P",
    "relax",
    "renormalized_energy_estimate",
    "run_experiment",
    "shape_from_dict",
    "stokes_check",
    "subgradient_fn_eps",
    "vorticity_measure",
]

__version__ = "0.1.0"
