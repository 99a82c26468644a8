"""Numerical laboratory for a fractional plasma free-boundary problem.

The package solves L^s u = lam (u - gamma)_+ on gridded domains, where
L^s is the spectral fractional Dirichlet Laplacian, realises the same
operator through a degenerate harmonic extension, and analyses the free
boundary {u = gamma} with Almgren-type frequency monitors, blow-up
classification, and Steiner symmetrization.
"""

from .config import (CheckResult, ConfigError, ExperimentConfig, RunReport,
                     load_config)
from .domains import (Domain, EigenBasis, build_domain, eigendecompose,
                      l2_norm, laplacian_matrix)
from .extension import (ExtensionField, TraceReport, UySignReport, YMesh,
                        build_ymesh, check_uy_sign, dtn,
                        extension_energy_constant, extend_fd,
                        extend_semianalytic, hopf_ratio, mode_profile,
                        mode_profile_derivative, smallest_eigenvalue,
                        trace_coupling_constant, trace_norms, weighted_energy)
from .freeboundary import (BlowupField, Census, Classification, FreeBoundary,
                           FreeBoundaryPoint, FrequencyProfile, InclusionReport,
                           StripReport, blowup, check_boundary_inclusion,
                           check_subharmonic_strip, classify_point,
                           extract_free_boundary, frequency_profile,
                           singular_census)
from .halfball import HalfBallQuadrature
from .plasma import (PlasmaSolution, SolverError, SolverOptions,
                     constraint_mass, minimize_energy, plasma_rhs,
                     residual_norm, solve_constrained, solve_fixed_lambda,
                     steiner_symmetrize, symmetric_decreasing_rearrangement)
from .spectral import (SpectralField, apply_fractional, fractional_energy,
                       invert_fractional, project)

__version__ = "0.1.0"

__all__ = [
    "CheckResult", "ConfigError", "ExperimentConfig", "RunReport",
    "load_config",
    "Domain", "EigenBasis", "build_domain", "eigendecompose", "l2_norm",
    "laplacian_matrix",
    "ExtensionField", "TraceReport", "UySignReport", "YMesh", "build_ymesh",
    "check_uy_sign", "dtn", "extension_energy_constant", "extend_fd",
    "extend_semianalytic", "hopf_ratio", "mode_profile",
    "mode_profile_derivative", "smallest_eigenvalue",
    "trace_coupling_constant", "trace_norms", "weighted_energy",
    "BlowupField", "Census", "Classification", "FreeBoundary",
    "FreeBoundaryPoint", "FrequencyProfile", "InclusionReport", "StripReport",
    "blowup", "check_boundary_inclusion", "check_subharmonic_strip",
    "classify_point", "extract_free_boundary", "frequency_profile",
    "singular_census",
    "HalfBallQuadrature",
    "PlasmaSolution", "SolverError", "SolverOptions", "constraint_mass",
    "minimize_energy", "plasma_rhs", "residual_norm", "solve_constrained",
    "solve_fixed_lambda", "steiner_symmetrize",
    "symmetric_decreasing_rearrangement",
    "SpectralField", "apply_fractional", "fractional_energy",
    "invert_fractional", "project",
    "__version__",
]
