"""opquery: recovery of linear operators from forward queries, with
computable error certificates.

Layout:
  linalg  dense kernels (QR, Jacobi SVD, power-iteration norms, angles, rank)
  sketch  ambiguity bounds and extremal witnesses for sketched recovery
  pde     grids, sine eigenbases, advection-diffusion operators, Green's kernels
  study   forward-query studies: error curves, certificates, rates, sweeps
  cli     command-line drivers writing CSV/JSON artifacts
"""

from .errors import ArtifactError
from .linalg import Rng, Seed, SVDTriple, as_matrix, numerical_rank, principal_angles, qr_factor, spectral_norm, svd
from .pde import (
    Coefficients,
    DiscreteOperator,
    EigenBasis,
    GreensSample,
    Grid,
    assemble_1d,
    assemble_2d,
    greens_exact_convdiff,
    greens_exact_grid,
    greens_kernel_from_responses,
    sine_basis_1d,
    sine_basis_2d,
    solve,
)
from .sketch import (
    BoundReport,
    MembershipReport,
    SketchInstance,
    align_rotation,
    construct_extremal_pair,
    diameter_lower_bound,
    diameter_upper_bound,
    membership_check,
    near_symmetry_delta,
    random_instance,
    toeplitz_from_two_queries,
    toeplitz_matrix,
)
from .study import (
    CertificateReport,
    ConvergenceTable,
    ResponseMatrix,
    SweepTable,
    bound_certificate,
    build_table,
    error_curve,
    greens_error_study,
    greens_kernel_sample,
    lastar_curve,
    perturbation_sweep,
    pseudo_inverse_reference,
    query_forward,
    rate_fit,
    sweep_fit,
)

__version__ = "0.1.0"

__all__ = [
    "ArtifactError",
    "BoundReport",
    "CertificateReport",
    "Coefficients",
    "ConvergenceTable",
    "DiscreteOperator",
    "EigenBasis",
    "GreensSample",
    "Grid",
    "MembershipReport",
    "ResponseMatrix",
    "Rng",
    "SVDTriple",
    "Seed",
    "SketchInstance",
    "SweepTable",
    "align_rotation",
    "as_matrix",
    "assemble_1d",
    "assemble_2d",
    "bound_certificate",
    "build_table",
    "construct_extremal_pair",
    "diameter_lower_bound",
    "diameter_upper_bound",
    "error_curve",
    "greens_error_study",
    "greens_exact_convdiff",
    "greens_exact_grid",
    "greens_kernel_from_responses",
    "greens_kernel_sample",
    "lastar_curve",
    "membership_check",
    "near_symmetry_delta",
    "numerical_rank",
    "perturbation_sweep",
    "principal_angles",
    "pseudo_inverse_reference",
    "qr_factor",
    "query_forward",
    "random_instance",
    "rate_fit",
    "sine_basis_1d",
    "sine_basis_2d",
    "solve",
    "spectral_norm",
    "svd",
    "sweep_fit",
    "toeplitz_from_two_queries",
    "toeplitz_matrix",
    "__version__",
]
