"""Equidistribution experiments for Laplacian eigenfunctions on the flat torus."""

from torusqe.errors import (
    BudgetError,
    ConfigError,
    DegenerateFitError,
    DomainError,
    EmptyWindowError,
    ToleranceError,
)
from torusqe.lattice import (
    Shell,
    SpectralWindow,
    enumerate_shell,
    shells_in_window,
    weyl_count,
    window_from_lambda,
)
from torusqe.symbols import TrigPoly, SymbolFamily, ball_indicator_coeffs, rescaled_bump
from torusqe.eigenbasis import (
    Eigenfunction,
    ShellBasis,
    avg_operator_element,
    ball_mass,
    cosine_paired_basis,
    haar_random_basis,
    l4_norm_4,
    l4_norms,
    make_basis,
    matrix_element,
    standard_basis,
)
from torusqe.variance import (
    birkhoff_variance_mc,
    birkhoff_variance_modes,
    density_subsequence,
    fit_decay,
    mode_integral,
    quantum_variance,
    small_ball_report,
    theorem2_bound_report,
)

__version__ = "0.1.0"
