"""Numerical lab for Schatten-von Neumann classes of integral operators."""

from .carleman import (
    CoefficientSequence,
    carleman_coefficients,
    carleman_operator,
    divergence_table,
    exact_spectrum,
    lp_partial_sums,
    partial_sup_norms,
    rudin_shapiro,
    sup_norm_estimate,
)
from .conditions import (
    MembershipReport,
    RussoReport,
    predict_decay,
    predict_r_main,
    predict_r_mixed,
    russo_bound,
    verify_membership,
)
from .errors import (
    BasisMismatchError,
    DegenerateSpectrumError,
    InputError,
    ParameterError,
    SchattenLabError,
)
from .kernels import (
    DiscretizedKernel,
    Grid,
    build_convolution_kernel,
    build_lattice_kernel,
    build_riesz_kernel,
    build_torus_kernel,
    interval_grid,
    kernel_from_text,
    kernel_to_text,
    lattice_grid,
    mixed_norm,
    sample_kernel,
    torus_grid,
)
from .multipliers import (
    CountingFit,
    DiagonalSymbol,
    apply_symbol,
    discretize_anharmonic,
    discretize_higher_anharmonic,
    fit_counting,
    lattice_weight_symbol,
    torus_bessel_symbol,
)
from .spectral import (
    CheckReport,
    SingularSpectrum,
    TailFit,
    fan_check,
    fit_tail_exponent,
    product_norm_check,
    schatten_norm,
    singular_values,
    weyl_check,
)
from .traces import TraceReport, averaged_trace, diagonal_trace, dyadic_average, eigen_trace

__version__ = "0.1.0"
