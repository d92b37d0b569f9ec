"""Lp spectral regions of the Laplacian on conformally compact model collars."""

from .errors import (
    BudgetExceededError,
    ConfigError,
    ConvergenceError,
    CouplingError,
    DegenerateRegionError,
    EmptyPreimageError,
    IntegratorOverflowError,
    LpSpecError,
    NotInRegionError,
    QuadratureRangeError,
)
from .geometry import BoundaryProfile, ModelMetric, apply_laplacian_monomial, apply_laplacian_product
from .quasimode import (
    BumpB,
    CutoffPhi,
    Quasimode,
    QuasimodeSpec,
    find_bump_ball,
    lp_norm,
    make_quasimode,
    residual,
    spectral_sample,
    verify_quasimode,
)
from .regions import (
    Parabola,
    RegionUnion,
    SpectralParams,
    conjugate_exponent,
    envelope_slope,
    invert_parametrization,
    l1_contained_parabola,
    l1_containing_parabola,
    lp_contained_region,
    lp_containing_parabola,
    membership,
    parametrize_spectrum_set,
    resolvent_region,
)
from .volume import ball_volume, sturm_liouville_compare, volume_growth_rate

__version__ = "0.1.0"
