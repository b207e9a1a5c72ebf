"""fraccurv: curvature functionals of fractal parallel sets and their scaling limits."""

from .config import RunConfig, parse_config
from .curves import CurvatureCurve, GridScene, curvature_curve, eps_grid
from .errors import (
    BudgetError,
    ConfigError,
    FraccurvError,
    InvalidInputError,
    MarginError,
    OutOfRangeError,
    ResolutionError,
)
from .estimators import (
    FractalCurvatureEstimate,
    LocalLimitReport,
    cesaro_average,
    condition_ii_diagnostic,
    count_words_meeting,
    fractal_estimates,
    lattice_period_extrema,
    local_limit,
    omega_scaling_diagnostic,
    renewal_estimate,
    rescale,
    sigma_b,
    variation_bound_report,
)
from .functionals import (
    FunctionalVector,
    SignedCellMeasure,
    euler_cross_check,
    interval_functionals,
    interval_localized,
    kappa_field,
    localized_functionals,
    minkowski_functionals,
)
from .grids import BinaryGrid, DistanceGrid, brute_force_edt, distance_transform, parallel_set, write_pgm
from .ifs import IFS, LatticeClass, OpenSet, Similarity, WordSet, eta, lattice_class, similarity_dimension
from .intervals import IntervalSet, Line1DEngine, merge_intervals, parallel_intervals
from .polygons import open_set_union, signed_region_distance

__version__ = "0.1.0"
