"""Elliptical mixture models on the SPD manifold.

Estimation by three routes (reformulated manifold CG, direct manifold CG,
fixed-point reweighting), robustness analysis through influence functions,
and seedable synthetic data generators for benchmarking.
"""

__version__ = "0.1.0"

from .datagen import (SyntheticSpec, add_uniform_noise, hennig_1d, make_flower,
                      make_synthetic, read_csv, replace_with_cauchy, write_csv)
from .elliptical import EllipticalComponent, SingularScatterError
from .generators import FAMILY_NAMES, GENERATORS, DensityGenerator, get_generator
from .geometry import (ProductPoint, ProductTangent, mean_metric_coefficient,
                       reformulation_metric_residual, spd_egrad_to_rgrad,
                       spd_exp, spd_inner, spd_retract, spd_transport)
from .mixture import (Dataset, DecompositionError, MixtureParams,
                      Regularization, ReformulatedParams, decompose,
                      fixed_point_residuals, from_original, nll,
                      params_from_json, params_to_json, reformulate,
                      reformulated_cost, reformulated_gradients,
                      original_gradients, responsibilities, to_original)
from .robustness import (InfluenceResult, classify_boundedness, empirical_if,
                         if_constants, if_curve, richardson,
                         sphere_moment_checks, theoretical_if)
from .solvers import (SOLVERS, FitOptions, FitReport, benchmark,
                      expand_family_spec, fit_ira, fit_our, fit_rmo,
                      initialize, mean_shift)

__all__ = [name for name in dir() if not name.startswith("_")]
