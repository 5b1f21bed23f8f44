"""Normalized maximum weighted likelihood: evidence in bits for many comparisons."""

from .complexity import (ComplexityCache, ComplexityResult, Mode, append_complexity,
                         asymptotic_complexity_normal, check_equal_weight_conditions,
                         log_complexity, nmwl_log_density, parametric_complexity_approx,
                         parametric_complexity_exact, profile_log_wlik)
from .errors import *  # noqa: F401,F403
from .evidence import (EvidenceReport, Favors, Grade, MleBaseline, analyze,
                       discrimination_information, generalized_regret, grade,
                       hypothesis_spaces, mle_baseline, scheme_rows)
from .families import (FamilyInstance, Kind, ReducedObservation, folded_noncentral_t_log_pdf,
                       log_density, noncentrality, null_pseudo_statistic, reduce_two_sample,
                       sample_statistic)
from .quadrature import QuadratureConfig, log_integrate
from .weights import (WeightRow, blended_weights, custom_weights, null_pseudo_weights,
                      require_valid, single_observation_weights, validate_weights)
from .wlik import (ComparisonSet, OptimConfig, ParameterSpace, WeightedMleResult,
                   weighted_log_likelihood, weighted_mle, weighted_mle_normal_closed_form)

__version__ = "0.1.0"
