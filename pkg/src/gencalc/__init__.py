"""Numerical calculus with nonlinear generalized functions.

Nets of smooth functions indexed by a scale parameter represent generalized
functions; the package provides certified vanishing-moment mollifiers, exact
expression-level differentiation, distribution embeddings, moderateness and
negligibility classification, weak-limit association, and an application
layer for regularized impulsive pp-wave spacetimes.
"""

from .asymptotics import (CompactBox, EpsGrid, classify_moderate,
                          classify_negligible, equal_in_algebra, fit_order,
                          sup_sweep, verify_test_object)
from .association import associate, match_candidate, pair
from .embedding import (DistributionSpec, embed_distribution, embed_smooth,
                        pair_test_function, vp_pairing)
from .errors import (ArgumentError, ConstructionError, DomainError,
                     EvaluationError, InsufficientDataError)
from .mollifier import (SmoothingKernelNet, StrictDeltaNet, TestFunction,
                        build_bump, build_vanishing_moment_mollifier, moment,
                        scale_translate, strict_delta_net, tensor_product,
                        translation_kernel_net)
from .netcore import (EPS, NetExpr, constant, coordinate, derive, derive_multi,
                      jet_eval, kernel_apply, smooth)
from .spacetime import (RegularizedMetric, build_brinkmann, build_flat_metric,
                        build_kink_metric, christoffel, completeness_scan,
                        curvature, geodesic_solve, gt_check, limit_profile,
                        ricci_associate)

__version__ = "0.1.0"
