"""finslab: numerical engine for pseudo-Finsler metrics.

Evaluates metric tensors, the associated connection, lightlike geodesics,
Jacobi fields and focal points for user-supplied metric scalars, and checks
the invariance of this structure under direction-dependent conformal
rescalings.
"""

from .conformal import (ConformalPair, anisotropy_factor, inverse_factor,
                        lightcones_coincide, scale_metric)
from .connection import (ChristoffelField, ConnectionFrame, SprayValue,
                         chern_curvature, christoffel,
                         covariant_derivative_along, horizontal_derivative,
                         horizontal_gradient, jacobi_matrix, jacobi_operator,
                         spray, spray_coefficients, vertical_gradient)
from .curves import DiscreteCurve, Reparametrization
from .dsl import (MetricDefinition, TangentSample, admissible, builtin_metric,
                  builtin_names, dump_metric_file, load_metric_file,
                  parse_expression, parse_metric, pretty, sample_admissible,
                  validate_homogeneity)
from .errors import (ConfigError, DomainExit, EvaluationDomainError,
                     ExpressionError, FinslabError, InadmissibleSample,
                     NoAdmissibleSample, NoConvergence, PositivityFailure,
                     SingularMetric, TransversalityFailure)
from .geodesics import (energy, integrate_geodesic, lightlike_defect,
                        pregeodesic_residual, project_to_lightcone,
                        reparametrize_conformal)
from .jets import Jet, JetSpace, extract_derivative, jet_space, seed
from .tensors import (CartanTensor, FundamentalTensor, cartan_tensor,
                      fundamental_tensor, inverse_metric, legendre)
from .variational import (CurveGeometry, FocalPoint, JacobiSolution,
                          SubmanifoldPatch, VariationField, boundary_residual,
                          conformal_jacobi_residual, energy_derivative_fd,
                          find_focal_points, first_variation, index_form,
                          integrate_jacobi, integrate_jacobi_basis,
                          normal_second_fundamental_form, second_fundamental_form,
                          second_variation, transfer_jacobi,
                          verify_focal_correspondence)

__version__ = "0.1.0"
