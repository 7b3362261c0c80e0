"""curvforge: prescribe Gaussian and geodesic curvatures on triangulated
surfaces with boundary, by monotone iteration between sub- and
super-solutions of the associated semilinear problems, with independent
angle-defect verification of every realized metric."""

__version__ = "0.1.0"

from .errors import (BracketError, CompatibilityError, CurvforgeError,
                     FieldError, IterationError, MeshError, ModelError,
                     SolverError, TriangleInequalityError)
from .mesh import (DiscreteCurvature, IntrinsicMetric, SurfaceMesh,
                   conformal_rescale, corner_angles, discrete_curvatures,
                   euler_characteristic, load_mesh)
from .fields import (ScalarField, as_field_values, evaluate_expression,
                     read_field_csv)
from .elliptic import (EllipticOperators, RobinProblem, SolveStats, assemble,
                       solve_neumann_compatible, solve_robin)
from .monotone import (Bracket, IterationConfig, IterationTrace,
                       SemilinearProblem, bracket_for_constant_flux,
                       bracket_for_curvature_pair,
                       bracket_for_neumann_problem,
                       bracket_for_robin_problem, check_bracket,
                       monotone_iterate)
from .prescribe import (ExamplePair, FeasibilityReport, ModelForm,
                        PrescriptionResult, certify_model,
                        check_necessary_negative_chi, construct_example_pair,
                        prescribe_gaussian, prescribe_geodesic,
                        prescribe_pair_chi0, uniformize_chi0)
from .verify import (Check, VerificationReport, conformal_rescale_verify,
                     gauss_bonnet_residual, maximum_principle_probe,
                     pde_residual, w_substitution_check)

__all__ = [name for name in dir() if not name.startswith("_")]
