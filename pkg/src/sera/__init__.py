"""Spike recovery and exponential-sum separation from scattered Gaussian-blurred samples."""
from .exceptions import (ClusterGeometryError, ConfigurationError, DomainError, PrecisionError,
                         RecoveryError)
from .hermite import (CutoffSpec, MultiIndex, cutoff_H, hermite_functions, hermite_multi,
                      multi_hermite_basis, total_degree_indices)
from .kernels import (KernelSpec, gauss_identity_residual, kernel_matrix, mehler_closed_form,
                      mehler_series, mehler_special, phi_diag, phi_n, phi_n_star)
from .quadrature import (A_SERO, QuadratureMeasure, SampleSet, mesh_stats, solve_weights,
                         thin_points)
from .operator import (EvaluationGrid, FieldValues, OperatorMatrix, apply, assemble_operator,
                       build_grid, continuous_sero_oracle)
from .recovery import (RecoveredSpikes, RecoveryParams, SeparationResult, recover,
                       separate_exponential_sum)
from .synthesis import (ClutterSpec, DensityClutter, TargetSpec, eval_blurred, eval_exp_sum,
                        eval_model_G, gen_clutter, gen_sample_points, gen_target)
from .estimators import (ExponentialSumSeparator, MZQuadrature, SEROTransformer,
                         SpikeRecovery)

__version__ = "0.1.0"
