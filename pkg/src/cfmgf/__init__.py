"""Affine-invariant tests for multivariate normality built on the product of
the empirical characteristic and moment generating functions, for i.i.d.
samples and for the innovations of CCC-GARCH(1,1) models."""

from .errors import (BadParameter, BootstrapUnstable, CfmgfError, DataError, DegenerateData,
                     DimensionTooLarge, ExponentOverflow, GammaTooSmall, NoConvergence,
                     NonFinite, NonFiniteData, NonStationary, NotSPD, NumericBlowup,
                     NumericError, SingularCovariance, TooFewRows)
from .experiments import (ExperimentReport, critical_table, null_statistics, power_table,
                          simulate_statistics, upper_quantile, warp_speed_garch)
from .garch import (GarchFit, GarchPath, GarchSpec, bootstrap_resample, bootstrap_test,
                    garch_filter, garch_simulate, garch_statistic, garch_test, negloglik,
                    qmle_fit)
from .quadrature import QuadratureGrid, integrate, integrate_hw, integrate_u, kernel_integrals
from .sampling import AlternativeSpec, RngStream, aep_params_default, draw, sample
from .standardize import (DataMatrix, ScaledResiduals, Standardization, read_csv,
                          scaled_residuals, sym_inv_sqrt)
from .statistics import (AsymptoticConstants, Decision, Family, MomentSummary, TestResult,
                         WeightConfig, hw_stat, hw_values, kernel_c, limit_check_t,
                         limit_check_ttilde, mean_w_norm, moment_summary, sigma2_closed,
                         t_stat, t_tilde_stat, t_values, ttilde_values, u_process)

__version__ = "0.1.0"
