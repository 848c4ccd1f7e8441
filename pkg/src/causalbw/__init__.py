"""Targeted bandwidth selection for local linear estimation of average causal effects."""

from .asymptotics import (
    AsymptoticConstants,
    PopulationModel,
    asym_constants,
    asym_mse_beta,
    asym_mse_tau,
    h_opt,
)
from .criteria import (
    CriterionValue,
    GroupSweep,
    OracleTruth,
    cv_score,
    fit_logistic_propensity,
    joint_tau_surface,
    mse_beta_ds,
    mse_beta_inr,
    mse_beta_oracle,
    mse_tau_ds,
    mse_tau_oracle,
    mse_y_oracle,
)
from .designs import DesignSpec, design, design_sigma2, oracle_truth, population_model, true_tau
from .errors import (
    DegenerateFitError,
    InputError,
    InsufficientDonorsError,
    NumericalError,
    OverlapViolationError,
)
from .estimators import Dataset, TauEstimate, imputation_tau, ols_control_variate, residual_variance
from .kernels import (
    EPANECHNIKOV,
    KERNELS,
    TRICUBE,
    UNIFORM,
    Kernel,
    eval_kernel,
    get_kernel,
    kernel_moment2,
    kernel_roughness,
)
from .selection import (
    BandwidthGrid,
    Selection,
    paper_grid,
    select_joint,
    select_pilot,
    select_single,
)
from .simulation import (
    METHODS,
    ComparisonTable,
    ReplicationResult,
    StarAnnotation,
    generate,
    paired_onesided_p,
    run_campaign,
    significance_stars,
)
from .smoothing import (
    Bandwidth,
    GroupSample,
    WeightRow,
    fit,
    loo_fit,
    nn_radius,
    smoothing_matrix,
    weight_row,
)

__version__ = "0.1.0"
