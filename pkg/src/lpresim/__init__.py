"""Product relative error estimation for multiplicative single index models.

Fits Y = exp{g(X'b)} * eps with unknown link g and unit-norm index b by
minimizing the product of the two relative errors (relative to the response
and to its predictor), with local linear link estimation, bootstrap
inference, baseline estimators, and a Monte Carlo benchmarking harness.

Set ``LPRESIM_BACKEND=numpy`` to disable the numba-compiled smoothing
kernels (see ``lpresim._backend``).
"""

__version__ = "0.1.0"

from ._backend import active_backend
from .errors import (
    AbortedRun,
    ConfigError,
    DegenerateCovariates,
    DegenerateDesign,
    LpresimError,
    NoDescent,
    NonPositiveResponse,
    NoValidBandwidth,
    OutsideBall,
    ParseError,
    SamplerFault,
    SingularInformation,
    TooManyFailures,
    UndefinedPValue,
)
from .fit import (
    Dataset,
    FitConfig,
    FitResult,
    estimating_fn,
    info_matrix,
    initial_beta,
    linear_lpre_fit,
    lpre_criterion,
    ls_fit,
    newton_solve,
    predict,
    two_stage_fit,
)
from .inference import BootstrapReport, bootstrap_se, p_value
from .pipeline import (
    PredictionMetrics,
    RunConfig,
    bodyfat_pipeline,
    load_csv,
    prediction_metrics,
)
from .reparam import ReducedCoef, UnitIndexCoef, jacobian, lift, reduce
from .simulation import (
    ErrorLaw,
    SimConfig,
    SimReport,
    gen_data,
    metric_ase,
    metric_ee,
    metric_mse,
    run_simulation,
    sample_error,
    sample_gig,
    true_link,
)
from .smoother import (
    EPANECHNIKOV,
    GAUSSIAN,
    Bandwidths,
    KernelSpec,
    LinkFit,
    SmootherLink,
    bandwidth_rule,
    fit_link,
    gcv_bandwidth,
    local_linear_at,
    local_linear_deriv_at,
    moment_sums,
)
from .cli import cli_main
