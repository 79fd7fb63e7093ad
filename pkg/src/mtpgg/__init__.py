"""Marginalized two-part regression for semicontinuous outcomes on the
generalized gamma family."""

from .ggdist import (
    K_EPS,
    Family,
    GGParams,
    c_offset,
    log_pdf,
    lognormal_log_pdf,
    lognormal_sample,
    mean,
    moment,
    sample,
    variance,
)
from .inference import (
    DerivativeError,
    FitOptions,
    FitResult,
    InitializationError,
    SelectionReport,
    fit_mtp,
    fit_tp,
    maximize,
    select_model,
    shape_suggestion,
    wald_inference,
)
from .likelihood import (
    Dataset,
    MtpParams,
    StructuralDataError,
    TpParams,
    mtp_loglik,
    mtp_marginal_mean,
    tp_loglik,
    tp_marginal_mean,
)
from .simstudy import (
    DEFAULT_ALPHA,
    DEFAULT_BETA,
    SimScenario,
    gen_dataset,
    replicate_rng,
    run_replicate,
    run_study,
    scenario_from_shape,
    summarize,
)

__version__ = "0.1.0"

__all__ = [
    "K_EPS",
    "Family",
    "GGParams",
    "c_offset",
    "log_pdf",
    "lognormal_log_pdf",
    "lognormal_sample",
    "mean",
    "moment",
    "sample",
    "variance",
    "DerivativeError",
    "FitOptions",
    "FitResult",
    "InitializationError",
    "SelectionReport",
    "fit_mtp",
    "fit_tp",
    "maximize",
    "select_model",
    "shape_suggestion",
    "wald_inference",
    "Dataset",
    "MtpParams",
    "StructuralDataError",
    "TpParams",
    "mtp_loglik",
    "mtp_marginal_mean",
    "tp_loglik",
    "tp_marginal_mean",
    "DEFAULT_ALPHA",
    "DEFAULT_BETA",
    "SimScenario",
    "gen_dataset",
    "replicate_rng",
    "run_replicate",
    "run_study",
    "scenario_from_shape",
    "summarize",
    "__version__",
]
