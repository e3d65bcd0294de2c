"""Finite mixtures of Poisson / NB-2 count regressions.

EM fitting, model selection by AIC / SBC / CAIC / ICOMP, and
genetic-algorithm covariate subsetting, with a reproducible CLI.
"""

__version__ = "0.1.0"

from .countglm import (
    NB2,
    POISSON,
    GlmFit,
    dispersion_stat,
    fit_nb2,
    fit_poisson,
    nb2_loglik,
    nb2_loglik_grad,
    poisson_loglik,
    poisson_loglik_grad,
)
from .criteria import (
    ScoreRow,
    aic,
    c1_complexity,
    caic,
    count_params,
    icomp,
    observed_info,
    sbc,
    score_model,
)
from .data import (
    ColumnStats,
    CovariateMask,
    Dataset,
    apply_mask,
    load_csv,
    save_csv,
    standardize_covariates,
    subset_rows,
    summary_stats,
)
from .errors import CountmixError
from .ga import (
    GaConfig,
    SubsetRecord,
    component_summaries,
    evolve,
    fitness,
    report_components,
)
from .mixture import (
    ComponentParams,
    MixtureModel,
    e_step,
    em_fit,
    init_by_count_mixture,
    m_step,
    mixture_loglik,
)
from .selection import SweepResult, choose_family, select_best, sweep
from .simulate import (
    GENERATOR_ID,
    MixtureSpec,
    gen_grouped_counts,
    gen_regression_mixture,
)

__all__ = [
    "__version__",
    "POISSON",
    "NB2",
    "GENERATOR_ID",
    "CountmixError",
    "Dataset",
    "CovariateMask",
    "ColumnStats",
    "load_csv",
    "save_csv",
    "apply_mask",
    "subset_rows",
    "summary_stats",
    "standardize_covariates",
    "GlmFit",
    "fit_poisson",
    "fit_nb2",
    "poisson_loglik",
    "poisson_loglik_grad",
    "nb2_loglik",
    "nb2_loglik_grad",
    "dispersion_stat",
    "ComponentParams",
    "MixtureModel",
    "mixture_loglik",
    "e_step",
    "m_step",
    "init_by_count_mixture",
    "em_fit",
    "ScoreRow",
    "count_params",
    "aic",
    "sbc",
    "caic",
    "icomp",
    "c1_complexity",
    "observed_info",
    "score_model",
    "SweepResult",
    "choose_family",
    "select_best",
    "sweep",
    "GaConfig",
    "SubsetRecord",
    "fitness",
    "evolve",
    "report_components",
    "component_summaries",
    "MixtureSpec",
    "gen_grouped_counts",
    "gen_regression_mixture",
]
