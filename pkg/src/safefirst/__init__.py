"""Risk-adjusted optimal policy learning on observational data.

Fits per-action conditional mean/variance models, assigns treatments under
risk-neutral, linear and quadratic risk-averse, and safety-first criteria,
evaluates the welfare cost of risk aversion with Direct-Method value
functions, and reproduces the two-arm Monte Carlo experiment.
"""

from ._kernels import BACKEND
from .core import (
    LOGISTIC_FAMILY,
    NORMAL_FAMILY,
    TIE_EPSILON,
    VARIANCE_FLOOR,
    ActionSet,
    ConditionalMoments,
    CriterionKind,
    Dataset,
    LocationScaleFamily,
    PolicyAssignment,
    RiskCriterion,
    SafeFirstError,
    family_by_name,
    tabulated_family,
    validate_dataset,
)
from .evaluate import (
    EvaluationReport,
    FrequencyTable,
    action_frequencies,
    match_rate,
    regret,
    safety_first_welfare_empirical,
    value_direct,
)
from .moments import (
    BasisKind,
    MomentModel,
    OverlapDiagnostics,
    PropensityModel,
    RegressorConfig,
    RegressorMethod,
    fit_moments,
    fit_propensity,
    overlap_report,
    predict_moments,
)
from .policy import (
    CriterionScore,
    assign_policy,
    choose_action,
    choose_among_moments,
    exceedance_probability,
    score_actions,
    score_moments,
)
from .simulate import (
    MonteCarloSummary,
    TwoArmParams,
    TwoArmSample,
    closed_form_oracle_welfare,
    draw_two_arm,
    oracle_assignment,
    realized_outcomes,
    run_simulation,
)

__version__ = "0.1.0"

__all__ = [
    "ActionSet", "BACKEND", "BasisKind", "ConditionalMoments", "CriterionKind",
    "CriterionScore", "Dataset", "EvaluationReport", "FrequencyTable",
    "LOGISTIC_FAMILY", "LocationScaleFamily", "MomentModel", "MonteCarloSummary",
    "NORMAL_FAMILY", "OverlapDiagnostics", "PolicyAssignment", "PropensityModel",
    "RegressorConfig", "RegressorMethod", "RiskCriterion", "SafeFirstError",
    "TIE_EPSILON", "TwoArmParams", "TwoArmSample", "VARIANCE_FLOOR",
    "action_frequencies", "assign_policy", "choose_action", "choose_among_moments",
    "closed_form_oracle_welfare", "draw_two_arm", "exceedance_probability",
    "family_by_name", "fit_moments", "fit_propensity", "match_rate",
    "oracle_assignment", "overlap_report", "predict_moments", "realized_outcomes",
    "regret", "run_simulation", "safety_first_welfare_empirical", "score_actions",
    "score_moments", "tabulated_family", "validate_dataset", "value_direct",
]
