"""Locally differentially private rank aggregation with KwikSort."""

from .data import (
    Dataset,
    MallowsParams,
    load_named,
    load_strict_order,
    mallows_sample,
    pairwise_bernoulli_sample,
    write_strict_order,
)
from .errors import (
    CapacityError,
    ConfigError,
    DatasetError,
    DimensionError,
    FormatError,
    LdpRankError,
    ParseError,
    ProtocolError,
    SingularMatrixError,
    ValidationError,
)
from .experiment import ExperimentConfig, RunResult, error_rate, run_experiment, run_sweep
from .mechanisms import (
    PrivacyBudget,
    TransformationMatrix,
    central_lap_noise,
    lap_perturb,
    mle_reconstruct,
    p_lap,
    p_rr,
    rr_perturb,
)
from .protocol import (
    AnswerSet,
    EstimatedCmpProfile,
    QueryPlan,
    agent_respond_lap,
    agent_respond_rr,
    curator_aggregate_lap,
    curator_aggregate_rr,
    plan_queries,
    run_dp_kwiksort,
    run_kwiksort,
    run_ldp_kwiksort,
    true_answer,
)
from .ranking import (
    CmpProfile,
    PairwiseTable,
    Profile,
    Ranking,
    avg_kendall_tau,
    exact_cmp,
    kemeny_optimal,
    kendall_tau,
    kwiksort,
)
from .theory import BoundInputs, Mechanism, choose_k, g_lap, g_rr, mu_bound, theta_star

__version__ = "0.1.0"
