"""Active querying for contextual dueling bandits and imitation from preferences."""

from .aurora import (
    Aurora,
    AuroraParams,
    IGWInfeasibleError,
    InvariantChecker,
    beta_and_gamma,
    igw_constraint_check,
    igw_distribution,
    igw_probabilities,
)
from .aurorae import (
    ExpertModel,
    TabularMDP,
    chain_mdp,
    evaluate_policy,
    expert_q,
    il_regret_and_adv,
    occupancy,
    preference_margin,
    run_episode,
    run_il,
    single_step_problem,
    snapshot_policy,
    soft_greedy_expert,
)
from .envs import (
    CBInstance,
    ContextSchedule,
    GeneratorConfig,
    context_gap_counts,
    gap,
    generate_instance,
    regret_increment,
)
from .funcspace import (
    EluderCapError,
    FunctionClass,
    QueryHistory,
    RealizabilityError,
    RewardPreferenceFunction,
    best_arm,
    candidate_arms,
    eluder_dimension,
    version_space,
    width,
)
from .harness import ConfigError, InvariantViolation, run_cb, sweep
from .links import LOGISTIC, SQUARE, DomainError, LinkSpec, get_link, link_value, loss_value, potential
from .oracle import OracleState, oracle_regret, upsilon_bound

__version__ = "0.1.0"
