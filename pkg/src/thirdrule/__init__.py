"""Budget allocation by thirds: utilities, risk, games, plans, stress tests.

The package splits an income into debt service, savings, and essential
expenses, defends the equal split as the optimum of a symmetric
preference model, prices deviations through a bankruptcy-risk index,
adapts the split to income and market volatility, divides pooled gains
fairly across household members, plans allocations over multiple
periods, and stress tests rules under adverse scenarios with seeded
Monte Carlo.
"""

from .adjust import (
    MAX_SHIFT,
    AdjustMode,
    AdjustmentFactors,
    adjusted_allocation,
    adjustment_factors,
    zero_sum_defect,
)
from .domain import (
    Allocation,
    AllocationRule,
    HouseholdProfile,
    HouseholdType,
    IncomeBand,
    Money,
    RuleId,
    SignedMoney,
    check_fractions,
    classify_income,
    dti,
    make_allocation,
    rule_allocation,
    ser,
    total_income,
)
from .dynamic import (
    DEFAULT_ACTION_STEP,
    DEFAULT_GRID_NODES,
    DynamicConfig,
    HouseholdState,
    Policy,
    default_config,
    policy_adjustments,
    replay_node_value,
    solve_plan,
    transition,
)
from .errors import DebtNeverClearsError, DomainError, ValidationError
from .game import (
    CoalitionSpec,
    MultigenAllocation,
    ShapleyResult,
    best_response_check,
    coalition_value,
    is_superadditive,
    nested_multigen_allocation,
    shapley_values,
)
from .risk import (
    DEFAULT_DTI_LIMIT,
    DEFAULT_SER_FLOOR,
    RiskParams,
    StabilityFlags,
    bankruptcy_probability,
    classify_stability,
    std_normal_cdf,
)
from .stochastic import (
    THREADS_ENV_VAR,
    IncomePath,
    PathConfig,
    SavingsPath,
    correlated_normal_pair,
    derive_stream_seed,
    derive_trial_rng,
    income_levels,
    mix_correlated,
    simulate_income_path,
    simulate_savings_path,
    thread_count,
)
from .stress import (
    BASELINE_SCENARIO,
    AnnuityTiming,
    RuleComparison,
    ScenarioSpec,
    StressMetrics,
    TrialOutcome,
    compare_rules,
    debt_clearance_time,
    run_stress,
    run_trial,
    savings_future_value,
)
from .utility_opt import (
    UtilityParams,
    deviation_utility_loss,
    optimal_allocation,
    penalty_coefficient,
    penalty_quadratic,
    utility,
    utility_at,
    utility_gradient,
    verify_first_order,
)

__version__ = "0.1.0"

__all__ = [
    "MAX_SHIFT",
    "AdjustMode",
    "AdjustmentFactors",
    "adjusted_allocation",
    "adjustment_factors",
    "zero_sum_defect",
    "Allocation",
    "AllocationRule",
    "HouseholdProfile",
    "HouseholdType",
    "IncomeBand",
    "Money",
    "RuleId",
    "SignedMoney",
    "check_fractions",
    "classify_income",
    "dti",
    "make_allocation",
    "rule_allocation",
    "ser",
    "total_income",
    "DEFAULT_ACTION_STEP",
    "DEFAULT_GRID_NODES",
    "DynamicConfig",
    "HouseholdState",
    "Policy",
    "default_config",
    "policy_adjustments",
    "replay_node_value",
    "solve_plan",
    "transition",
    "DebtNeverClearsError",
    "DomainError",
    "ValidationError",
    "CoalitionSpec",
    "MultigenAllocation",
    "ShapleyResult",
    "best_response_check",
    "coalition_value",
    "is_superadditive",
    "nested_multigen_allocation",
    "shapley_values",
    "DEFAULT_DTI_LIMIT",
    "DEFAULT_SER_FLOOR",
    "RiskParams",
    "StabilityFlags",
    "bankruptcy_probability",
    "classify_stability",
    "std_normal_cdf",
    "THREADS_ENV_VAR",
    "IncomePath",
    "PathConfig",
    "SavingsPath",
    "correlated_normal_pair",
    "derive_stream_seed",
    "derive_trial_rng",
    "income_levels",
    "mix_correlated",
    "simulate_income_path",
    "simulate_savings_path",
    "thread_count",
    "BASELINE_SCENARIO",
    "AnnuityTiming",
    "RuleComparison",
    "ScenarioSpec",
    "StressMetrics",
    "TrialOutcome",
    "compare_rules",
    "debt_clearance_time",
    "run_stress",
    "run_trial",
    "savings_future_value",
    "UtilityParams",
    "deviation_utility_loss",
    "optimal_allocation",
    "penalty_coefficient",
    "penalty_quadratic",
    "utility",
    "utility_at",
    "utility_gradient",
    "verify_first_order",
    "__version__",
]
