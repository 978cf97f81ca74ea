"""Solver laboratory for dynamic inventory routing under stochastic
supply and demand: exact value iteration, an average-cost TD(lambda)
learner, scenario lookahead, and classical (s,S)/power-of-two benchmarks.
"""

from .action_solver import (
    WeightVector,
    best_action,
    features,
    brute_force_action,
    enumerate_actions,
    load_weights,
    objective_of,
    random_action,
    save_weights,
)
from .crl import TrainerConfig, TrainResult, greedy_policy, scaled_config, train
from .dynamics import (
    Action,
    InfeasibleActionError,
    PostDecisionState,
    Realization,
    RealizationStream,
    SimReport,
    State,
    action_cost,
    is_feasible,
    post_decision,
    feasibility_violation,
    simulate,
    stage_cost,
    stage_cost_components,
    transition,
    zero_policy,
)
from .heuristics import (
    PO2Candidate,
    PO2Report,
    SSCandidate,
    SSConfig,
    SSReport,
    ScheduleInfeasible,
    SelectionInfeasible,
    build_cyclic_schedule,
    eval_all_ss,
    eval_ss_candidate,
    po2_expected_cost,
    po2_heuristic,
    po2_policy,
    select_policies,
    ss_heuristic,
    ss_policy,
)
from .instance import (
    CostVector,
    DiscreteDistribution,
    Instance,
    InstanceError,
    Location,
    discretize_normal,
    gen_main,
    gen_toy,
    load,
    save,
)
from .lcrl import LookaheadConfig, Scenario, lcrl_decide, lcrl_policy, lookahead_objective, sample_scenarios
from .vi import PolicyTable, StateSpaceTooLarge, policy_slice, value_iteration, write_slice_csv

__version__ = "0.1.0"

__all__ = [
    "Action",
    "CostVector",
    "DiscreteDistribution",
    "InfeasibleActionError",
    "Instance",
    "InstanceError",
    "Location",
    "LookaheadConfig",
    "PO2Candidate",
    "PolicyTable",
    "PostDecisionState",
    "Realization",
    "RealizationStream",
    "SSCandidate",
    "SSConfig",
    "SimReport",
    "State",
    "TrainResult",
    "TrainerConfig",
    "WeightVector",
    "action_cost",
    "best_action",
    "features",
    "brute_force_action",
    "build_cyclic_schedule",
    "discretize_normal",
    "enumerate_actions",
    "eval_ss_candidate",
    "gen_main",
    "gen_toy",
    "greedy_policy",
    "is_feasible",
    "lcrl_decide",
    "lcrl_policy",
    "load",
    "load_weights",
    "lookahead_objective",
    "sample_scenarios",
    "Scenario",
    "objective_of",
    "po2_expected_cost",
    "po2_heuristic",
    "policy_slice",
    "StateSpaceTooLarge",
    "write_slice_csv",
    "post_decision",
    "random_action",
    "save",
    "save_weights",
    "scaled_config",
    "select_policies",
    "simulate",
    "ss_heuristic",
    "ss_policy",
    "po2_policy",
    "eval_all_ss",
    "ScheduleInfeasible",
    "SelectionInfeasible",
    "SSReport",
    "PO2Report",
    "stage_cost",
    "stage_cost_components",
    "feasibility_violation",
    "train",
    "transition",
    "value_iteration",
    "zero_policy",
]
