//! Monte Carlo policy evaluation and cross-entropy search over heuristic parameters.

mod ce;
mod evaluate;
mod study;

pub use ce::{
    cross_entropy_optimize, elite_statistics, truncated_normal, write_trace_jsonl, CeConfig, CeIteration, CeResult,
    ParamSpace,
};
pub use evaluate::{
    evaluate_policy, noise_for, rollout, run_heuristic, summarize, synthetic_measurements, truth_for, ComponentMeans,
    DecisionProblem, EvaluationResult, EvaluationSummary, Policy, RolloutRecord,
};
pub use study::{
    final_eval_seed, optimize_policy_kind, run_study, PolicyKind, RestartOutcome, StudyConfig, StudyResult, StudyRow,
};
