//! Offline toolkit for budget-constrained sequential incentive allocation.
//!
//! Everything runs from logged data: the pipeline ingests six-element
//! transition logs, fits a tabular world model, plans entropy-regularized
//! policies for any dual variable without refitting, estimates their reward
//! and cost counterfactually, and bisects the dual variable until the policy
//! meets the budget. A synthetic two-step environment and a deterministic
//! oracle fixture provide ground truth for every estimator.
//!
//! Module map:
//! - [`data`] — logged transitions, file formats, validation, splits
//! - [`synthetic`] — environment generator, oracle fixture, exact simulation
//! - [`model`] — count-based world model with holdout accuracy reports
//! - [`soft_q`] — reshaped-reward soft-Q learning, exact or from logs
//! - [`planner`] — fixed-depth planning and lambda sweeps on a fitted model
//! - [`cpe`] — IS / SNIPS / doubly-robust counterfactual evaluation
//! - [`solver`] — dual-variable bisection, its upper bound, dual ascent

pub mod cpe;
pub mod data;
pub mod error;
pub mod model;
pub mod planner;
pub mod solver;
pub mod soft_q;
pub mod synthetic;

pub use cpe::{dr_estimate, is_estimate, snips_estimate, EstimatorKind, EvalEstimate, Evaluator};
pub use data::{
    load_dataset, split_dataset, validate_dataset, write_csv, write_jsonl, Dataset, DatasetSplit,
    LogSchema, LoggedTransition, ValidationReport,
};
pub use error::{CoreError, Result};
pub use model::{fit_models, model_report, ModelReport, Prediction, WorldModel, DEFAULT_SMOOTHING};
pub use planner::{lambda_grid, lambda_sweep, plan, write_sweep_csv, PlanConfig, SweepPoint};
pub use solver::{
    bisection_solve, constrained_bandit_baseline, dual_ascent_solve, dual_value,
    lambda_upper_bound, DualAscentParams, LambdaBracket, SolveParams, SolverReport,
};
pub use soft_q::{
    extract_policy, fitted_q_from_logs, reshape_reward, soft_value_iteration, Dynamics, FittedQ,
    Policy, SoftQConfig, TieBreak,
};
pub use synthetic::{
    gen_synthetic, log_uniform_episodes, simulate_policy, toy_fixture, toy_fixture_sized, MdpSpec,
    SyntheticConfig,
};
