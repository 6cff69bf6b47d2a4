//! Entropy-regularized policy learning for a fixed dual variable.
//!
//! Rewards are reshaped to `r - lambda * c`, then the Bellman recursion is
//! solved with a log-sum-exp backup at temperature `rho` (plain max with a
//! deterministic tie-break at `rho = 0`). Two routes produce the same policy:
//! exact backward sweeps on a model ([`soft_value_iteration`]) and batch
//! fitted-Q sweeps straight from logged transitions ([`fitted_q_from_logs`]).
//! The second exists so the first can be checked against it, and vice versa.
//!
//! A gradient-based Q-learner with replay and target networks would slot in
//! behind the same [`Policy`] contract; at tabular scale the exact sweeps are
//! deterministic and testable, so that is what ships.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CoreError, Result};

pub const POLICY_FORMAT_VERSION: u32 = 1;

/// Access to a fitted or exact environment model: mean reward/cost tables,
/// per-(state, action) termination probability, and the successor
/// distribution conditional on continuation.
pub trait Dynamics {
    fn n_states(&self) -> usize;
    fn n_actions(&self) -> usize;
    fn mean_reward(&self, state: usize, action: usize) -> f64;
    fn mean_cost(&self, state: usize, action: usize) -> f64;
    /// Probability the episode ends after taking (state, action).
    fn terminal_prob(&self, state: usize, action: usize) -> f64;
    /// Successor distribution given continuation; sums to 1.
    fn successor_probs(&self, state: usize, action: usize) -> &[f64];
}

/// Rule for breaking exact ties among argmax actions when `rho = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TieBreak {
    LowestActionId,
    /// Prefer the cheaper action; keeps the returned policy on the feasible
    /// side of the budget at dual-variable values where the objective ties.
    #[default]
    LowestCost,
}

/// Parameters for the soft-Q recursion.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SoftQConfig {
    /// Entropy temperature; 0 recovers the greedy backup.
    pub rho: f64,
    pub gamma: f64,
    /// Number of backward sweeps. 0 means infinite-horizon mode, which
    /// requires `gamma < 1` and iterates until `tol`.
    pub horizon: usize,
    pub max_sweeps: usize,
    pub tol: f64,
    pub tie_break: TieBreak,
}

impl SoftQConfig {
    pub fn new(horizon: usize, gamma: f64, rho: f64) -> Self {
        SoftQConfig {
            rho,
            gamma,
            horizon,
            max_sweeps: 10_000,
            tol: 1e-10,
            tie_break: TieBreak::default(),
        }
    }

    fn check(&self) -> Result<()> {
        if self.rho < 0.0 || !self.rho.is_finite() {
            return Err(CoreError::InvalidConfig(format!(
                "rho must be finite and >= 0, got {}",
                self.rho
            )));
        }
        if self.tol <= 0.0 {
            return Err(CoreError::InvalidConfig(format!(
                "tol must be > 0, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

/// A stochastic tabular policy with the Q/V tables it was extracted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Policy {
    /// Action distribution per state; each row sums to 1.
    pub probs: Vec<Vec<f64>>,
    pub q_values: Vec<Vec<f64>>,
    pub v_values: Vec<f64>,
    /// Dual variable the reshaped reward was built with.
    pub lambda_used: f64,
    pub rho: f64,
}

impl Policy {
    pub fn n_states(&self) -> usize {
        self.probs.len()
    }

    pub fn n_actions(&self) -> usize {
        self.probs.first().map_or(0, |row| row.len())
    }

    pub fn prob(&self, state: usize, action: usize) -> f64 {
        self.probs[state][action]
    }

    /// Uniform distribution over actions; the shape of the logging policy.
    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        let p = 1.0 / n_actions as f64;
        Policy {
            probs: vec![vec![p; n_actions]; n_states],
            q_values: vec![vec![0.0; n_actions]; n_states],
            v_values: vec![0.0; n_states],
            lambda_used: 0.0,
            rho: 0.0,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda_used = lambda;
        self
    }

    /// Error unless every row is a distribution (within 1e-9).
    pub fn check_rows(&self) -> Result<()> {
        for (s, row) in self.probs.iter().enumerate() {
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || row.iter().any(|p| *p < 0.0) {
                return Err(CoreError::PolicyNotNormalized { state: s, sum });
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = PolicyFile {
            format_version: POLICY_FORMAT_VERSION,
            policy: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        fs::write(path, json).map_err(|e| CoreError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let file: PolicyFile = serde_json::from_str(&raw)?;
        if file.format_version != POLICY_FORMAT_VERSION {
            return Err(CoreError::FormatVersion {
                found: file.format_version,
                expected: POLICY_FORMAT_VERSION,
            });
        }
        Ok(file.policy)
    }
}

#[derive(Serialize, Deserialize)]
struct PolicyFile {
    format_version: u32,
    #[serde(flatten)]
    policy: Policy,
}

/// Fold the cost into the reward: `r - lambda * c`.
pub fn reshape_reward(reward: f64, cost: f64, lambda: f64) -> Result<f64> {
    if lambda < 0.0 {
        return Err(CoreError::NegativeLambda(lambda));
    }
    Ok(reward - lambda * cost)
}

/// Softmax backup of one Q row: value, then per-action probabilities.
/// Log-sum-exp is max-shifted so tiny temperatures do not overflow.
fn soft_backup(
    q_row: &[f64],
    cost_row: &[f64],
    rho: f64,
    tie_break: TieBreak,
) -> Result<(f64, Vec<f64>)> {
    let max = q_row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max.is_nan() {
        let action = q_row.iter().position(|q| q.is_nan()).unwrap_or(0);
        return Err(CoreError::NanQValue { state: 0, action });
    }
    if rho > 0.0 {
        let exps: Vec<f64> = q_row.iter().map(|q| ((q - max) / rho).exp()).collect();
        let sum: f64 = exps.iter().sum();
        let value = max + rho * sum.ln();
        let probs = exps.iter().map(|e| e / sum).collect();
        Ok((value, probs))
    } else {
        // Greedy: point mass on the argmax, deterministic tie-break.
        let tied: Vec<usize> = q_row
            .iter()
            .enumerate()
            .filter(|(_, q)| **q == max)
            .map(|(a, _)| a)
            .collect();
        let pick = match tie_break {
            TieBreak::LowestActionId => tied[0],
            TieBreak::LowestCost => *tied
                .iter()
                .min_by(|a, b| {
                    cost_row[**a]
                        .partial_cmp(&cost_row[**b])
                        .unwrap_or(std::cmp::Ordering::Equal)
                        .then(a.cmp(b))
                })
                .expect("non-empty tie set"),
        };
        let mut probs = vec![0.0; q_row.len()];
        probs[pick] = 1.0;
        Ok((max, probs))
    }
}

fn build_policy(
    q: Vec<Vec<f64>>,
    costs: &[Vec<f64>],
    rho: f64,
    tie_break: TieBreak,
    lambda: f64,
) -> Result<Policy> {
    let mut probs = Vec::with_capacity(q.len());
    let mut v_values = Vec::with_capacity(q.len());
    for (s, row) in q.iter().enumerate() {
        if let Some(a) = row.iter().position(|x| x.is_nan()) {
            return Err(CoreError::NanQValue { state: s, action: a });
        }
        let (v, p) = soft_backup(row, &costs[s], rho, tie_break)?;
        v_values.push(v);
        probs.push(p);
    }
    Ok(Policy {
        probs,
        q_values: q,
        v_values,
        lambda_used: lambda,
        rho,
    })
}

/// Softmax (or greedy) policy over a caller-supplied Q table. The cost table
/// feeds the `LowestCost` tie-break; `lambda_used` is left at 0 for the caller
/// to stamp via [`Policy::with_lambda`].
pub fn extract_policy(
    q_values: Vec<Vec<f64>>,
    costs: &[Vec<f64>],
    rho: f64,
    tie_break: TieBreak,
) -> Result<Policy> {
    if rho < 0.0 || !rho.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "rho must be finite and >= 0, got {rho}"
        )));
    }
    build_policy(q_values, costs, rho, tie_break, 0.0)
}

/// Exact backward sweeps of the soft-Q recursion on a model.
///
/// `Q(s,a) = r(s,a) - lambda*c(s,a) + gamma * (1 - terminal) * E[V(s')]`,
/// with V the temperature-`rho` log-sum-exp of the Q row. Finite-horizon mode
/// runs `cfg.horizon` sweeps; infinite-horizon mode iterates to `cfg.tol` and
/// reports failure to converge instead of hanging.
pub fn soft_value_iteration(
    model: &impl Dynamics,
    lambda: f64,
    cfg: &SoftQConfig,
) -> Result<Policy> {
    cfg.check()?;
    if lambda < 0.0 {
        return Err(CoreError::NegativeLambda(lambda));
    }
    let (n_states, n_actions) = (model.n_states(), model.n_actions());

    let mut rc = vec![vec![0.0; n_actions]; n_states];
    let mut costs = vec![vec![0.0; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            costs[s][a] = model.mean_cost(s, a);
            rc[s][a] = model.mean_reward(s, a) - lambda * costs[s][a];
        }
    }

    let sweep_cap = if cfg.horizon > 0 {
        cfg.horizon
    } else {
        if cfg.gamma >= 1.0 {
            return Err(CoreError::NonConvergent(format!(
                "infinite horizon with gamma = {} cannot converge; set a finite horizon",
                cfg.gamma
            )));
        }
        cfg.max_sweeps
    };

    let mut v = vec![0.0; n_states];
    let mut q = vec![vec![0.0; n_actions]; n_states];
    let mut converged = false;
    for _ in 0..sweep_cap {
        let mut v_new = vec![0.0; n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let term = model.terminal_prob(s, a);
                let mut cont = 0.0;
                if term < 1.0 {
                    let succ = model.successor_probs(s, a);
                    for (s2, p) in succ.iter().enumerate() {
                        cont += p * v[s2];
                    }
                }
                q[s][a] = rc[s][a] + cfg.gamma * (1.0 - term) * cont;
            }
            let (value, _) = soft_backup(&q[s], &costs[s], cfg.rho, cfg.tie_break)?;
            v_new[s] = value;
        }
        let delta = v
            .iter()
            .zip(&v_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = v_new;
        if delta < cfg.tol {
            converged = true;
            break;
        }
    }
    if cfg.horizon == 0 && !converged {
        return Err(CoreError::NonConvergent(format!(
            "max-norm change still above tol after {} sweeps",
            cfg.max_sweeps
        )));
    }

    build_policy(q, &costs, cfg.rho, cfg.tie_break, lambda)
}

/// Result of fitted-Q on logged data: the policy plus the (state, action)
/// pairs that never appeared in the log and were filled from fallbacks.
#[derive(Debug, Clone, PartialEq)]
pub struct FittedQ {
    pub policy: Policy,
    pub unestimated: Vec<(usize, usize)>,
}

/// Batch fitted-Q sweeps straight from the log, no model in between.
///
/// Each sweep replaces `Q(s,a)` with the empirical mean over logged
/// transitions at (s,a) of `r - lambda*c + gamma * V(next)`, where V is the
/// soft backup of the current table. On a fully covered log this reproduces
/// [`soft_value_iteration`] on the unsmoothed fitted model; pairs with no
/// observations fall back to the action-marginal mean and are flagged.
pub fn fitted_q_from_logs(train: &Dataset, lambda: f64, cfg: &SoftQConfig) -> Result<FittedQ> {
    cfg.check()?;
    if lambda < 0.0 {
        return Err(CoreError::NegativeLambda(lambda));
    }
    if train.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let (n_states, n_actions) = (train.n_states, train.n_actions);

    // Bucket transitions once: (rc, next) per (s,a), plus per-action pools
    // for the fallback cells.
    let mut cells: Vec<Vec<Vec<(f64, Option<usize>)>>> =
        vec![vec![Vec::new(); n_actions]; n_states];
    let mut action_pool: Vec<Vec<(f64, Option<usize>)>> = vec![Vec::new(); n_actions];
    let mut cost_sum = vec![vec![0.0; n_actions]; n_states];
    let mut action_cost = vec![(0.0, 0usize); n_actions];
    for tr in train.transitions() {
        let rc = tr.reward - lambda * tr.cost;
        cells[tr.state][tr.action].push((rc, tr.next_state));
        action_pool[tr.action].push((rc, tr.next_state));
        cost_sum[tr.state][tr.action] += tr.cost;
        action_cost[tr.action].0 += tr.cost;
        action_cost[tr.action].1 += 1;
    }
    let global_pool: Vec<(f64, Option<usize>)> =
        action_pool.iter().flatten().cloned().collect();

    let mut unestimated = Vec::new();
    let mut costs = vec![vec![0.0; n_actions]; n_states];
    for s in 0..n_states {
        for a in 0..n_actions {
            let k = cells[s][a].len();
            if k > 0 {
                costs[s][a] = cost_sum[s][a] / k as f64;
            } else {
                unestimated.push((s, a));
                costs[s][a] = if action_cost[a].1 > 0 {
                    action_cost[a].0 / action_cost[a].1 as f64
                } else {
                    let total: f64 = action_cost.iter().map(|(c, _)| c).sum();
                    let count: usize = action_cost.iter().map(|(_, n)| n).sum();
                    total / count as f64
                };
            }
        }
    }

    let sweep_cap = if cfg.horizon > 0 {
        cfg.horizon
    } else {
        if cfg.gamma >= 1.0 {
            return Err(CoreError::NonConvergent(
                "infinite horizon with gamma >= 1 on logged sweeps".into(),
            ));
        }
        cfg.max_sweeps
    };

    let backup_mean = |pool: &[(f64, Option<usize>)], v: &[f64]| -> f64 {
        let sum: f64 = pool
            .iter()
            .map(|(rc, next)| rc + cfg.gamma * next.map_or(0.0, |s2| v[s2]))
            .sum();
        sum / pool.len() as f64
    };

    let mut v = vec![0.0; n_states];
    let mut q = vec![vec![0.0; n_actions]; n_states];
    for sweep in 0..sweep_cap {
        let mut v_new = vec![0.0; n_states];
        for s in 0..n_states {
            for a in 0..n_actions {
                let pool: &[(f64, Option<usize>)] = if !cells[s][a].is_empty() {
                    &cells[s][a]
                } else if !action_pool[a].is_empty() {
                    &action_pool[a]
                } else {
                    &global_pool
                };
                q[s][a] = backup_mean(pool, &v);
            }
            let (value, _) = soft_backup(&q[s], &costs[s], cfg.rho, cfg.tie_break)?;
            v_new[s] = value;
        }
        let delta = v
            .iter()
            .zip(&v_new)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        v = v_new;
        if delta < cfg.tol {
            break;
        }
        if cfg.horizon == 0 && sweep + 1 == sweep_cap {
            return Err(CoreError::NonConvergent(format!(
                "fitted-Q change above tol after {} sweeps",
                cfg.max_sweeps
            )));
        }
    }

    let policy = build_policy(q, &costs, cfg.rho, cfg.tie_break, lambda)?;
    Ok(FittedQ {
        policy,
        unestimated,
    })
}
