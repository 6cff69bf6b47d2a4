//! Count-based tabular world model fitted from logged data.
//!
//! Transition rows are add-alpha smoothed empirical successor distributions,
//! reward and cost are per-(state, action) empirical means, and termination is
//! the empirical fraction of logged steps that ended the episode. Pairs with
//! zero visits fall back to the action-marginal mean with a uniform successor
//! row and are flagged through `visit_counts`. The same interface would take a
//! regression model over richer features; everything downstream only sees
//! [`Dynamics`].

use std::fs;
use std::hash::{Hash, Hasher};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::soft_q::Dynamics;

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Default add-alpha smoothing; keeps successor probabilities strictly
/// positive without disturbing well-visited cells.
pub const DEFAULT_SMOOTHING: f64 = 0.1;

/// Fitted tabular transition, reward, cost and termination estimates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldModel {
    pub n_states: usize,
    pub n_actions: usize,
    /// Successor distribution per (state, action), conditional on the episode
    /// continuing; each row sums to 1.
    pub t_hat: Vec<Vec<Vec<f64>>>,
    /// Empirical probability that the episode ends after (state, action).
    pub terminal: Vec<Vec<f64>>,
    pub r_hat: Vec<Vec<f64>>,
    pub c_hat: Vec<Vec<f64>>,
    pub visit_counts: Vec<Vec<u64>>,
    /// Smoothing used at fit time; recorded for provenance.
    pub smoothing: f64,
}

/// Holdout accuracy of a fitted model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub reward_mae: f64,
    pub cost_mae: f64,
    /// Mean negative log-likelihood of the observed outcome (successor or
    /// termination) under the fitted kernel.
    pub transition_log_loss: f64,
    /// Fraction of (state, action) pairs with at least one training visit.
    pub coverage: f64,
}

/// Lookup result for one (state, action) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction<'a> {
    pub successor_probs: &'a [f64],
    pub terminal_prob: f64,
    pub reward: f64,
    pub cost: f64,
    /// True when the cell had no training visits and holds fallback values.
    pub fallback: bool,
}

impl WorldModel {
    pub fn predict(&self, state: usize, action: usize) -> Result<Prediction<'_>> {
        if state >= self.n_states {
            return Err(CoreError::IdOutOfRange {
                what: "state",
                id: state,
                bound: self.n_states,
            });
        }
        if action >= self.n_actions {
            return Err(CoreError::IdOutOfRange {
                what: "action",
                id: action,
                bound: self.n_actions,
            });
        }
        Ok(Prediction {
            successor_probs: &self.t_hat[state][action],
            terminal_prob: self.terminal[state][action],
            reward: self.r_hat[state][action],
            cost: self.c_hat[state][action],
            fallback: self.visit_counts[state][action] == 0,
        })
    }

    pub fn is_fallback(&self, state: usize, action: usize) -> bool {
        self.visit_counts[state][action] == 0
    }

    pub fn unvisited_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (s, row) in self.visit_counts.iter().enumerate() {
            for (a, &k) in row.iter().enumerate() {
                if k == 0 {
                    out.push((s, a));
                }
            }
        }
        out
    }

    /// Order-stable hash of every table; planning must leave it unchanged.
    pub fn fingerprint(&self) -> u64 {
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.n_states.hash(&mut hasher);
        self.n_actions.hash(&mut hasher);
        for rows in &self.t_hat {
            for row in rows {
                for p in row {
                    p.to_bits().hash(&mut hasher);
                }
            }
        }
        for table in [&self.terminal, &self.r_hat, &self.c_hat] {
            for row in table.iter() {
                for x in row {
                    x.to_bits().hash(&mut hasher);
                }
            }
        }
        self.visit_counts.hash(&mut hasher);
        hasher.finish()
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            model: self.clone(),
        };
        let json = serde_json::to_string_pretty(&file)?;
        fs::write(path, json).map_err(|e| CoreError::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let raw = fs::read_to_string(path).map_err(|e| CoreError::io(path, e))?;
        let file: ModelFile = serde_json::from_str(&raw)?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(CoreError::FormatVersion {
                found: file.format_version,
                expected: MODEL_FORMAT_VERSION,
            });
        }
        Ok(file.model)
    }
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    #[serde(flatten)]
    model: WorldModel,
}

impl Dynamics for WorldModel {
    fn n_states(&self) -> usize {
        self.n_states
    }
    fn n_actions(&self) -> usize {
        self.n_actions
    }
    fn mean_reward(&self, state: usize, action: usize) -> f64 {
        self.r_hat[state][action]
    }
    fn mean_cost(&self, state: usize, action: usize) -> f64 {
        self.c_hat[state][action]
    }
    fn terminal_prob(&self, state: usize, action: usize) -> f64 {
        self.terminal[state][action]
    }
    fn successor_probs(&self, state: usize, action: usize) -> &[f64] {
        &self.t_hat[state][action]
    }
}

/// Fit transition, reward, cost and termination tables from logged data.
pub fn fit_models(train: &Dataset, smoothing: f64) -> Result<WorldModel> {
    if train.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    if !(smoothing >= 0.0) {
        return Err(CoreError::InvalidConfig(format!(
            "smoothing must be >= 0, got {smoothing}"
        )));
    }
    let (n_states, n_actions) = (train.n_states, train.n_actions);

    let mut visits = vec![vec![0u64; n_actions]; n_states];
    let mut reward_sum = vec![vec![0.0; n_actions]; n_states];
    let mut cost_sum = vec![vec![0.0; n_actions]; n_states];
    let mut terminal_count = vec![vec![0u64; n_actions]; n_states];
    let mut succ_count = vec![vec![vec![0u64; n_states]; n_actions]; n_states];
    // Action-level aggregates feed the fallback for unvisited pairs.
    let mut act_visits = vec![0u64; n_actions];
    let mut act_reward = vec![0.0; n_actions];
    let mut act_cost = vec![0.0; n_actions];
    let mut act_terminal = vec![0u64; n_actions];

    for tr in train.transitions() {
        let (s, a) = (tr.state, tr.action);
        visits[s][a] += 1;
        reward_sum[s][a] += tr.reward;
        cost_sum[s][a] += tr.cost;
        act_visits[a] += 1;
        act_reward[a] += tr.reward;
        act_cost[a] += tr.cost;
        match tr.next_state {
            Some(s2) => succ_count[s][a][s2] += 1,
            None => {
                terminal_count[s][a] += 1;
                act_terminal[a] += 1;
            }
        }
    }
    let total_visits: u64 = act_visits.iter().sum();
    let global_reward: f64 = act_reward.iter().sum::<f64>() / total_visits as f64;
    let global_cost: f64 = act_cost.iter().sum::<f64>() / total_visits as f64;
    let global_terminal: f64 =
        act_terminal.iter().sum::<u64>() as f64 / total_visits as f64;

    let uniform_row = vec![1.0 / n_states as f64; n_states];
    let mut t_hat = vec![vec![uniform_row.clone(); n_actions]; n_states];
    let mut terminal = vec![vec![0.0; n_actions]; n_states];
    let mut r_hat = vec![vec![0.0; n_actions]; n_states];
    let mut c_hat = vec![vec![0.0; n_actions]; n_states];

    for s in 0..n_states {
        for a in 0..n_actions {
            let k = visits[s][a];
            if k > 0 {
                let kf = k as f64;
                r_hat[s][a] = reward_sum[s][a] / kf;
                c_hat[s][a] = cost_sum[s][a] / kf;
                terminal[s][a] = terminal_count[s][a] as f64 / kf;
                let continuing = k - terminal_count[s][a];
                if continuing > 0 || smoothing > 0.0 {
                    let denom = continuing as f64 + smoothing * n_states as f64;
                    if denom > 0.0 && continuing > 0 {
                        for s2 in 0..n_states {
                            t_hat[s][a][s2] =
                                (succ_count[s][a][s2] as f64 + smoothing) / denom;
                        }
                    }
                    // all-terminal cells keep the uniform placeholder row
                }
            } else if act_visits[a] > 0 {
                let kf = act_visits[a] as f64;
                r_hat[s][a] = act_reward[a] / kf;
                c_hat[s][a] = act_cost[a] / kf;
                terminal[s][a] = act_terminal[a] as f64 / kf;
            } else {
                r_hat[s][a] = global_reward;
                c_hat[s][a] = global_cost;
                terminal[s][a] = global_terminal;
            }
        }
    }

    Ok(WorldModel {
        n_states,
        n_actions,
        t_hat,
        terminal,
        r_hat,
        c_hat,
        visit_counts: visits,
        smoothing,
    })
}

/// Holdout accuracy: mean absolute error of the reward and cost tables
/// against realized values, and categorical log-loss of the fitted kernel.
pub fn model_report(model: &WorldModel, val: &Dataset) -> Result<ModelReport> {
    if val.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let mut reward_abs = 0.0;
    let mut cost_abs = 0.0;
    let mut log_loss = 0.0;
    let n = val.transitions().len() as f64;
    for tr in val.transitions() {
        let pred = model.predict(tr.state, tr.action)?;
        reward_abs += (pred.reward - tr.reward).abs();
        cost_abs += (pred.cost - tr.cost).abs();
        let p_event = match tr.next_state {
            None => pred.terminal_prob,
            Some(s2) => (1.0 - pred.terminal_prob) * pred.successor_probs[s2],
        };
        log_loss -= p_event.max(f64::MIN_POSITIVE).ln();
    }
    let covered = model
        .visit_counts
        .iter()
        .flatten()
        .filter(|&&k| k > 0)
        .count();
    Ok(ModelReport {
        reward_mae: reward_abs / n,
        cost_mae: cost_abs / n,
        transition_log_loss: log_loss / n,
        coverage: covered as f64 / (model.n_states * model.n_actions) as f64,
    })
}
