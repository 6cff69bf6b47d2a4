//! Finite-horizon planning on a fitted model.
//!
//! Given any dual variable, [`plan`] computes soft-Q values by expanding the
//! successor tree to a fixed depth and evaluating it bottom-up — the model is
//! fitted once and re-planned for every lambda, so a bisection search costs
//! one cheap traversal per probe instead of a retrain. States repeated at the
//! same depth are memoized, collapsing the tree into a layered DAG.

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cpe::{EvalEstimate, Evaluator};
use crate::error::{CoreError, Result};
use crate::soft_q::{Dynamics, Policy, TieBreak};

/// Planning parameters: depth, temperature, dual variable and discount.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct PlanConfig {
    /// Planning depth H; must be >= 1 and at most the data horizon.
    pub horizon_h: usize,
    pub rho: f64,
    pub lambda: f64,
    pub gamma: f64,
    pub tie_break: TieBreak,
    /// Upper bound on memoized (depth, state) entries before the expansion is
    /// reported as truncated.
    pub node_budget: usize,
}

impl PlanConfig {
    pub fn new(horizon_h: usize, lambda: f64, rho: f64, gamma: f64) -> Self {
        PlanConfig {
            horizon_h,
            rho,
            lambda,
            gamma,
            tie_break: TieBreak::default(),
            node_budget: 1_000_000,
        }
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }
}

/// One point of a lambda sweep.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub lambda: f64,
    pub estimate: EvalEstimate,
}

/// Plan a policy by depth-H traversal from `initial_states` (all states when
/// empty). Leaf continuation value is 0; Q and V are evaluated bottom-up with
/// the reshaped reward at `cfg.lambda`. Never mutates the model.
pub fn plan(model: &impl Dynamics, cfg: &PlanConfig, initial_states: &[usize]) -> Result<Policy> {
    if cfg.horizon_h == 0 {
        return Err(CoreError::ZeroPlanDepth);
    }
    if cfg.lambda < 0.0 {
        return Err(CoreError::NegativeLambda(cfg.lambda));
    }
    let (n_states, n_actions) = (model.n_states(), model.n_actions());
    let roots: Vec<usize> = if initial_states.is_empty() {
        (0..n_states).collect()
    } else {
        let set: BTreeSet<usize> = initial_states.iter().copied().collect();
        if let Some(&bad) = set.iter().find(|s| **s >= n_states) {
            return Err(CoreError::IdOutOfRange {
                what: "state",
                id: bad,
                bound: n_states,
            });
        }
        set.into_iter().collect()
    };

    // Forward expansion, one memoized layer per depth.
    let mut layers: Vec<Vec<usize>> = vec![roots];
    let mut expanded = layers[0].len();
    for depth in 1..cfg.horizon_h {
        let mut next = BTreeSet::new();
        for &s in &layers[depth - 1] {
            for a in 0..n_actions {
                if model.terminal_prob(s, a) >= 1.0 {
                    continue;
                }
                for (s2, p) in model.successor_probs(s, a).iter().enumerate() {
                    if *p > 0.0 {
                        next.insert(s2);
                    }
                }
            }
        }
        if next.is_empty() {
            break;
        }
        expanded += next.len();
        if expanded > cfg.node_budget {
            return Err(CoreError::NodeBudgetExceeded {
                expanded,
                budget: cfg.node_budget,
            });
        }
        layers.push(next.into_iter().collect());
    }

    // Bottom-up evaluation; v holds the next-deeper layer's values.
    let mut v = vec![0.0; n_states];
    let mut per_layer: Vec<Vec<(usize, Vec<f64>)>> = vec![Vec::new(); layers.len()];
    for depth in (0..layers.len()).rev() {
        let mut v_new = vec![0.0; n_states];
        for &s in &layers[depth] {
            let mut q_row = vec![0.0; n_actions];
            let mut cost_row = vec![0.0; n_actions];
            for a in 0..n_actions {
                cost_row[a] = model.mean_cost(s, a);
                let rc = model.mean_reward(s, a) - cfg.lambda * cost_row[a];
                let term = model.terminal_prob(s, a);
                let mut cont = 0.0;
                if term < 1.0 {
                    for (s2, p) in model.successor_probs(s, a).iter().enumerate() {
                        cont += p * v[s2];
                    }
                }
                q_row[a] = rc + cfg.gamma * (1.0 - term) * cont;
            }
            let (value, _) = soft_backup_row(&q_row, &cost_row, cfg)?;
            v_new[s] = value;
            per_layer[depth].push((s, q_row));
        }
        v = v_new;
    }

    // Shallowest layer wins when a state shows up at several depths; states
    // outside every layer get the myopic row.
    let mut q_table: Vec<Option<Vec<f64>>> = vec![None; n_states];
    for layer in &per_layer {
        for (s, q_row) in layer {
            if q_table[*s].is_none() {
                q_table[*s] = Some(q_row.clone());
            }
        }
    }
    let mut q = Vec::with_capacity(n_states);
    let mut costs = Vec::with_capacity(n_states);
    for s in 0..n_states {
        let cost_row: Vec<f64> = (0..n_actions).map(|a| model.mean_cost(s, a)).collect();
        let row = q_table[s].take().unwrap_or_else(|| {
            (0..n_actions)
                .map(|a| model.mean_reward(s, a) - cfg.lambda * cost_row[a])
                .collect()
        });
        q.push(row);
        costs.push(cost_row);
    }
    crate::soft_q::extract_policy(q, &costs, cfg.rho, cfg.tie_break)
        .map(|p| p.with_lambda(cfg.lambda))
}

fn soft_backup_row(q_row: &[f64], cost_row: &[f64], cfg: &PlanConfig) -> Result<(f64, Vec<f64>)> {
    // Reuse the extraction machinery for a single row.
    let policy = crate::soft_q::extract_policy(
        vec![q_row.to_vec()],
        std::slice::from_ref(&cost_row.to_vec()),
        cfg.rho,
        cfg.tie_break,
    )?;
    Ok((policy.v_values[0], policy.probs.into_iter().next().unwrap()))
}

/// Plan and evaluate a policy for every lambda in an ascending grid against
/// one shared immutable model. Points are independent and run in parallel;
/// the output order matches the input grid.
pub fn lambda_sweep<D: Dynamics + Sync>(
    model: &D,
    lambdas: &[f64],
    cfg: &PlanConfig,
    evaluator: &Evaluator<'_>,
) -> Result<Vec<SweepPoint>> {
    if lambdas.is_empty() || lambdas.windows(2).any(|w| w[0] > w[1]) {
        return Err(CoreError::BadLambdaGrid);
    }
    lambdas
        .par_iter()
        .map(|&lambda| {
            let policy = plan(model, &cfg.with_lambda(lambda), &[])?;
            let estimate = evaluator.evaluate(&policy, model)?;
            Ok(SweepPoint { lambda, estimate })
        })
        .collect()
}

/// Evenly spaced grid of `count` points over `[lo, hi]`.
pub fn lambda_grid(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count <= 1 {
        return vec![lo];
    }
    (0..count)
        .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
        .collect()
}

/// Write sweep points as a `lambda,reward,cost` table.
pub fn write_sweep_csv(points: &[SweepPoint], path: impl AsRef<std::path::Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("lambda,reward,cost\n");
    for p in points {
        out.push_str(&format!(
            "{},{},{}\n",
            p.lambda, p.estimate.j_reward, p.estimate.j_cost
        ));
    }
    std::fs::write(path, out).map_err(|e| CoreError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::fit_models;
    use crate::soft_q::{soft_value_iteration, SoftQConfig};
    use crate::synthetic::toy_fixture_sized;

    #[test]
    fn depth_one_is_myopic() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let cfg = PlanConfig::new(1, 0.0, 0.0, 1.0);
        let policy = plan(&spec, &cfg, &[0]).unwrap();
        // argmax of the immediate reward row at state 0
        assert_eq!(policy.probs[0], vec![0.0, 1.0]);
        assert_eq!(policy.q_values[0], vec![1.0, 2.0]);
    }

    #[test]
    fn depth_zero_is_rejected() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let cfg = PlanConfig::new(0, 0.0, 0.0, 1.0);
        assert!(matches!(plan(&spec, &cfg, &[]), Err(CoreError::ZeroPlanDepth)));
    }

    #[test]
    fn matches_value_iteration_on_fitted_model() {
        let (_, data) = toy_fixture_sized(5_000, 1);
        let model = fit_models(&data, 0.0).unwrap();
        for lambda in [0.0, 0.5, 1.0, 2.0] {
            let planned = plan(&model, &PlanConfig::new(2, lambda, 0.0, 1.0), &[]).unwrap();
            let swept =
                soft_value_iteration(&model, lambda, &SoftQConfig::new(2, 1.0, 0.0)).unwrap();
            for s in 0..3 {
                for a in 0..2 {
                    assert!(
                        (planned.q_values[s][a] - swept.q_values[s][a]).abs() < 1e-9,
                        "lambda {lambda} cell ({s},{a})"
                    );
                }
                assert_eq!(planned.probs[s], swept.probs[s], "lambda {lambda}");
            }
        }
    }

    #[test]
    fn planning_leaves_the_model_untouched() {
        let (_, data) = toy_fixture_sized(500, 2);
        let model = fit_models(&data, 0.1).unwrap();
        let before = model.fingerprint();
        for lambda in [0.0, 1.0, 2.0] {
            plan(&model, &PlanConfig::new(2, lambda, 0.5, 1.0), &[]).unwrap();
        }
        assert_eq!(model.fingerprint(), before);
    }

    #[test]
    fn sweep_costs_are_non_increasing_on_toy() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let cfg = PlanConfig::new(2, 0.0, 0.0, 1.0);
        let points = lambda_sweep(
            &spec,
            &[0.0, 1.0, 2.0],
            &cfg,
            &Evaluator::Exact(&spec),
        )
        .unwrap();
        let costs: Vec<f64> = points.iter().map(|p| p.estimate.j_cost).collect();
        assert_eq!(costs, vec![4.0, 4.0, 2.0]);
    }

    #[test]
    fn single_lambda_sweep_equals_plan_plus_simulate() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let cfg = PlanConfig::new(2, 0.0, 0.0, 1.0);
        let points = lambda_sweep(&spec, &[0.0], &cfg, &Evaluator::Exact(&spec)).unwrap();
        let policy = plan(&spec, &cfg, &[]).unwrap();
        let direct = crate::synthetic::simulate_policy(&spec, &policy, 0, 0).unwrap();
        assert_eq!(points[0].estimate, direct);
    }

    #[test]
    fn unsorted_grid_is_rejected() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let cfg = PlanConfig::new(2, 0.0, 0.0, 1.0);
        assert!(matches!(
            lambda_sweep(&spec, &[1.0, 0.5], &cfg, &Evaluator::Exact(&spec)),
            Err(CoreError::BadLambdaGrid)
        ));
        assert!(matches!(
            lambda_sweep(&spec, &[], &cfg, &Evaluator::Exact(&spec)),
            Err(CoreError::BadLambdaGrid)
        ));
    }

    #[test]
    fn node_budget_reports_truncation() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let mut cfg = PlanConfig::new(2, 0.0, 0.0, 1.0);
        cfg.node_budget = 2;
        assert!(matches!(
            plan(&spec, &cfg, &[]),
            Err(CoreError::NodeBudgetExceeded { .. })
        ));
    }

    #[test]
    fn sweep_csv_shape() {
        let (spec, _) = toy_fixture_sized(1, 0);
        let cfg = PlanConfig::new(2, 0.0, 0.0, 1.0);
        let points =
            lambda_sweep(&spec, &[0.0, 2.0], &cfg, &Evaluator::Exact(&spec)).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sweep.csv");
        write_sweep_csv(&points, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("lambda,reward,cost"));
        assert_eq!(lines.count(), 2);
    }
}
