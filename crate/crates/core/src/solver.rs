//! Bisection search over the dual variable of the budget-constrained problem.
//!
//! The policy cost is non-increasing in the dual variable lambda, so the
//! budget crossing can be bracketed and halved: plan a policy at the midpoint,
//! estimate its cost counterfactually, and move the infeasible bound up or the
//! feasible bound down. Termination is `J_C <= b` within `delta` of the
//! budget; when the deterministic-policy cost jumps straight across the budget
//! (a duality-gap boundary) the search exhausts its bracket resolution and
//! returns the feasible-side policy instead.
//!
//! A subgradient dual-ascent loop is included purely as the baseline the
//! bisection is compared against, and a depth-1 variant of the same search
//! serves as the myopic contextual-bandit reference row in reports.

use serde::{Deserialize, Serialize};

use crate::cpe::Evaluator;
use crate::data::Dataset;
use crate::error::{CoreError, Result};
use crate::planner::{plan, PlanConfig};
use crate::soft_q::{Dynamics, Policy};

/// Search interval for the dual variable. The lower end is expected to be
/// infeasible (cost at or above budget) and the upper end feasible; both are
/// checked at solve entry.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LambdaBracket {
    pub lambda_l: f64,
    pub lambda_u: f64,
}

impl LambdaBracket {
    pub fn new(lambda_l: f64, lambda_u: f64) -> Result<Self> {
        if !(lambda_l >= 0.0 && lambda_u > lambda_l && lambda_u.is_finite()) {
            return Err(CoreError::InvalidBracket {
                lower: lambda_l,
                upper: lambda_u,
            });
        }
        Ok(LambdaBracket { lambda_l, lambda_u })
    }
}

/// Which bracket bound an iteration moved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepDirection {
    /// Cost at or above budget: raise the lower bound.
    RaiseLower,
    /// Cost under budget: lower the upper bound.
    LowerUpper,
    /// Budget matched within delta; search stopped here.
    Terminate,
}

/// One probe of the dual variable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub lambda: f64,
    pub j_reward: f64,
    pub j_cost: f64,
    pub direction: StepDirection,
}

/// Entry-check evaluation at a bracket end.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryCheck {
    pub lambda: f64,
    pub j_reward: f64,
    pub j_cost: f64,
}

/// Full trace of a dual solve: per-iteration probes, the selected dual
/// variable and policy, the dual value at the solution, and feasibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverReport {
    pub iterations: Vec<IterationRow>,
    pub lambda_star: f64,
    pub policy: Policy,
    pub j_reward: f64,
    pub j_cost: f64,
    /// `-J + lambda * (J_C - b)` at the returned solution.
    pub dual_value: f64,
    pub feasible: bool,
    pub converged: bool,
    /// Set when the bracket hit its resolution without delta-termination and
    /// the feasible-side policy was returned.
    pub duality_gap_boundary: bool,
    pub budget: f64,
    pub delta: f64,
    pub entry_low: Option<EntryCheck>,
    pub entry_high: Option<EntryCheck>,
    pub warnings: Vec<String>,
    /// Total policy evaluations including the two entry checks.
    pub evaluations: usize,
}

/// Bisection parameters. `delta` defaults to `0.02 * budget` and
/// `lambda_resolution` to `1e-4 * (lambda_u - lambda_l)`.
#[derive(Debug, Clone, Copy)]
pub struct SolveParams {
    pub budget: f64,
    pub delta: Option<f64>,
    pub lambda_resolution: Option<f64>,
    pub plan_cfg: PlanConfig,
}

impl SolveParams {
    pub fn new(budget: f64, plan_cfg: PlanConfig) -> Self {
        SolveParams {
            budget,
            delta: None,
            lambda_resolution: None,
            plan_cfg,
        }
    }
}

/// Dual-ascent parameters; the baseline shares `delta` semantics with the
/// bisection so both stop at the same budget gap.
#[derive(Debug, Clone, Copy)]
pub struct DualAscentParams {
    pub budget: f64,
    pub step_size: f64,
    pub max_iters: usize,
    pub delta: Option<f64>,
    pub plan_cfg: PlanConfig,
}

/// Lagrangian dual value `-j + lambda * (j_c - b)`.
pub fn dual_value(lambda: f64, j_reward: f64, j_cost: f64, budget: f64) -> f64 {
    -j_reward + lambda * (j_cost - budget)
}

/// Data-driven upper bound for the dual variable.
///
/// Per-action reward and cost levels are the unweighted average of the
/// per-(state, action) empirical means over states with data; actions are
/// sorted by cost and the bound is the largest reward-per-cost trade-off
/// ratio against the cheapest action, plus `margin`. Beyond the bound the
/// reshaped objective always prefers the cheapest action.
pub fn lambda_upper_bound(val: &Dataset, margin: f64) -> Result<f64> {
    if val.is_empty() {
        return Err(CoreError::EmptyDataset);
    }
    let (n_states, n_actions) = (val.n_states, val.n_actions);
    let mut sums = vec![vec![(0.0, 0.0, 0u64); n_actions]; n_states];
    for tr in val.transitions() {
        let cell = &mut sums[tr.state][tr.action];
        cell.0 += tr.reward;
        cell.1 += tr.cost;
        cell.2 += 1;
    }
    let mut means = Vec::new(); // (action, mean reward, mean cost)
    for a in 0..n_actions {
        let mut r_acc = 0.0;
        let mut c_acc = 0.0;
        let mut states = 0usize;
        for row in sums.iter() {
            let (r, c, k) = row[a];
            if k > 0 {
                r_acc += r / k as f64;
                c_acc += c / k as f64;
                states += 1;
            }
        }
        if states > 0 {
            means.push((a, r_acc / states as f64, c_acc / states as f64));
        }
    }
    if means.len() < 2 {
        return Err(CoreError::SingleAction(means.len()));
    }
    means.sort_by(|x, y| x.2.partial_cmp(&y.2).unwrap_or(std::cmp::Ordering::Equal));
    for pair in means.windows(2) {
        if pair[0].2 == pair[1].2 {
            return Err(CoreError::DegenerateCostOrdering {
                a: pair[0].0,
                b: pair[1].0,
                cost: pair[0].2,
            });
        }
    }
    let (_, r0, c0) = means[0];
    let max_ratio = means[1..]
        .iter()
        .map(|(_, r, c)| (r0 - r) / (c0 - c))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(max_ratio + margin)
}

struct Candidate {
    lambda: f64,
    policy: Policy,
    j_reward: f64,
    j_cost: f64,
}

/// Bisection over the dual variable (monotone-cost search).
///
/// The model must be fitted on the training split; the evaluator carries the
/// validation data (or the exact spec). Entry checks validate both bracket
/// ends: a feasible lower end means the constraint is inactive and the
/// lower-end policy is returned with `lambda_star = lambda_l`; an infeasible
/// upper end aborts, since not even the cost-minimizing policy fits the
/// budget.
pub fn bisection_solve<D: Dynamics>(
    model: &D,
    params: &SolveParams,
    bracket: LambdaBracket,
    evaluator: &Evaluator<'_>,
) -> Result<SolverReport> {
    let bracket = LambdaBracket::new(bracket.lambda_l, bracket.lambda_u)?;
    let budget = params.budget;
    let delta = params.delta.unwrap_or(0.02 * budget);
    let width = bracket.lambda_u - bracket.lambda_l;
    let resolution = params.lambda_resolution.unwrap_or(1e-4 * width);
    let mut warnings = Vec::new();
    let mut evaluations = 0usize;

    let probe = |lambda: f64, evals: &mut usize| -> Result<Candidate> {
        let policy = plan(model, &params.plan_cfg.with_lambda(lambda), &[])?;
        let est = evaluator.evaluate(&policy, model)?;
        *evals += 1;
        Ok(Candidate {
            lambda,
            policy,
            j_reward: est.j_reward,
            j_cost: est.j_cost,
        })
    };

    let low = probe(bracket.lambda_l, &mut evaluations)?;
    let entry_low = Some(EntryCheck {
        lambda: low.lambda,
        j_reward: low.j_reward,
        j_cost: low.j_cost,
    });
    if low.j_cost <= budget {
        // Constraint inactive: even the most aggressive policy in the bracket
        // fits the budget, so the optimal dual variable is the lower end.
        let warning = format!(
            "constraint inactive: cost {:.6} at lambda {:.6} is within budget {:.6}; returning the lower-end policy",
            low.j_cost, low.lambda, budget
        );
        log::warn!("{warning}");
        warnings.push(warning);
        let dual = dual_value(low.lambda, low.j_reward, low.j_cost, budget);
        return Ok(SolverReport {
            iterations: Vec::new(),
            lambda_star: low.lambda,
            j_reward: low.j_reward,
            j_cost: low.j_cost,
            policy: low.policy,
            dual_value: dual,
            feasible: true,
            converged: true,
            duality_gap_boundary: false,
            budget,
            delta,
            entry_low,
            entry_high: None,
            warnings,
            evaluations,
        });
    }

    let high = probe(bracket.lambda_u, &mut evaluations)?;
    let entry_high = Some(EntryCheck {
        lambda: high.lambda,
        j_reward: high.j_reward,
        j_cost: high.j_cost,
    });
    if high.j_cost > budget {
        return Err(CoreError::BracketInfeasible {
            lambda: high.lambda,
            cost: high.j_cost,
            budget,
        });
    }

    let mut lambda_l = bracket.lambda_l;
    let mut lambda_u = bracket.lambda_u;
    let mut iterations: Vec<IterationRow> = Vec::new();
    let mut best_feasible = high;
    let mut history: Vec<(f64, f64)> = Vec::new(); // (lambda, j_cost) probes

    loop {
        if lambda_u - lambda_l <= resolution {
            // Duality-gap boundary: the cost stepped over the budget without
            // entering the delta band. Return the feasible side.
            let c = best_feasible;
            let warning = format!(
                "duality-gap boundary: bracket narrowed to {:.3e} without cost entering [b - delta, b]; returning feasible-side policy at lambda {:.6}",
                lambda_u - lambda_l,
                c.lambda
            );
            log::warn!("{warning}");
            warnings.push(warning);
            let dual = dual_value(c.lambda, c.j_reward, c.j_cost, budget);
            return Ok(SolverReport {
                iterations,
                lambda_star: c.lambda,
                j_reward: c.j_reward,
                j_cost: c.j_cost,
                policy: c.policy,
                dual_value: dual,
                feasible: true,
                converged: false,
                duality_gap_boundary: true,
                budget,
                delta,
                entry_low,
                entry_high,
                warnings,
                evaluations,
            });
        }

        let lambda_m = 0.5 * (lambda_l + lambda_u);
        let mid = probe(lambda_m, &mut evaluations)?;

        // Monotonicity sanity: a larger lambda should not cost strictly more.
        for &(l_prev, c_prev) in &history {
            let violates = (lambda_m > l_prev && mid.j_cost > c_prev + 1e-9)
                || (lambda_m < l_prev && mid.j_cost + 1e-9 < c_prev);
            if violates {
                let warning = format!(
                    "cost ordering violated: J_C({:.6}) = {:.6} vs J_C({:.6}) = {:.6}; estimator noise may be steering the search",
                    lambda_m, mid.j_cost, l_prev, c_prev
                );
                log::warn!("{warning}");
                warnings.push(warning);
                break;
            }
        }
        history.push((lambda_m, mid.j_cost));

        if mid.j_cost <= budget && (budget - mid.j_cost) < delta {
            iterations.push(IterationRow {
                lambda: lambda_m,
                j_reward: mid.j_reward,
                j_cost: mid.j_cost,
                direction: StepDirection::Terminate,
            });
            let dual = dual_value(lambda_m, mid.j_reward, mid.j_cost, budget);
            return Ok(SolverReport {
                iterations,
                lambda_star: lambda_m,
                j_reward: mid.j_reward,
                j_cost: mid.j_cost,
                policy: mid.policy,
                dual_value: dual,
                feasible: true,
                converged: true,
                duality_gap_boundary: false,
                budget,
                delta,
                entry_low,
                entry_high,
                warnings,
                evaluations,
            });
        }

        if mid.j_cost < budget {
            // Feasible but not close enough: the crossing sits below.
            lambda_u = lambda_m;
            iterations.push(IterationRow {
                lambda: lambda_m,
                j_reward: mid.j_reward,
                j_cost: mid.j_cost,
                direction: StepDirection::LowerUpper,
            });
            if lambda_m < best_feasible.lambda {
                best_feasible = mid;
            }
        } else {
            // Over budget: the crossing sits above.
            lambda_l = lambda_m;
            iterations.push(IterationRow {
                lambda: lambda_m,
                j_reward: mid.j_reward,
                j_cost: mid.j_cost,
                direction: StepDirection::RaiseLower,
            });
        }
    }
}

/// Depth-1 planning through the identical bisection machinery: the myopic
/// constrained-bandit reference, which ignores correlations between steps.
pub fn constrained_bandit_baseline<D: Dynamics>(
    model: &D,
    params: &SolveParams,
    bracket: LambdaBracket,
    evaluator: &Evaluator<'_>,
) -> Result<SolverReport> {
    let mut myopic = *params;
    myopic.plan_cfg.horizon_h = 1;
    bisection_solve(model, &myopic, bracket, evaluator)
}

/// Subgradient dual ascent `lambda <- max(0, lambda + step * (J_C - b))`.
///
/// Convergence-speed baseline only. Stops on the same delta band as the
/// bisection, or immediately when `lambda = 0` is already feasible (inactive
/// constraint); otherwise runs all `max_iters` and reports non-convergence.
pub fn dual_ascent_solve<D: Dynamics>(
    model: &D,
    params: &DualAscentParams,
    evaluator: &Evaluator<'_>,
) -> Result<SolverReport> {
    if params.step_size < 0.0 || !params.step_size.is_finite() {
        return Err(CoreError::InvalidConfig(format!(
            "step_size must be finite and >= 0, got {}",
            params.step_size
        )));
    }
    let budget = params.budget;
    let delta = params.delta.unwrap_or(0.02 * budget);
    let mut lambda = 0.0_f64;
    let mut iterations = Vec::new();
    let mut best_feasible: Option<Candidate> = None;
    let mut last: Option<Candidate> = None;
    let mut warnings = Vec::new();
    let mut converged = false;

    for _ in 0..params.max_iters {
        let policy = plan(model, &params.plan_cfg.with_lambda(lambda), &[])?;
        let est = evaluator.evaluate(&policy, model)?;
        let cand = Candidate {
            lambda,
            policy,
            j_reward: est.j_reward,
            j_cost: est.j_cost,
        };
        let gap = cand.j_cost - budget;
        let done_delta = cand.j_cost <= budget && -gap < delta;
        let done_inactive = lambda == 0.0 && cand.j_cost <= budget;
        let next_lambda = (lambda + params.step_size * gap).max(0.0);
        iterations.push(IterationRow {
            lambda,
            j_reward: cand.j_reward,
            j_cost: cand.j_cost,
            direction: if done_delta || done_inactive {
                StepDirection::Terminate
            } else if next_lambda >= lambda {
                StepDirection::RaiseLower
            } else {
                StepDirection::LowerUpper
            },
        });
        if cand.j_cost <= budget {
            let better = best_feasible
                .as_ref()
                .map_or(true, |b| cand.lambda < b.lambda);
            if better {
                best_feasible = Some(Candidate {
                    lambda: cand.lambda,
                    policy: cand.policy.clone(),
                    j_reward: cand.j_reward,
                    j_cost: cand.j_cost,
                });
            }
        }
        last = Some(cand);
        if done_delta || done_inactive {
            converged = true;
            break;
        }
        lambda = next_lambda;
    }

    let evaluations = iterations.len();
    if !converged {
        let warning = format!(
            "dual ascent did not reach |J_C - b| < {delta:.6} within {} iterations",
            params.max_iters
        );
        log::warn!("{warning}");
        warnings.push(warning);
    }
    // Prefer the converged iterate; otherwise the best feasible one seen.
    let chosen = if converged {
        last.expect("converged implies an iterate")
    } else if let Some(best) = best_feasible {
        best
    } else {
        last.ok_or_else(|| CoreError::InvalidConfig("max_iters must be >= 1".into()))?
    };
    let feasible = chosen.j_cost <= budget;
    let dual = dual_value(chosen.lambda, chosen.j_reward, chosen.j_cost, budget);
    Ok(SolverReport {
        iterations,
        lambda_star: chosen.lambda,
        j_reward: chosen.j_reward,
        j_cost: chosen.j_cost,
        policy: chosen.policy,
        dual_value: dual,
        feasible,
        converged,
        duality_gap_boundary: false,
        budget,
        delta,
        entry_low: None,
        entry_high: None,
        warnings,
        evaluations,
    })
}
