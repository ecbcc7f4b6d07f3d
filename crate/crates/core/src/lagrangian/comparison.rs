//! A single weight against the summed weights of a family of maximal paths.

use serde::{Deserialize, Serialize};

use super::approx::ApproxWeights;
use crate::error::{Error, Result};
use crate::law::WeightLaw;
use crate::ode::{solve_backward, Quadrature, SolveMethod};
use crate::step::StepFunction;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub horizon: f64,
    pub w_hat: f64,
    /// Largest `W(t) - Σ_{i active at t} W_i(t)` seen on the grid.
    pub worst_gap: f64,
    pub pointwise_ok: bool,
    pub single_cost: f64,
    pub family_cost: f64,
    pub cost_ok: bool,
}

impl ComparisonReport {
    pub fn holds(&self) -> bool {
        self.pointwise_ok && self.cost_ok
    }
}

/// Sum of the elementary weights active at time `t` (those with `start < t <= end`).
pub fn active_sum(aw: &ApproxWeights, t: f64) -> f64 {
    aw.decomposition
        .paths
        .iter()
        .filter(|p| p.start < t && t <= p.end)
        .map(|p| aw.weights[&p.id].eval(t - p.start))
        .sum()
}

/// Solves `W' = -f(W)`, `W(T) = w_hat` on `[0, horizon]` and compares it with
/// the family's weights, pointwise and after integrating `W^alpha`.
///
/// `horizon` may not exceed any maximal path length and `w_hat` may not
/// exceed the family's active weight at the horizon.
pub fn multi_path_comparison(
    aw: &ApproxWeights,
    f: &WeightLaw,
    alpha: f64,
    w_hat: f64,
    horizon: f64,
) -> Result<ComparisonReport> {
    f.scalar_rate()?;
    let shortest = aw
        .decomposition
        .maximal
        .iter()
        .map(|m| m.length())
        .fold(f64::INFINITY, f64::min);
    if !(horizon > 0.0 && horizon <= shortest) {
        return Err(Error::PreconditionViolated(format!(
            "horizon {horizon} must lie in (0, {shortest}]"
        )));
    }
    let top = active_sum(aw, horizon);
    if !(w_hat > 0.0 && w_hat <= top * (1.0 + 1e-15)) {
        return Err(Error::PreconditionViolated(format!(
            "terminal weight {w_hat} must lie in (0, {top}]"
        )));
    }
    let single = solve_backward(
        f,
        &StepFunction::constant(w_hat, horizon)?,
        horizon,
        0.0,
        SolveMethod::ClosedForm,
    )?;

    let mut knots: Vec<f64> = vec![0.0, horizon];
    for p in &aw.decomposition.paths {
        for k in p.multiplicity.knots() {
            knots.push(p.start + k);
        }
    }
    knots.retain(|&k| k >= 0.0 && k <= horizon);
    knots.sort_by(|a, b| a.partial_cmp(b).unwrap());
    knots.dedup();
    let mut worst_gap = f64::NEG_INFINITY;
    let mut pointwise_ok = true;
    for w in knots.windows(2) {
        for k in 1..=32 {
            let t = w[0] + (w[1] - w[0]) * k as f64 / 32.0;
            let lhs = single.eval(t);
            let rhs = active_sum(aw, t);
            worst_gap = worst_gap.max(lhs - rhs);
            if lhs > rhs + 1e-12 * rhs.max(1.0) {
                pointwise_ok = false;
            }
        }
    }

    let single_cost = single.integrate_power(alpha, Quadrature::ClosedForm)?;
    let mut family_cost = 0.0;
    for p in &aw.decomposition.paths {
        if p.start >= horizon {
            continue;
        }
        let upto = p.end.min(horizon) - p.start;
        family_cost += aw.weights[&p.id].integrate_power_range(alpha, 0.0, upto, Quadrature::ClosedForm)?;
    }
    let cost_ok = single_cost <= family_cost + 1e-12 * family_cost.max(1.0);
    Ok(ComparisonReport {
        horizon,
        w_hat,
        worst_gap,
        pointwise_ok,
        single_cost,
        family_cost,
        cost_ok,
    })
}
