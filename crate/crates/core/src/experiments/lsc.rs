//! Numerical check of lower semicontinuity of the weighted cost along a plan sequence.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::sequences::PlanSequence;
use crate::error::{Error, Result};
use crate::lagrangian::{default_schedule, limit_cost, ApproxOptions, LimitOutcome};
use crate::law::LawSpec;
use crate::measure::IrrigationPlan;

#[derive(Debug, Clone, PartialEq)]
pub struct LscOptions {
    /// Plans `χ_1 ..= χ_N` are evaluated.
    pub n_max: usize,
    pub slack: f64,
    /// Explicit ε schedule; defaults to `M · 2^-k` per plan.
    pub schedule: Option<Vec<f64>>,
    /// Doublings of `n` beyond `n_max` used to estimate the liminf.
    pub max_doublings: usize,
    pub approx: ApproxOptions,
}

impl Default for LscOptions {
    fn default() -> Self {
        LscOptions {
            n_max: 64,
            slack: 1e-8,
            schedule: None,
            max_doublings: 40,
            approx: ApproxOptions::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LscRow {
    pub n: usize,
    pub cost: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LscReport {
    pub sequence: String,
    pub limit_cost: f64,
    pub rows: Vec<LscRow>,
    /// Minimum cost over the second half of `rows`.
    pub tail_min: f64,
    /// Costs at `n = N·2^k`, continued until consecutive values agree within `slack / 4`.
    pub far_tail: Vec<LscRow>,
    pub liminf: f64,
    pub slack: f64,
    /// `limit_cost <= liminf + slack`.
    pub holds: bool,
    /// `limit_cost <= tail_min + slack`.
    pub holds_on_tail_min: bool,
}

fn plan_cost(plan: &IrrigationPlan, law: &LawSpec, opts: &LscOptions) -> Result<f64> {
    let schedule = match &opts.schedule {
        Some(s) => s.clone(),
        None => default_schedule(plan.total_mass(), 60),
    };
    match limit_cost(plan, law, &schedule, &opts.approx)? {
        LimitOutcome::Stabilized { value, .. } => Ok(value),
        LimitOutcome::NotStabilized { .. } => Err(Error::PreconditionViolated(
            "eps schedule ends above the smallest multiplicity".into(),
        )),
    }
}

/// Costs of `χ_1 ..= χ_N` against the cost of the limit plan.
pub fn lsc_experiment(seq: &PlanSequence, law: &LawSpec, opts: &LscOptions) -> Result<LscReport> {
    if opts.n_max < 2 {
        return Err(Error::PreconditionViolated("need at least two plans".into()));
    }
    let limit = plan_cost(seq.limit(), law, opts)?;
    let rows = (1..=opts.n_max)
        .into_par_iter()
        .map(|n| {
            let plan = seq.plan(n)?;
            Ok(LscRow {
                n,
                cost: plan_cost(&plan, law, opts)?,
                delta: seq.delta(&plan),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    for w in rows.windows(2) {
        if w[1].delta > w[0].delta + 1e-12 {
            return Err(Error::SequenceNotConverging(format!(
                "{}: distance to the limit grows from {} at n={} to {} at n={}",
                seq.name(),
                w[0].delta,
                w[0].n,
                w[1].delta,
                w[1].n
            )));
        }
    }
    let tail_min = rows[rows.len() / 2..]
        .iter()
        .map(|r| r.cost)
        .fold(f64::INFINITY, f64::min);

    let mut far_tail: Vec<LscRow> = Vec::new();
    let mut prev = rows.last().unwrap().cost;
    let mut n = opts.n_max;
    for _ in 0..opts.max_doublings {
        n *= 2;
        let plan = seq.plan(n)?;
        let cost = plan_cost(&plan, law, opts)?;
        far_tail.push(LscRow {
            n,
            cost,
            delta: seq.delta(&plan),
        });
        let settled = (cost - prev).abs() <= opts.slack / 4.0;
        prev = cost;
        if settled {
            break;
        }
    }
    let liminf = prev;
    Ok(LscReport {
        sequence: seq.name().to_string(),
        limit_cost: limit,
        rows,
        tail_min,
        far_tail,
        liminf,
        slack: opts.slack,
        holds: limit <= liminf + opts.slack,
        holds_on_tail_min: limit <= tail_min + opts.slack,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::{PsiLaw, WeightLaw};

    fn gilbert() -> LawSpec {
        LawSpec::new(WeightLaw::Zero, PsiLaw::power(0.5).unwrap()).unwrap()
    }

    #[test]
    fn collapsing_v_gilbert() {
        let seq = PlanSequence::builtin("collapsing-v").unwrap();
        let opts = LscOptions { n_max: 8, ..Default::default() };
        let r = lsc_experiment(&seq, &gilbert(), &opts).unwrap();
        assert!((r.limit_cost - 2f64.sqrt()).abs() < 1e-12);
        for row in &r.rows {
            let n = row.n as f64;
            assert!((row.cost - 2.0 * (1.0 + 1.0 / (n * n)).sqrt()).abs() < 1e-12);
        }
        assert!((r.liminf - 2.0).abs() < 1e-8);
        assert!(r.holds);
    }

    #[test]
    fn constant_sequence_is_tight() {
        let seq = PlanSequence::builtin("constant").unwrap();
        let opts = LscOptions { n_max: 4, ..Default::default() };
        let r = lsc_experiment(&seq, &gilbert(), &opts).unwrap();
        assert!(r.rows.iter().all(|row| row.cost == r.limit_cost));
        assert_eq!(r.far_tail.len(), 1);
        assert!(r.holds && r.holds_on_tail_min);
    }

    #[test]
    fn diverging_sequence_is_rejected() {
        let v = PlanSequence::builtin("collapsing-v").unwrap();
        let seq = PlanSequence::new("away", v.limit().clone(), move |n| v.plan(5 - n.min(4)));
        let opts = LscOptions { n_max: 4, ..Default::default() };
        assert!(matches!(
            lsc_experiment(&seq, &gilbert(), &opts),
            Err(Error::SequenceNotConverging(_))
        ));
    }
}
