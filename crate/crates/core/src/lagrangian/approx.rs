//! Approximate weights `W^ε`, the Lagrangian cost and its ε → 0 limit.

use serde::{Deserialize, Serialize};

use super::good::good_paths_in;
use super::multiplicity::{check_a2, PlanStructure};
use super::psa::{psa, ElementaryDecomposition};
use crate::error::{Error, Result};
use crate::geometry::{Point, PolylinePath, DEFAULT_PATH_TOL};
use crate::law::{LawSpec, WeightLaw};
use crate::measure::IrrigationPlan;
use crate::network::{Branch, BranchedNetwork};
use crate::ode::{Quadrature, SolveMethod};
use crate::quadrature::adaptive_simpson;
use crate::step::StepFunction;
use crate::tree::{compute_weights_with, weighted_cost, WeightMap};

/// Relative agreement required between the two sides of the cost identity.
pub const COST_IDENTITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApproxOptions {
    pub tol: f64,
    pub method: SolveMethod,
    pub quad: Quadrature,
}

impl Default for ApproxOptions {
    fn default() -> Self {
        ApproxOptions {
            tol: DEFAULT_PATH_TOL,
            method: SolveMethod::ClosedForm,
            quad: Quadrature::ClosedForm,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Route {
    maximal: usize,
    stop: f64,
}

/// Weights along the ε-good part of a plan.
#[derive(Debug, Clone)]
pub struct ApproxWeights {
    pub eps: f64,
    pub decomposition: ElementaryDecomposition,
    pub network: BranchedNetwork,
    pub weights: WeightMap,
    routes: Vec<Option<Route>>,
    lengths: Vec<f64>,
}

impl ApproxWeights {
    pub fn group_count(&self) -> usize {
        self.routes.len()
    }

    /// `τ_ε(g)`.
    pub fn stopping_time(&self, g: usize) -> Result<f64> {
        let r = self.routes.get(g).ok_or(Error::UnknownGroup(g))?;
        Ok(r.map_or(0.0, |r| r.stop))
    }

    /// Index of the maximal path group `g` travels along, if any.
    pub fn maximal_of(&self, g: usize) -> Option<usize> {
        self.routes.get(g).copied().flatten().map(|r| r.maximal)
    }

    /// `W^ε(g, t)`; zero once the group has left the ε-good paths.
    pub fn eval(&self, g: usize, t: f64) -> Result<f64> {
        let r = self.routes.get(g).ok_or(Error::UnknownGroup(g))?;
        if !(t >= 0.0) {
            return Err(Error::OutOfRange { t, max: self.lengths[g] });
        }
        Ok(match r {
            Some(r) if t <= r.stop => self.eval_on_maximal(r.maximal, t),
            _ => 0.0,
        })
    }

    /// Weight at time `t` along maximal path `j`.
    pub fn eval_on_maximal(&self, j: usize, t: f64) -> f64 {
        let p = self.decomposition.piece_at(j, t);
        self.weights[&p.id].eval(t - p.start)
    }
}

pub fn approx_weights(
    plan: &IrrigationPlan,
    eps: f64,
    f: &WeightLaw,
    opts: &ApproxOptions,
) -> Result<ApproxWeights> {
    approx_weights_in(&PlanStructure::new(plan, opts.tol), eps, f, opts)
}

fn require(plan: &IrrigationPlan, eps: f64) -> Result<()> {
    if !(eps > 0.0) {
        return Err(Error::PreconditionViolated(format!("eps = {eps} must be positive")));
    }
    if !check_a2(plan) {
        return Err(Error::PreconditionViolated(
            "every group needs positive mass".into(),
        ));
    }
    if plan.is_empty() {
        return Err(Error::PreconditionViolated("plan has no groups".into()));
    }
    Ok(())
}

fn approx_weights_in(
    s: &PlanStructure,
    eps: f64,
    f: &WeightLaw,
    opts: &ApproxOptions,
) -> Result<ApproxWeights> {
    let plan = s.plan();
    require(plan, eps)?;
    let goods = good_paths_in(s, eps)?;
    let root = Point::origin(plan.groups()[0].path.dim());
    let lengths: Vec<f64> = (0..s.len()).map(|g| s.path_length(g)).collect();
    if goods.is_empty() {
        return Ok(ApproxWeights {
            eps,
            decomposition: ElementaryDecomposition::empty(root.clone()),
            network: BranchedNetwork::empty(root),
            weights: WeightMap::new(),
            routes: vec![None; s.len()],
            lengths,
        });
    }
    let decomposition = psa(&goods, opts.tol)?;
    let network = decomposition.to_network()?;
    let weights = compute_weights_with(&network, f, opts.method)?;
    let mut routes = Vec::with_capacity(s.len());
    for g in 0..s.len() {
        let stop = s.stopping_time(g, eps)?;
        if stop <= s.snap(g) {
            routes.push(None);
            continue;
        }
        let maximal = goods.iter().position(|m| {
            let rep = m.representative;
            stop <= m.length() + s.snap(g).max(s.snap(rep))
                && s.common_prefix(g, rep) >= stop - s.snap(g)
        });
        routes.push(maximal.map(|maximal| Route { maximal, stop }));
    }
    Ok(ApproxWeights {
        eps,
        decomposition,
        network,
        weights,
        routes,
        lengths,
    })
}

/// Both sides of the cost identity: the branch sum and the particle integral.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostSides {
    pub branch_sum: f64,
    pub particle_integral: f64,
}

/// Computes the ε-approximate cost two ways and checks that they agree.
pub fn cost_sides(
    plan: &IrrigationPlan,
    eps: f64,
    law: &LawSpec,
    opts: &ApproxOptions,
) -> Result<CostSides> {
    let s = PlanStructure::new(plan, opts.tol);
    let aw = approx_weights_in(&s, eps, &law.f, opts)?;
    let alpha = law.alpha();
    let branch_sum = weighted_cost(&aw.network, &aw.weights, law, opts.quad)?.total;
    let mut particle_integral = 0.0;
    for (g, group) in plan.groups().iter().enumerate() {
        let Some(r) = aw.routes[g] else { continue };
        let m = s.profile(g)?;
        let mut cuts: Vec<f64> = m.knots().iter().copied().filter(|&k| k < r.stop).collect();
        for &id in &aw.decomposition.routes[r.maximal] {
            let p = aw.decomposition.path(id).unwrap();
            if p.end < r.stop {
                cuts.push(p.end);
            }
        }
        cuts.push(r.stop);
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        cuts.dedup();
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let inner = a + (b - a) * 1e-12;
            let val = adaptive_simpson(
                |t| {
                    let t = t.max(inner);
                    aw.eval_on_maximal(r.maximal, t).powf(alpha) / m.eval(t)
                },
                a,
                b,
                1e-13,
            );
            particle_integral += group.mass * val;
        }
    }
    let sides = CostSides {
        branch_sum,
        particle_integral,
    };
    let scale = branch_sum.abs().max(particle_integral.abs());
    if (branch_sum - particle_integral).abs() > COST_IDENTITY_TOL * scale + 1e-14 {
        return Err(Error::CostIdentityViolated {
            branch_sum,
            particle_integral,
        });
    }
    Ok(sides)
}

/// The ε-approximate weighted cost of a plan.
pub fn approx_cost(plan: &IrrigationPlan, eps: f64, law: &LawSpec, opts: &ApproxOptions) -> Result<f64> {
    Ok(cost_sides(plan, eps, law, opts)?.branch_sum)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LimitStep {
    pub eps: f64,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum LimitOutcome {
    /// The schedule reached `eps` at or below the smallest multiplicity.
    Stabilized {
        value: f64,
        eps: f64,
        sequence: Vec<LimitStep>,
        monotone: bool,
    },
    NotStabilized {
        last_value: f64,
        sequence: Vec<LimitStep>,
        monotone: bool,
    },
}

impl LimitOutcome {
    pub fn value(&self) -> Option<f64> {
        match self {
            LimitOutcome::Stabilized { value, .. } => Some(*value),
            LimitOutcome::NotStabilized { .. } => None,
        }
    }

    pub fn sequence(&self) -> &[LimitStep] {
        match self {
            LimitOutcome::Stabilized { sequence, .. } | LimitOutcome::NotStabilized { sequence, .. } => {
                sequence
            }
        }
    }

    pub fn is_monotone(&self) -> bool {
        match self {
            LimitOutcome::Stabilized { monotone, .. } | LimitOutcome::NotStabilized { monotone, .. } => {
                *monotone
            }
        }
    }
}

/// Follows a decreasing ε schedule until every group is ε-good.
pub fn limit_cost(
    plan: &IrrigationPlan,
    law: &LawSpec,
    schedule: &[f64],
    opts: &ApproxOptions,
) -> Result<LimitOutcome> {
    if schedule.is_empty()
        || schedule.iter().any(|&e| !(e > 0.0))
        || schedule.windows(2).any(|w| !(w[1] < w[0]))
    {
        return Err(Error::PreconditionViolated(
            "eps schedule must be positive and strictly decreasing".into(),
        ));
    }
    require(plan, schedule[0])?;
    let floor = PlanStructure::new(plan, opts.tol)
        .min_multiplicity()
        .expect("plan has positive-mass groups");
    let mut sequence = Vec::new();
    for &eps in schedule {
        let cost = approx_cost(plan, eps, law, opts)?;
        sequence.push(LimitStep { eps, cost });
        if eps <= floor {
            let monotone = is_non_decreasing(&sequence);
            return Ok(LimitOutcome::Stabilized {
                value: cost,
                eps,
                sequence,
                monotone,
            });
        }
    }
    let monotone = is_non_decreasing(&sequence);
    Ok(LimitOutcome::NotStabilized {
        last_value: sequence.last().unwrap().cost,
        sequence,
        monotone,
    })
}

fn is_non_decreasing(seq: &[LimitStep]) -> bool {
    seq.windows(2)
        .all(|w| w[1].cost >= w[0].cost - 1e-12 * w[0].cost.abs().max(1.0))
}

/// `M · 2^-k` for `k = 1..=steps`.
pub fn default_schedule(total_mass: f64, steps: usize) -> Vec<f64> {
    (1..=steps).map(|k| total_mass * 0.5f64.powi(k as i32)).collect()
}

/// The network of elementary paths at a threshold below every group mass.
///
/// Groups that never leave the origin are collected into a root stub.
pub fn plan_to_network(plan: &IrrigationPlan, tol: f64) -> Result<BranchedNetwork> {
    if plan.is_empty() {
        return Err(Error::PreconditionViolated("plan has no groups".into()));
    }
    let min_mass = plan
        .groups()
        .iter()
        .map(|g| g.mass)
        .fold(f64::INFINITY, f64::min);
    require(plan, min_mass)?;
    let s = PlanStructure::new(plan, tol);
    let goods = good_paths_in(&s, 0.5 * min_mass)?;
    let root = Point::origin(plan.groups()[0].path.dim());
    let mut branches: Vec<Branch> = if goods.is_empty() {
        Vec::new()
    } else {
        psa(&goods, tol)?.to_network()?.branches().to_vec()
    };
    let stay: f64 = (0..s.len())
        .filter(|&g| s.path_length(g) == 0.0)
        .map(|g| plan.groups()[g].mass)
        .sum();
    if stay > 0.0 {
        branches.push(Branch {
            id: branches.iter().map(|b| b.id).max().unwrap_or(0) + 1,
            parent: None,
            geometry: PolylinePath::single(root.clone()),
            multiplicity: StepFunction::constant(stay, 0.0)?,
            node_mass: stay,
        });
    }
    BranchedNetwork::new(root, branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::PsiLaw;
    use crate::measure::ParticleGroup;

    fn group(mass: f64, pts: &[[f64; 2]]) -> ParticleGroup {
        ParticleGroup::new(mass, PolylinePath::from_coords(pts.iter().copied()).unwrap())
    }

    fn sqrt_law() -> LawSpec {
        LawSpec::new(WeightLaw::power(1.0, 0.5).unwrap(), PsiLaw::power(0.5).unwrap()).unwrap()
    }

    #[test]
    fn single_group_cost() {
        let plan = IrrigationPlan::new(vec![group(1.0, &[[0.0, 0.0], [1.0, 0.0]])]).unwrap();
        for eps in [1.0, 0.5, 0.01] {
            let c = approx_cost(&plan, eps, &sqrt_law(), &ApproxOptions::default()).unwrap();
            assert!((c - 1.25).abs() < 1e-12);
        }
    }

    #[test]
    fn eps_above_mass_gives_nothing() {
        let plan = IrrigationPlan::new(vec![group(1.0, &[[0.0, 0.0], [1.0, 0.0]])]).unwrap();
        let aw = approx_weights(&plan, 2.0, &sqrt_law().f, &ApproxOptions::default()).unwrap();
        assert!(aw.network.is_empty());
        assert_eq!(aw.eval(0, 0.5).unwrap(), 0.0);
        assert_eq!(approx_cost(&plan, 2.0, &sqrt_law(), &ApproxOptions::default()).unwrap(), 0.0);
        let out = limit_cost(&plan, &sqrt_law(), &[4.0, 3.0], &ApproxOptions::default()).unwrap();
        assert!(matches!(out, LimitOutcome::NotStabilized { last_value, .. } if last_value == 0.0));
    }

    #[test]
    fn y_plan_weights_and_identity() {
        let plan = IrrigationPlan::new(vec![
            group(0.6, &[[0.0, 0.0], [0.0, 1.0], [1.0, 2.0]]),
            group(0.4, &[[0.0, 0.0], [0.0, 1.0], [-1.0, 2.0]]),
        ])
        .unwrap();
        let opts = ApproxOptions::default();
        let sides = cost_sides(&plan, 0.1, &sqrt_law(), &opts).unwrap();
        assert!((sides.branch_sum - sides.particle_integral).abs() < 1e-10);
        let aw = approx_weights(&plan, 0.5, &sqrt_law().f, &opts).unwrap();
        assert_eq!(aw.stopping_time(1).unwrap(), 1.0);
        assert!(aw.eval(1, 1.5).unwrap() == 0.0);
        assert!(aw.eval(0, 0.5).unwrap() > 1.0);
        let out = limit_cost(&plan, &sqrt_law(), &default_schedule(1.0, 10), &opts).unwrap();
        assert!(out.is_monotone());
        assert_eq!(out.value(), Some(sides.branch_sum));
    }

    #[test]
    fn plan_network_with_stub() {
        let plan = IrrigationPlan::new(vec![
            group(0.6, &[[0.0, 0.0], [0.0, 1.0]]),
            group(0.4, &[[0.0, 0.0]]),
        ])
        .unwrap();
        let net = plan_to_network(&plan, 1e-9).unwrap();
        assert_eq!(net.len(), 2);
        assert!((net.total_mass() - 1.0).abs() < 1e-15);
    }
}
