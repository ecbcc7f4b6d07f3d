//! Path-based multiplicity of a finite plan.

use crate::error::{Error, Result};
use crate::geometry::common_prefix_length;
use crate::measure::IrrigationPlan;
use crate::step::StepFunction;

/// Pairwise common-prefix lengths of a plan, computed once.
///
/// Group `h` travels with group `g` up to time `t` exactly when their common
/// prefix has length at least `t`, so every multiplicity question reduces to
/// this table.
#[derive(Debug, Clone)]
pub struct PlanStructure<'a> {
    plan: &'a IrrigationPlan,
    tol: f64,
    prefix: Vec<Vec<f64>>,
    profiles: Vec<StepFunction>,
}

impl<'a> PlanStructure<'a> {
    pub fn new(plan: &'a IrrigationPlan, tol: f64) -> Self {
        let groups = plan.groups();
        let n = groups.len();
        let mut prefix = vec![vec![0.0; n]; n];
        for g in 0..n {
            prefix[g][g] = groups[g].path.length();
            for h in g + 1..n {
                let c = common_prefix_length(&groups[g].path, &groups[h].path, tol);
                prefix[g][h] = c;
                prefix[h][g] = c;
            }
        }
        let mut s = PlanStructure {
            plan,
            tol,
            prefix,
            profiles: Vec::new(),
        };
        s.profiles = (0..n).map(|g| s.build_profile(g)).collect();
        s
    }

    pub fn plan(&self) -> &IrrigationPlan {
        self.plan
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    pub fn len(&self) -> usize {
        self.prefix.len()
    }

    pub fn is_empty(&self) -> bool {
        self.prefix.is_empty()
    }

    pub fn common_prefix(&self, g: usize, h: usize) -> f64 {
        self.prefix[g][h]
    }

    pub fn path_length(&self, g: usize) -> f64 {
        self.prefix[g][g]
    }

    pub(crate) fn snap(&self, g: usize) -> f64 {
        1e-12 * self.path_length(g).max(1.0)
    }

    fn build_profile(&self, g: usize) -> StepFunction {
        let groups = self.plan.groups();
        let len = self.path_length(g);
        if len == 0.0 {
            let stay: f64 = (0..self.len())
                .filter(|&h| self.path_length(h) == 0.0)
                .map(|h| groups[h].mass)
                .sum();
            return StepFunction::constant(stay, 0.0).expect("nonnegative masses");
        }
        let snap = self.snap(g);
        let mut cuts: Vec<f64> = self.prefix[g]
            .iter()
            .copied()
            .filter(|&c| c > snap && c < len - snap)
            .collect();
        cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut knots = vec![0.0];
        for c in cuts {
            if c - knots.last().unwrap() > snap {
                knots.push(c);
            }
        }
        knots.push(len);
        let values = knots[1..]
            .iter()
            .map(|&right| {
                (0..self.len())
                    .filter(|&h| self.prefix[g][h] >= right - snap)
                    .map(|h| groups[h].mass)
                    .sum()
            })
            .collect();
        StepFunction::new(knots, values).expect("multiplicity is non-increasing")
    }

    /// `t ↦ m(g, t)` on `[0, length of g]`, with `m(g, 0) = m(g, 0+)`.
    pub fn profile(&self, g: usize) -> Result<&StepFunction> {
        self.profiles.get(g).ok_or(Error::UnknownGroup(g))
    }

    pub fn multiplicity(&self, g: usize, t: f64) -> Result<f64> {
        let m = self.profile(g)?;
        let len = self.path_length(g);
        if !(t >= 0.0 && t <= len + self.tol) {
            return Err(Error::OutOfRange { t, max: len });
        }
        Ok(m.eval(t))
    }

    /// `sup { t : m(g, t) >= eps }`, or 0 when even `m(g, 0+) < eps`.
    pub fn stopping_time(&self, g: usize, eps: f64) -> Result<f64> {
        let m = self.profile(g)?;
        Ok(m.pieces()
            .filter(|&(_, _, v)| v >= eps)
            .map(|(_, b, _)| b)
            .last()
            .unwrap_or(0.0))
    }

    /// Smallest terminal multiplicity over groups with positive mass.
    pub fn min_multiplicity(&self) -> Option<f64> {
        self.profiles
            .iter()
            .zip(self.plan.groups())
            .filter(|(_, g)| g.mass > 0.0)
            .map(|(m, _)| m.terminal())
            .min_by(|a, b| a.partial_cmp(b).unwrap())
    }
}

/// Total mass of groups whose path agrees with group `g`'s path on `[0, t]`.
pub fn multiplicity(plan: &IrrigationPlan, g: usize, t: f64, tol: f64) -> Result<f64> {
    plan.group(g)?;
    PlanStructure::new(plan, tol).multiplicity(g, t)
}

/// Every group carries positive mass, hence positive multiplicity up to its end.
pub fn check_a2(plan: &IrrigationPlan) -> bool {
    plan.groups().iter().all(|g| g.mass > 0.0)
}

pub fn stopping_time(plan: &IrrigationPlan, g: usize, eps: f64, tol: f64) -> Result<f64> {
    plan.group(g)?;
    PlanStructure::new(plan, tol).stopping_time(g, eps)
}
