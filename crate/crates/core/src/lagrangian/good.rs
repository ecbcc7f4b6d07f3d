//! Maximal ε-good paths.

use serde::{Deserialize, Serialize};

use super::multiplicity::PlanStructure;
use crate::error::Result;
use crate::geometry::PolylinePath;
use crate::measure::IrrigationPlan;
use crate::step::{StepFunction, StepPiece};

/// A path followed by mass at least ε along its whole length and not a
/// strict prefix of another such path.
#[derive(Debug, Clone, PartialEq)]
pub struct MaximalGoodPath {
    pub geometry: PolylinePath,
    /// Mass travelling along the path, as a function of arc length.
    pub multiplicity: StepFunction,
    /// Groups that follow the whole path.
    pub member_groups: Vec<usize>,
    /// Lowest-index group whose truncation is this path.
    pub representative: usize,
}

impl MaximalGoodPath {
    pub fn length(&self) -> f64 {
        self.geometry.length()
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct MaximalGoodPathRepr {
    pub vertices: PolylinePath,
    pub multiplicity: Vec<StepPiece>,
    pub member_groups: Vec<usize>,
}

impl From<&MaximalGoodPath> for MaximalGoodPathRepr {
    fn from(p: &MaximalGoodPath) -> Self {
        MaximalGoodPathRepr {
            vertices: p.geometry.clone(),
            multiplicity: p.multiplicity.to_pieces(),
            member_groups: p.member_groups.clone(),
        }
    }
}

impl Serialize for MaximalGoodPath {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MaximalGoodPathRepr::from(self).serialize(s)
    }
}

/// Whether the truncation of `g` at `tg` is a prefix of the truncation of `h` at `th`.
fn is_prefix(s: &PlanStructure, g: usize, tg: f64, h: usize, th: f64) -> bool {
    let snap = s.snap(g).max(s.snap(h));
    tg <= th + snap && s.common_prefix(g, h) >= tg - snap
}

pub fn good_paths(plan: &IrrigationPlan, eps: f64, tol: f64) -> Result<Vec<MaximalGoodPath>> {
    good_paths_in(&PlanStructure::new(plan, tol), eps)
}

pub(crate) fn good_paths_in(s: &PlanStructure, eps: f64) -> Result<Vec<MaximalGoodPath>> {
    let n = s.len();
    let stops: Vec<f64> = (0..n)
        .map(|g| s.stopping_time(g, eps))
        .collect::<Result<_>>()?;
    let candidates: Vec<usize> = (0..n).filter(|&g| stops[g] > s.snap(g)).collect();
    let mut reps = Vec::new();
    'outer: for &g in &candidates {
        for &h in &candidates {
            if h == g || !is_prefix(s, g, stops[g], h, stops[h]) {
                continue;
            }
            let same = is_prefix(s, h, stops[h], g, stops[g]);
            if !same || h < g {
                continue 'outer;
            }
        }
        reps.push(g);
    }
    let mut out = Vec::with_capacity(reps.len());
    for g in reps {
        let tau = stops[g];
        let geometry = s.plan().groups()[g].path.prefix(tau);
        let multiplicity = s.profile(g)?.restrict(0.0, tau).with_end(geometry.length())?;
        let member_groups = (0..n)
            .filter(|&h| s.common_prefix(g, h) >= tau - s.snap(g))
            .collect();
        out.push(MaximalGoodPath {
            geometry,
            multiplicity,
            member_groups,
            representative: g,
        });
    }
    out.sort_by(|a, b| {
        b.multiplicity
            .terminal()
            .partial_cmp(&a.multiplicity.terminal())
            .unwrap()
            .then(a.representative.cmp(&b.representative))
    });
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::ParticleGroup;

    fn group(mass: f64, pts: &[[f64; 2]]) -> ParticleGroup {
        ParticleGroup::new(mass, PolylinePath::from_coords(pts.iter().copied()).unwrap())
    }

    fn three_way() -> IrrigationPlan {
        IrrigationPlan::new(vec![
            group(0.3, &[[0.0, 0.0], [0.0, 1.0], [-1.0, 2.0]]),
            group(0.5, &[[0.0, 0.0], [0.0, 1.0], [0.0, 2.0]]),
            group(0.2, &[[0.0, 0.0], [0.0, 1.0], [1.0, 2.0]]),
        ])
        .unwrap()
    }

    #[test]
    fn threshold_keeps_heavy_branch() {
        let goods = good_paths(&three_way(), 0.4, 1e-9).unwrap();
        assert_eq!(goods.len(), 1);
        assert_eq!(goods[0].representative, 1);
        assert!((goods[0].length() - 2.0).abs() < 1e-15);
        assert_eq!(goods[0].multiplicity.values(), &[1.0, 0.5]);
        assert_eq!(goods[0].member_groups, vec![1]);
    }

    #[test]
    fn low_threshold_keeps_all() {
        let goods = good_paths(&three_way(), 0.2, 1e-9).unwrap();
        assert_eq!(goods.len(), 3);
        let reps: Vec<usize> = goods.iter().map(|g| g.representative).collect();
        assert_eq!(reps, vec![1, 0, 2]);
    }

    #[test]
    fn trunk_only_when_branches_are_light() {
        let goods = good_paths(&three_way(), 0.6, 1e-9).unwrap();
        assert_eq!(goods.len(), 1);
        assert!((goods[0].length() - 1.0).abs() < 1e-15);
        assert_eq!(goods[0].member_groups, vec![0, 1, 2]);
        assert!(good_paths(&three_way(), 1.5, 1e-9).unwrap().is_empty());
    }

    #[test]
    fn duplicates_collapse() {
        let plan = IrrigationPlan::new(vec![
            group(0.5, &[[0.0, 0.0], [1.0, 0.0]]),
            group(0.5, &[[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]),
        ])
        .unwrap();
        let goods = good_paths(&plan, 0.1, 1e-9).unwrap();
        assert_eq!(goods.len(), 1);
        assert_eq!(goods[0].member_groups, vec![0, 1]);
    }
}
