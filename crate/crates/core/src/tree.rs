//! Level-by-level weight construction on a branched network and its weighted cost.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::law::{LawSpec, WeightLaw};
use crate::network::{BranchId, BranchedNetwork};
use crate::ode::{solve_branch, Quadrature, SolveMethod, WeightProfile, DEFAULT_FLOOR};

/// Branch ids grouped by height: level 1 holds the branches without
/// children, and a branch sits one level above its highest child.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelPartition {
    pub levels: Vec<Vec<BranchId>>,
}

impl LevelPartition {
    /// 1-based level of `id`.
    pub fn level_of(&self, id: BranchId) -> Option<usize> {
        self.levels.iter().position(|l| l.contains(&id)).map(|p| p + 1)
    }
}

pub fn partition_levels(net: &BranchedNetwork) -> LevelPartition {
    let n = net.len();
    let mut height = vec![0usize; n];
    // post-order without recursion
    let mut stack: Vec<(usize, bool)> = (0..n)
        .filter(|&k| net.branches()[k].parent.is_none())
        .map(|k| (k, false))
        .collect();
    while let Some((k, done)) = stack.pop() {
        if done {
            height[k] = 1 + net
                .child_indices(k)
                .iter()
                .map(|&c| height[c])
                .max()
                .unwrap_or(0);
        } else {
            stack.push((k, true));
            stack.extend(net.child_indices(k).iter().map(|&c| (c, false)));
        }
    }
    let top = height.iter().copied().max().unwrap_or(0);
    let mut levels = vec![Vec::new(); top];
    for (k, &h) in height.iter().enumerate() {
        levels[h - 1].push(net.branches()[k].id);
    }
    for l in &mut levels {
        l.sort_unstable();
    }
    LevelPartition { levels }
}

pub type WeightMap = BTreeMap<BranchId, WeightProfile>;

pub fn compute_weights(net: &BranchedNetwork, f: &WeightLaw) -> Result<WeightMap> {
    compute_weights_with(net, f, SolveMethod::ClosedForm)
}

/// Solves every branch, leaves first; a branch's terminal load is the excess
/// of its children's initial weights over their initial multiplicities.
pub fn compute_weights_with(
    net: &BranchedNetwork,
    f: &WeightLaw,
    method: SolveMethod,
) -> Result<WeightMap> {
    let parts = partition_levels(net);
    let mut out = WeightMap::new();
    for level in &parts.levels {
        let solved = level
            .par_iter()
            .map(|&id| {
                let b = net.branch(id).expect("id from partition");
                if net.children(id).is_empty() && !(b.tip_multiplicity() > DEFAULT_FLOOR) {
                    return Err(Error::ZeroTipMass(id));
                }
                let extra: f64 = net
                    .children(id)
                    .iter()
                    .map(|c| out[c].initial() - net.branch(*c).unwrap().inflow())
                    .sum();
                solve_branch(f, &b.geometry, &b.multiplicity, extra.max(0.0), method)
                    .map(|w| (id, w))
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(solved);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchCost {
    pub id: BranchId,
    pub cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub total: f64,
    pub per_branch: Vec<BranchCost>,
}

/// `Σ_i ∫_0^{l_i} psi(W_i(s)) ds`.
pub fn weighted_cost(
    net: &BranchedNetwork,
    weights: &WeightMap,
    law: &LawSpec,
    quad: Quadrature,
) -> Result<CostReport> {
    let alpha = law.alpha();
    let per_branch = net
        .branches()
        .par_iter()
        .map(|b| {
            let w = weights.get(&b.id).ok_or(Error::MissingWeightProfile(b.id))?;
            Ok(BranchCost {
                id: b.id,
                cost: w.integrate_power(alpha, quad)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CostReport {
        total: per_branch.iter().map(|c| c.cost).sum(),
        per_branch,
    })
}

/// `Σ_i ∫ m_i(s)^alpha ds`, the cost without weight growth.
pub fn gilbert_cost(net: &BranchedNetwork, alpha: f64) -> f64 {
    net.branches()
        .iter()
        .flat_map(|b| b.multiplicity.pieces().map(|(a, e, v)| (e - a) * v.powf(alpha)).collect::<Vec<_>>())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Point, PolylinePath};
    use crate::law::PsiLaw;
    use crate::network::Branch;
    use crate::step::StepFunction;

    fn seg(a: [f64; 2], b: [f64; 2]) -> PolylinePath {
        PolylinePath::from_coords([a, b]).unwrap()
    }

    fn branch(id: u64, parent: Option<u64>, g: PolylinePath, m: f64, node: f64) -> Branch {
        let len = g.length();
        Branch {
            id,
            parent,
            geometry: g,
            multiplicity: StepFunction::constant(m, len).unwrap(),
            node_mass: node,
        }
    }

    fn two_child() -> BranchedNetwork {
        BranchedNetwork::new(
            Point::origin(2),
            vec![
                branch(0, None, seg([0.0, 0.0], [0.0, 1.0]), 2.0, 0.0),
                branch(1, Some(0), seg([0.0, 1.0], [1.0, 1.0]), 1.0, 1.0),
                branch(2, Some(0), seg([0.0, 1.0], [-1.0, 1.0]), 1.0, 1.0),
            ],
        )
        .unwrap()
    }

    #[test]
    fn levels_of_a_chain() {
        let net = BranchedNetwork::new(
            Point::origin(1),
            vec![
                branch(5, None, PolylinePath::from_coords([[0.0], [1.0]]).unwrap(), 1.0, 0.0),
                branch(6, Some(5), PolylinePath::from_coords([[1.0], [2.0]]).unwrap(), 1.0, 0.0),
                branch(7, Some(6), PolylinePath::from_coords([[2.0], [3.0]]).unwrap(), 1.0, 1.0),
            ],
        )
        .unwrap();
        assert_eq!(partition_levels(&net).levels, vec![vec![7], vec![6], vec![5]]);
    }

    #[test]
    fn two_child_weights_and_cost() {
        let net = two_child();
        let f = WeightLaw::power(1.0, 0.5).unwrap();
        let w = compute_weights(&net, &f).unwrap();
        assert!((w[&1].initial() - 2.25).abs() < 1e-14);
        assert!((w[&0].terminal() - 4.5).abs() < 1e-14);
        let expect = (4.5f64.sqrt() + 0.5).powi(2);
        assert!((w[&0].initial() - expect).abs() < 1e-12);
        let law = LawSpec::new(f, PsiLaw::power(0.5).unwrap()).unwrap();
        let c = weighted_cost(&net, &w, &law, Quadrature::ClosedForm).unwrap();
        let by_hand = 2.0 * 1.25 + 4.5f64.sqrt() + 0.25;
        assert!((c.total - by_hand).abs() < 1e-12);
    }

    #[test]
    fn zero_law_is_gilbert() {
        let net = two_child();
        let w = compute_weights(&net, &WeightLaw::Zero).unwrap();
        assert_eq!(w[&0].initial(), 2.0);
        let law = LawSpec::new(WeightLaw::Zero, PsiLaw::power(0.5).unwrap()).unwrap();
        let c = weighted_cost(&net, &w, &law, Quadrature::ClosedForm).unwrap();
        assert!((c.total - gilbert_cost(&net, 0.5)).abs() < 1e-15);
    }

    #[test]
    fn missing_profile() {
        let net = two_child();
        let mut w = compute_weights(&net, &WeightLaw::Zero).unwrap();
        w.remove(&2);
        let law = LawSpec::new(WeightLaw::Zero, PsiLaw::power(0.5).unwrap()).unwrap();
        assert!(matches!(
            weighted_cost(&net, &w, &law, Quadrature::ClosedForm),
            Err(Error::MissingWeightProfile(2))
        ));
    }
}
