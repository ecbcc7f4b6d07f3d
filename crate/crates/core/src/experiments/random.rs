//! Seeded random instances for the property suites and tests.

use rand::Rng;

use crate::geometry::{Point, PolylinePath};
use crate::law::WeightLaw;
use crate::measure::{IrrigationPlan, ParticleGroup};
use crate::network::{Branch, BranchedNetwork};
use crate::step::StepFunction;

/// Non-increasing step function on `[0, end]` with `pieces` pieces and values in `[lo, hi]`.
pub fn decreasing_step<R: Rng + ?Sized>(rng: &mut R, end: f64, pieces: usize, lo: f64, hi: f64) -> StepFunction {
    let pieces = pieces.max(1);
    let mut cuts: Vec<f64> = (1..pieces).map(|_| rng.gen_range(0.05..0.95) * end).collect();
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-6 * end);
    let mut knots = vec![0.0];
    knots.extend(cuts);
    knots.push(end);
    let mut values: Vec<f64> = (0..knots.len() - 1).map(|_| rng.gen_range(lo..=hi)).collect();
    values.sort_by(|a, b| b.partial_cmp(a).unwrap());
    StepFunction::new(knots, values).expect("sorted knots and values")
}

/// `W' = -c W^beta` with `c` in `[0, 2]` and `beta` in `[0.1, 1]`.
pub fn scalar_law<R: Rng + ?Sized>(rng: &mut R) -> WeightLaw {
    WeightLaw::power(rng.gen_range(0.0..=2.0), rng.gen_range(0.1..=1.0)).expect("valid range")
}

fn step_from<R: Rng + ?Sized>(rng: &mut R, from: &[f64]) -> Vec<f64> {
    let r = rng.gen_range(0.2..=1.0);
    let theta = rng.gen_range(0.0..std::f64::consts::TAU);
    vec![from[0] + r * theta.cos(), from[1] + r * theta.sin()]
}

/// Planar tree plan: `nodes` random tree nodes grown from the origin and
/// `groups` groups, each travelling from the origin to a random node.
pub fn tree_plan<R: Rng + ?Sized>(rng: &mut R, nodes: usize, groups: usize) -> IrrigationPlan {
    let nodes = nodes.max(1);
    let mut pos = vec![vec![0.0, 0.0]];
    let mut parent = vec![0usize];
    for i in 1..=nodes {
        let p = rng.gen_range(0..i);
        let q = step_from(rng, &pos[p]);
        pos.push(q);
        parent.push(p);
    }
    let out = (0..groups.max(1))
        .map(|_| {
            let mut v = rng.gen_range(1..=nodes);
            let mut chain = vec![Point::new(pos[v].clone())];
            while v != 0 {
                v = parent[v];
                chain.push(Point::new(pos[v].clone()));
            }
            chain.reverse();
            let path = PolylinePath::new(chain).expect("distinct tree nodes");
            ParticleGroup::new(rng.gen_range(0.1..=1.0), path)
        })
        .collect();
    IrrigationPlan::new(out).expect("paths start at the origin")
}

/// Planar network with `branches` branches, each a one- or two-segment
/// polyline carrying a constant multiplicity.
pub fn tree_network<R: Rng + ?Sized>(rng: &mut R, branches: usize) -> BranchedNetwork {
    let n = branches.max(1);
    let mut tips: Vec<Vec<f64>> = Vec::with_capacity(n);
    let mut geoms = Vec::with_capacity(n);
    let mut parent: Vec<Option<usize>> = Vec::with_capacity(n);
    for i in 0..n {
        let p = if i == 0 { None } else { Some(rng.gen_range(0..i)) };
        let start = p.map_or(vec![0.0, 0.0], |k| tips[k].clone());
        let mut pts = vec![start.clone()];
        let mut cur = start;
        for _ in 0..rng.gen_range(1..=2) {
            cur = step_from(rng, &cur);
            pts.push(cur.clone());
        }
        tips.push(cur);
        geoms.push(PolylinePath::new(pts.into_iter().map(Point::new).collect()).expect("distinct points"));
        parent.push(p);
    }
    let mut has_child = vec![false; n];
    for p in parent.iter().flatten() {
        has_child[*p] = true;
    }
    let node_mass: Vec<f64> = (0..n)
        .map(|i| {
            if !has_child[i] || rng.gen_bool(0.3) {
                rng.gen_range(0.1..=1.0)
            } else {
                0.0
            }
        })
        .collect();
    let mut flow = node_mass.clone();
    for i in (1..n).rev() {
        if let Some(p) = parent[i] {
            flow[p] += flow[i];
        }
    }
    let list = (0..n)
        .map(|i| Branch {
            id: i as u64 + 1,
            parent: parent[i].map(|p| p as u64 + 1),
            multiplicity: StepFunction::constant(flow[i], geoms[i].length()).expect("positive flow"),
            geometry: geoms[i].clone(),
            node_mass: node_mass[i],
        })
        .collect();
    BranchedNetwork::new(Point::origin(2), list).expect("consistent by construction")
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn generators_are_valid_and_reproducible() {
        let mut a = ChaCha8Rng::seed_from_u64(3);
        let mut b = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..20 {
            let p = tree_plan(&mut a, 6, 5);
            assert_eq!(p, tree_plan(&mut b, 6, 5));
            let n = tree_network(&mut a, 7);
            assert_eq!(n.len(), tree_network(&mut b, 7).len());
            let m = decreasing_step(&mut a, 2.0, 4, 0.1, 3.0);
            assert_eq!(m, decreasing_step(&mut b, 2.0, 4, 0.1, 3.0));
            assert!(m.min_value() >= 0.1);
        }
    }
}
