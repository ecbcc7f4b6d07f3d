//! Branch-point placement for a fixed topology.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::topology::Topology;
use super::OptimizeOptions;
use crate::error::{Error, Result};
use crate::geometry::{distance, Point, PolylinePath};
use crate::law::{LawSpec, WeightLaw};
use crate::measure::AtomicMeasure;
use crate::network::{Branch, BranchedNetwork};
use crate::ode::{closed_form_power_integral, closed_form_weight, Quadrature};
use crate::step::StepFunction;
use crate::tree::{compute_weights, weighted_cost};

/// Straight-edge cost model of a topology with node positions as the variables.
pub(crate) struct Evaluator<'a> {
    topo: &'a Topology,
    law: &'a LawSpec,
    alpha: f64,
    masses: Vec<f64>,
    children: Vec<Vec<usize>>,
    /// Nodes with every child before its parent.
    bottom_up: Vec<usize>,
}

impl<'a> Evaluator<'a> {
    pub fn new(topo: &'a Topology, mu: &AtomicMeasure, law: &'a LawSpec) -> Self {
        let n = topo.node_count();
        let children: Vec<Vec<usize>> = (0..n).map(|v| topo.children(v)).collect();
        let mut masses = vec![0.0; n];
        let bottom_up: Vec<usize> = (1..n).rev().collect();
        for &v in &bottom_up {
            masses[v] = match topo.atom(v) {
                Some(a) => mu.atoms()[a].mass,
                None => children[v].iter().map(|&c| masses[c]).sum(),
            };
        }
        Evaluator {
            topo,
            law,
            alpha: law.alpha(),
            masses,
            children,
            bottom_up,
        }
    }

    fn rate(&self, from: &[f64], to: &[f64], len: f64) -> f64 {
        match &self.law.f {
            WeightLaw::Zero => 0.0,
            WeightLaw::Power { c, .. } => *c,
            WeightLaw::Directional { gauge, .. } => {
                let v: Vec<f64> = from.iter().zip(to).map(|(a, b)| (b - a) / len).collect();
                gauge.eval(&v)
            }
        }
    }

    pub fn cost(&self, pos: &[Vec<f64>]) -> f64 {
        let beta = self.law.f.beta();
        let mut w_start = vec![0.0; pos.len()];
        let mut total = 0.0;
        for &v in &self.bottom_up {
            let w_tip = match self.topo.atom(v) {
                Some(_) => self.masses[v],
                None => self.children[v].iter().map(|&c| w_start[c]).sum(),
            };
            let p = self.topo.parent(v).unwrap();
            let len = distance(&pos[p], &pos[v]);
            if len == 0.0 {
                w_start[v] = w_tip;
                continue;
            }
            let rate = self.rate(&pos[p], &pos[v], len);
            w_start[v] = closed_form_weight(w_tip, rate, beta, len);
            total += closed_form_power_integral(w_tip, rate, beta, self.alpha, len);
        }
        total
    }
}

/// A locally optimal placement for one topology.
#[derive(Debug, Clone)]
pub struct GeometryResult {
    pub network: BranchedNetwork,
    pub cost: f64,
    /// Positions of all topology nodes, root first.
    pub positions: Vec<Point>,
    pub iterations: usize,
    pub converged: bool,
}

fn diameter(pts: &[Vec<f64>]) -> f64 {
    let mut d: f64 = 0.0;
    for (i, a) in pts.iter().enumerate() {
        for b in &pts[i + 1..] {
            d = d.max(distance(a, b));
        }
    }
    d
}

/// Starting positions: each branch point at the average of its parent and the
/// atoms below it, placed top-down.
fn centroid_start(topo: &Topology, fixed: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let n = topo.node_count();
    let mut leaves_below: Vec<Vec<usize>> = vec![Vec::new(); n];
    for v in (1..n).rev() {
        if topo.atom(v).is_some() {
            leaves_below[v].push(v);
        }
        let below = leaves_below[v].clone();
        leaves_below[topo.parent(v).unwrap()].extend(below);
    }
    let mut pos = fixed.to_vec();
    for v in 1..n {
        if topo.atom(v).is_some() {
            continue;
        }
        let p = topo.parent(v).unwrap();
        let mut acc = pos[p].clone();
        for &l in &leaves_below[v] {
            for k in 0..dim {
                acc[k] += fixed[l][k];
            }
        }
        let count = (leaves_below[v].len() + 1) as f64;
        pos[v] = acc.into_iter().map(|x| x / count).collect();
    }
    pos
}

fn random_start(
    topo: &Topology,
    fixed: &[Vec<f64>],
    anchors: &[Vec<f64>],
    dim: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<f64>> {
    let lo: Vec<f64> = (0..dim)
        .map(|k| anchors.iter().map(|p| p[k]).fold(f64::INFINITY, f64::min))
        .collect();
    let hi: Vec<f64> = (0..dim)
        .map(|k| anchors.iter().map(|p| p[k]).fold(f64::NEG_INFINITY, f64::max))
        .collect();
    let mut pos = fixed.to_vec();
    for v in topo.branch_points() {
        pos[v] = (0..dim).map(|k| rng.gen_range(lo[k]..=hi[k])).collect();
    }
    pos
}

struct Descent {
    pos: Vec<Vec<f64>>,
    cost: f64,
    iterations: usize,
    converged: bool,
}

fn descend(
    eval: &Evaluator,
    topo: &Topology,
    mut pos: Vec<Vec<f64>>,
    dirs: &[Vec<f64>],
    step0: f64,
    opts: &OptimizeOptions,
) -> Descent {
    let movable = topo.branch_points();
    let mut best = eval.cost(&pos);
    let mut step = step0;
    let mut iterations = 0;
    while step >= opts.tol {
        if iterations >= opts.max_iters {
            return Descent {
                pos,
                cost: best,
                iterations,
                converged: false,
            };
        }
        iterations += 1;
        let mut improved = false;
        for &v in &movable {
            let mut targets: Vec<Vec<f64>> = dirs
                .iter()
                .map(|d| pos[v].iter().zip(d).map(|(x, e)| x + step * e).collect())
                .collect();
            // jumping onto a neighbour reaches collapsed configurations exactly
            targets.push(pos[topo.parent(v).unwrap()].clone());
            targets.extend(topo.children(v).into_iter().map(|c| pos[c].clone()));
            for t in targets {
                let old = std::mem::replace(&mut pos[v], t);
                let c = eval.cost(&pos);
                if c < best {
                    best = c;
                    improved = true;
                } else {
                    pos[v] = old;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Descent {
        pos,
        cost: best,
        iterations,
        converged: true,
    }
}

/// Places the branch points of `topo` by coordinate descent with step halving.
pub fn optimize_geometry(
    topo: &Topology,
    mu: &AtomicMeasure,
    law: &LawSpec,
    opts: &OptimizeOptions,
) -> Result<GeometryResult> {
    optimize_geometry_seeded(topo, mu, law, opts, opts.seed)
}

pub(crate) fn optimize_geometry_seeded(
    topo: &Topology,
    mu: &AtomicMeasure,
    law: &LawSpec,
    opts: &OptimizeOptions,
    seed: u64,
) -> Result<GeometryResult> {
    if topo.atom_count() != mu.atoms().len() {
        return Err(Error::InvalidTopology(format!(
            "topology has {} leaves but the measure has {} atoms",
            topo.atom_count(),
            mu.atoms().len()
        )));
    }
    let dim = mu.dim();
    let n = topo.node_count();
    let mut fixed = vec![vec![0.0; dim]; n];
    for v in 0..n {
        if let Some(a) = topo.atom(v) {
            fixed[v] = mu.atoms()[a].point.coords().to_vec();
        }
    }
    let eval = Evaluator::new(topo, mu, law);
    let mut anchors: Vec<Vec<f64>> = mu.atoms().iter().map(|a| a.point.coords().to_vec()).collect();
    anchors.push(vec![0.0; dim]);
    let diam = diameter(&anchors);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dirs = Vec::new();
    for k in 0..dim {
        for sign in [1.0, -1.0] {
            let mut e = vec![0.0; dim];
            e[k] = sign;
            dirs.push(e);
        }
    }
    for _ in 0..opts.extra_directions {
        let v: Vec<f64> = (0..dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            dirs.push(v.iter().map(|x| x / norm).collect());
        }
    }

    let mut best: Option<Descent> = None;
    let mut iterations = 0;
    let mut converged = true;
    let starts = if topo.branch_points().is_empty() || diam == 0.0 {
        1
    } else {
        opts.restarts.max(1)
    };
    for r in 0..starts {
        let start = if r == 0 {
            centroid_start(topo, &fixed, dim)
        } else {
            random_start(topo, &fixed, &anchors, dim, &mut rng)
        };
        let d = if diam == 0.0 {
            Descent {
                cost: eval.cost(&start),
                pos: start,
                iterations: 0,
                converged: true,
            }
        } else {
            descend(&eval, topo, start, &dirs, diam / 4.0, opts)
        };
        iterations += d.iterations;
        converged &= d.converged;
        if best.as_ref().map_or(true, |b| d.cost < b.cost) {
            best = Some(d);
        }
    }
    let mut pos = best.unwrap().pos;
    snap_short_edges(topo, &mut pos, 4.0 * opts.tol);
    let network = build_network(topo, mu, &pos, &eval.masses)?;
    let weights = compute_weights(&network, &law.f)?;
    let cost = weighted_cost(&network, &weights, law, Quadrature::ClosedForm)?.total;
    Ok(GeometryResult {
        network,
        cost,
        positions: pos.into_iter().map(Point::new).collect(),
        iterations,
        converged,
    })
}

/// Collapses edges shorter than `tol` so that contracted shapes are exact.
fn snap_short_edges(topo: &Topology, pos: &mut [Vec<f64>], tol: f64) {
    for v in 1..topo.node_count() {
        let p = topo.parent(v).unwrap();
        if distance(&pos[p], &pos[v]) > tol {
            continue;
        }
        if topo.atom(v).is_none() {
            pos[v] = pos[p].clone();
        } else if p != 0 && topo.atom(p).is_none() {
            pos[p] = pos[v].clone();
        }
    }
}

/// Straight branches between node positions; zero-length edges are contracted
/// and their tip masses passed to the nearest ancestor branch.
pub(crate) fn build_network(
    topo: &Topology,
    mu: &AtomicMeasure,
    pos: &[Vec<f64>],
    masses: &[f64],
) -> Result<BranchedNetwork> {
    let n = topo.node_count();
    let dim = mu.dim();
    // branch index of the nearest ancestor edge with positive length
    let mut owner: Vec<Option<usize>> = vec![None; n];
    let mut branches: Vec<Branch> = Vec::new();
    let mut stub_mass = 0.0;
    for v in 1..n {
        let p = topo.parent(v).unwrap();
        let len = distance(&pos[p], &pos[v]);
        if len > 0.0 {
            let geometry = PolylinePath::new(vec![Point::new(pos[p].clone()), Point::new(pos[v].clone())])?;
            let id = branches.len() as u64 + 1;
            branches.push(Branch {
                id,
                parent: owner[p].map(|k| branches[k].id),
                multiplicity: StepFunction::constant(masses[v], geometry.length())?,
                geometry,
                node_mass: 0.0,
            });
            owner[v] = Some(branches.len() - 1);
        } else {
            owner[v] = owner[p];
        }
        if let Some(a) = topo.atom(v) {
            let m = mu.atoms()[a].mass;
            match owner[v] {
                Some(k) => branches[k].node_mass += m,
                None => stub_mass += m,
            }
        }
    }
    if stub_mass > 0.0 {
        branches.push(Branch {
            id: branches.len() as u64 + 1,
            parent: None,
            geometry: PolylinePath::single(Point::origin(dim)),
            multiplicity: StepFunction::constant(stub_mass, 0.0)?,
            node_mass: stub_mass,
        });
    }
    BranchedNetwork::new(Point::origin(dim), branches)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::law::PsiLaw;
    use crate::measure::Atom;
    use crate::optimizer::topology::enumerate_topologies;

    fn measure(atoms: &[([f64; 2], f64)]) -> AtomicMeasure {
        AtomicMeasure::new(
            atoms
                .iter()
                .map(|(p, m)| Atom { point: p.to_vec().into(), mass: *m })
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn single_atom_is_a_straight_segment() {
        let mu = measure(&[([3.0, 4.0], 1.0)]);
        let law = LawSpec::new(WeightLaw::power(1.0, 0.5).unwrap(), PsiLaw::power(0.5).unwrap()).unwrap();
        let topo = &enumerate_topologies(1).unwrap()[0];
        let r = optimize_geometry(topo, &mu, &law, &OptimizeOptions::default()).unwrap();
        // W(0) = (1 + 2.5)^2 on a branch of length 5; cost = l + c l^2 / 4
        assert!((r.cost - (5.0 + 25.0 / 4.0)).abs() < 1e-12);
        assert_eq!(r.network.len(), 1);
    }

    #[test]
    fn evaluator_matches_network_cost() {
        let mu = measure(&[([1.0, 1.0], 0.5), ([-1.0, 1.0], 1.5)]);
        let law = LawSpec::new(WeightLaw::power(0.7, 0.6).unwrap(), PsiLaw::power(0.4).unwrap()).unwrap();
        let topo = &enumerate_topologies(2).unwrap()[1];
        let r = optimize_geometry(topo, &mu, &law, &OptimizeOptions::default()).unwrap();
        let eval = Evaluator::new(topo, &mu, &law);
        let pos: Vec<Vec<f64>> = r.positions.iter().map(|p| p.coords().to_vec()).collect();
        assert!((eval.cost(&pos) - r.cost).abs() < 1e-10);
    }
}
