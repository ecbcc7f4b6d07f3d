//! Splitting maximal paths into elementary paths at their bifurcation times.

use crate::error::{Error, Result};
use crate::geometry::{common_prefix_length, Point, PolylinePath};
use crate::network::{Branch, BranchId, BranchedNetwork};
use crate::step::StepFunction;

use super::good::MaximalGoodPath;

/// A maximal path restricted to `[start, end]` between consecutive split times.
#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryPath {
    pub id: BranchId,
    pub parent: Option<BranchId>,
    /// Index of the maximal path this piece was cut from.
    pub source: usize,
    pub start: f64,
    pub end: f64,
    pub geometry: PolylinePath,
    /// Multiplicity re-based to arc length from `start`.
    pub multiplicity: StepFunction,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ElementaryDecomposition {
    pub root: Point,
    pub maximal: Vec<MaximalGoodPath>,
    pub paths: Vec<ElementaryPath>,
    /// `bifurcation[i][j]`: length of the common prefix of maximal paths `i` and `j`.
    pub bifurcation: Vec<Vec<f64>>,
    /// Elementary ids along each maximal path, from the root outward.
    pub routes: Vec<Vec<BranchId>>,
}

impl ElementaryDecomposition {
    pub fn empty(root: Point) -> Self {
        ElementaryDecomposition {
            root,
            maximal: Vec::new(),
            paths: Vec::new(),
            bifurcation: Vec::new(),
            routes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn path(&self, id: BranchId) -> Option<&ElementaryPath> {
        self.paths.iter().find(|p| p.id == id)
    }

    /// Concatenates the elementary pieces of maximal path `j`.
    pub fn reassemble(&self, j: usize, tol: f64) -> Result<PolylinePath> {
        let mut it = self.routes[j].iter().map(|&id| &self.path(id).unwrap().geometry);
        let mut acc = it.next().unwrap().clone();
        for g in it {
            acc = acc.concat(g, tol)?;
        }
        Ok(acc)
    }

    /// The elementary path of route `j` containing time `t`, with `start < t <= end`.
    pub fn piece_at(&self, j: usize, t: f64) -> &ElementaryPath {
        let route = &self.routes[j];
        let k = route
            .iter()
            .position(|&id| self.path(id).unwrap().end >= t)
            .unwrap_or(route.len() - 1);
        self.path(route[k]).unwrap()
    }

    /// The decomposition as a network; tip node masses balance the flux.
    pub fn to_network(&self) -> Result<BranchedNetwork> {
        let branches = self
            .paths
            .iter()
            .map(|p| {
                let tip = p.multiplicity.terminal();
                let out: f64 = self
                    .paths
                    .iter()
                    .filter(|c| c.parent == Some(p.id))
                    .map(|c| c.multiplicity.initial())
                    .sum();
                let mut node_mass = tip - out;
                if node_mass < 0.0 && node_mass > -1e-12 * tip.max(1.0) {
                    node_mass = 0.0;
                }
                Branch {
                    id: p.id,
                    parent: p.parent,
                    geometry: p.geometry.clone(),
                    multiplicity: p.multiplicity.clone(),
                    node_mass,
                }
            })
            .collect();
        BranchedNetwork::new(self.root.clone(), branches)
    }
}

/// Splits every maximal path at the times where it separates from the others
/// and keeps each shared piece once, under the lowest-index path using it.
pub fn psa(goods: &[MaximalGoodPath], tol: f64) -> Result<ElementaryDecomposition> {
    let n = goods.len();
    if n == 0 {
        return Err(Error::PreconditionViolated("no maximal paths to split".into()));
    }
    let len: Vec<f64> = goods.iter().map(|g| g.length()).collect();
    let mut tau = vec![vec![0.0; n]; n];
    for i in 0..n {
        tau[i][i] = len[i];
        for j in i + 1..n {
            let t = common_prefix_length(&goods[i].geometry, &goods[j].geometry, tol);
            if t >= len[i].min(len[j]) - tol {
                let (short, long) = if len[i] <= len[j] { (i, j) } else { (j, i) };
                return Err(Error::NotMaximal(short, long));
            }
            tau[i][j] = t;
            tau[j][i] = t;
        }
    }
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                if tau[i][k] < tau[i][j].min(tau[j][k]) - tol {
                    return Err(Error::InconsistentPrefix(i, k));
                }
            }
        }
    }
    for i in 0..n {
        for j in i + 1..n {
            if !same_multiplicity(&goods[i].multiplicity, &goods[j].multiplicity, tau[i][j]) {
                return Err(Error::InconsistentPrefix(i, j));
            }
        }
    }

    // split times and the canonical owner of every piece
    let splits: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut s: Vec<f64> = (0..n)
                .filter(|&i| i != j && tau[i][j] > tol)
                .map(|i| tau[i][j])
                .collect();
            s.push(len[j]);
            s.sort_by(|a, b| a.partial_cmp(b).unwrap());
            let mut out: Vec<f64> = Vec::with_capacity(s.len());
            for t in s {
                match out.last_mut() {
                    Some(last) if t - *last <= tol => *last = last.max(t),
                    _ => out.push(t),
                }
            }
            *out.last_mut().unwrap() = len[j];
            out
        })
        .collect();
    let owner = |j: usize, t: f64| (0..=j).find(|&i| i == j || tau[i][j] >= t - tol).unwrap();

    let mut ids: Vec<Vec<Option<BranchId>>> = splits.iter().map(|s| vec![None; s.len()]).collect();
    let mut next: BranchId = 1;
    for j in 0..n {
        for (l, &t) in splits[j].iter().enumerate() {
            if owner(j, t) == j {
                ids[j][l] = Some(next);
                next += 1;
            }
        }
    }
    let lookup = |j: usize, l: usize| -> BranchId {
        let t = splits[j][l];
        let o = owner(j, t);
        if o == j {
            return ids[j][l].unwrap();
        }
        let (lo, _) = splits[o]
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - t).abs().partial_cmp(&(b.1 - t).abs()).unwrap())
            .unwrap();
        ids[o][lo].expect("a piece owned by its owner")
    };

    let mut paths = Vec::new();
    let mut routes = vec![Vec::new(); n];
    for j in 0..n {
        for l in 0..splits[j].len() {
            let id = lookup(j, l);
            routes[j].push(id);
            if ids[j][l].is_none() {
                continue;
            }
            let a = if l == 0 { 0.0 } else { splits[j][l - 1] };
            let b = splits[j][l];
            let geometry = goods[j].geometry.sub_path(a, b);
            let multiplicity = goods[j].multiplicity.restrict(a, b).with_end(geometry.length())?;
            paths.push(ElementaryPath {
                id,
                parent: if l == 0 { None } else { Some(lookup(j, l - 1)) },
                source: j,
                start: a,
                end: b,
                geometry,
                multiplicity,
            });
        }
    }
    Ok(ElementaryDecomposition {
        root: goods[0].geometry.start().clone(),
        maximal: goods.to_vec(),
        paths,
        bifurcation: tau,
        routes,
    })
}

fn same_multiplicity(a: &StepFunction, b: &StepFunction, upto: f64) -> bool {
    let mut knots: Vec<f64> = a
        .knots()
        .iter()
        .chain(b.knots())
        .copied()
        .filter(|&k| k < upto)
        .collect();
    knots.push(upto);
    knots.sort_by(|x, y| x.partial_cmp(y).unwrap());
    knots.dedup();
    knots.windows(2).filter(|w| w[1] - w[0] > 1e-9).all(|w| {
        let t = 0.5 * (w[0] + w[1]);
        (a.eval(t) - b.eval(t)).abs() <= 1e-12 * a.eval(t).max(1.0)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::good::good_paths;
    use crate::measure::{IrrigationPlan, ParticleGroup};

    fn group(mass: f64, pts: &[[f64; 2]]) -> ParticleGroup {
        ParticleGroup::new(mass, PolylinePath::from_coords(pts.iter().copied()).unwrap())
    }

    #[test]
    fn y_shape_gives_three_pieces() {
        let plan = IrrigationPlan::new(vec![
            group(0.6, &[[0.0, 0.0], [0.0, 1.0], [1.0, 2.0]]),
            group(0.4, &[[0.0, 0.0], [0.0, 1.0], [-1.0, 2.0]]),
        ])
        .unwrap();
        let d = psa(&good_paths(&plan, 0.1, 1e-9).unwrap(), 1e-9).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.routes, vec![vec![1, 2], vec![1, 3]]);
        assert_eq!(d.paths[0].multiplicity.values(), &[1.0]);
        let net = d.to_network().unwrap();
        assert_eq!(net.branch(1).unwrap().node_mass, 0.0);
        assert_eq!(net.branch(3).unwrap().node_mass, 0.4);
        for j in 0..2 {
            let whole = d.reassemble(j, 1e-9).unwrap();
            assert!(crate::geometry::paths_equivalent(&whole, &d.maximal[j].geometry, 1e-12));
        }
    }

    #[test]
    fn single_path_is_not_split() {
        let plan = IrrigationPlan::new(vec![group(1.0, &[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])]).unwrap();
        let d = psa(&good_paths(&plan, 0.5, 1e-9).unwrap(), 1e-9).unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d.paths[0].parent, None);
    }

    #[test]
    fn rejects_prefix_and_empty() {
        let plan = IrrigationPlan::new(vec![group(1.0, &[[0.0, 0.0], [2.0, 0.0]])]).unwrap();
        let mut goods = good_paths(&plan, 0.5, 1e-9).unwrap();
        let mut short = goods[0].clone();
        short.geometry = short.geometry.prefix(1.0);
        short.multiplicity = short.multiplicity.restrict(0.0, 1.0);
        goods.push(short);
        assert!(matches!(psa(&goods, 1e-9), Err(Error::NotMaximal(1, 0))));
        assert!(psa(&[], 1e-9).is_err());
    }
}
