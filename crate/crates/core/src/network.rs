//! Rooted trees of branches with per-branch multiplicities.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PolylinePath};
use crate::step::{StepFunction, StepPiece};

pub type BranchId = u64;

/// Tolerance for geometric continuity at junctions.
pub const JUNCTION_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    pub id: BranchId,
    pub parent: Option<BranchId>,
    pub geometry: PolylinePath,
    /// Multiplicity as a function of arc length from the branch start.
    pub multiplicity: StepFunction,
    /// Mass deposited at the tip.
    pub node_mass: f64,
}

impl Branch {
    pub fn length(&self) -> f64 {
        self.geometry.length()
    }

    /// `m(0+)`, the flux entering the branch.
    pub fn inflow(&self) -> f64 {
        self.multiplicity.initial()
    }

    /// `m(l)`, the flux reaching the tip.
    pub fn tip_multiplicity(&self) -> f64 {
        self.multiplicity.terminal()
    }
}

/// A validated branched network.
///
/// Parent links form a tree, every child starts where its parent ends, and at
/// every tip the multiplicity equals the children's inflow plus the node mass.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkRepr", into = "NetworkRepr")]
pub struct BranchedNetwork {
    root: Point,
    branches: Vec<Branch>,
    index: HashMap<BranchId, usize>,
    children: Vec<Vec<usize>>,
}

#[derive(Serialize, Deserialize)]
struct BranchRepr {
    id: BranchId,
    parent: Option<BranchId>,
    vertices: Vec<Point>,
    multiplicity: Vec<StepPiece>,
    #[serde(default)]
    node_mass: Option<f64>,
}

#[derive(Serialize, Deserialize)]
struct NetworkRepr {
    root: Point,
    branches: Vec<BranchRepr>,
}

impl TryFrom<NetworkRepr> for BranchedNetwork {
    type Error = Error;

    fn try_from(r: NetworkRepr) -> Result<Self> {
        let mut raw = Vec::with_capacity(r.branches.len());
        for b in r.branches {
            let geometry = PolylinePath::new(b.vertices)?;
            let multiplicity = StepFunction::from_pieces(&b.multiplicity, geometry.length())?;
            raw.push((
                Branch {
                    id: b.id,
                    parent: b.parent,
                    geometry,
                    multiplicity,
                    node_mass: b.node_mass.unwrap_or(f64::NAN),
                },
                b.node_mass.is_none(),
            ));
        }
        // absent node masses are whatever balances the tip
        let inflow: HashMap<BranchId, f64> = raw.iter().fold(HashMap::new(), |mut acc, (b, _)| {
            if let Some(p) = b.parent {
                *acc.entry(p).or_insert(0.0) += b.inflow();
            }
            acc
        });
        let branches = raw
            .into_iter()
            .map(|(mut b, infer)| {
                if infer {
                    b.node_mass = b.tip_multiplicity() - inflow.get(&b.id).copied().unwrap_or(0.0);
                }
                b
            })
            .collect();
        BranchedNetwork::new(r.root, branches)
    }
}

impl From<BranchedNetwork> for NetworkRepr {
    fn from(n: BranchedNetwork) -> Self {
        NetworkRepr {
            root: n.root,
            branches: n
                .branches
                .into_iter()
                .map(|b| BranchRepr {
                    id: b.id,
                    parent: b.parent,
                    multiplicity: b.multiplicity.to_pieces(),
                    vertices: b.geometry.vertices().to_vec(),
                    node_mass: Some(b.node_mass),
                })
                .collect(),
        }
    }
}

impl BranchedNetwork {
    pub fn new(root: Point, mut branches: Vec<Branch>) -> Result<Self> {
        for b in &mut branches {
            let len = b.length();
            let end = b.multiplicity.end();
            if end != len && (end - len).abs() <= 1e-9 * len.max(1.0) {
                b.multiplicity = b.multiplicity.with_end(len)?;
            }
        }
        let mut index = HashMap::with_capacity(branches.len());
        for (k, b) in branches.iter().enumerate() {
            if index.insert(b.id, k).is_some() {
                return Err(Error::InvalidNetwork(format!("duplicate branch id {}", b.id)));
            }
        }
        let mut children = vec![Vec::new(); branches.len()];
        for (k, b) in branches.iter().enumerate() {
            if let Some(p) = b.parent {
                let &pk = index.get(&p).ok_or_else(|| {
                    Error::InvalidNetwork(format!("branch {} has unknown parent {p}", b.id))
                })?;
                children[pk].push(k);
            }
        }
        let net = BranchedNetwork {
            root,
            branches,
            index,
            children,
        };
        net.check_acyclic()?;
        for k in 0..net.branches.len() {
            net.check_branch(k)?;
        }
        Ok(net)
    }

    /// A network with no branches, only a root point.
    pub fn empty(root: Point) -> Self {
        BranchedNetwork {
            root,
            branches: Vec::new(),
            index: HashMap::new(),
            children: Vec::new(),
        }
    }

    fn check_acyclic(&self) -> Result<()> {
        // 0 = unvisited, 1 = on current chain, 2 = reaches the root
        let mut state = vec![0u8; self.branches.len()];
        for start in 0..self.branches.len() {
            let mut chain = Vec::new();
            let mut k = start;
            loop {
                match state[k] {
                    2 => break,
                    1 => return Err(Error::CycleDetected(self.branches[k].id)),
                    _ => {}
                }
                state[k] = 1;
                chain.push(k);
                match self.branches[k].parent {
                    Some(p) => k = self.index[&p],
                    None => break,
                }
            }
            for c in chain {
                state[c] = 2;
            }
        }
        Ok(())
    }

    fn check_branch(&self, k: usize) -> Result<()> {
        let b = &self.branches[k];
        if b.geometry.dim() != self.root.dim() {
            return Err(Error::InvalidNetwork(format!(
                "branch {} has dimension {} but the root has {}",
                b.id,
                b.geometry.dim(),
                self.root.dim()
            )));
        }
        let anchor = match b.parent {
            None => &self.root,
            Some(p) => self.branches[self.index[&p]].geometry.end(),
        };
        if anchor.distance(b.geometry.start()) > JUNCTION_TOL {
            return Err(Error::InvalidNetwork(format!(
                "branch {} does not start where its parent ends",
                b.id
            )));
        }
        let len = b.length();
        if len == 0.0 && b.parent.is_some() {
            return Err(Error::InvalidNetwork(format!(
                "zero-length branch {} is only allowed at the root",
                b.id
            )));
        }
        if (b.multiplicity.end() - len).abs() > 1e-9 * len.max(1.0) {
            return Err(Error::InvalidNetwork(format!(
                "multiplicity of branch {} covers [0, {}] but the branch has length {len}",
                b.id,
                b.multiplicity.end()
            )));
        }
        if !(b.node_mass.is_finite() && b.node_mass >= 0.0) {
            return Err(Error::ConservationViolated {
                id: b.id,
                tip: b.tip_multiplicity(),
                inflow: b.node_mass,
            });
        }
        let tip = b.tip_multiplicity();
        let inflow: f64 =
            self.children[k].iter().map(|&c| self.branches[c].inflow()).sum::<f64>() + b.node_mass;
        if (tip - inflow).abs() > 1e-12 * tip.max(1.0) {
            return Err(Error::ConservationViolated { id: b.id, tip, inflow });
        }
        Ok(())
    }

    pub fn root(&self) -> &Point {
        &self.root
    }

    pub fn dim(&self) -> usize {
        self.root.dim()
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    pub fn len(&self) -> usize {
        self.branches.len()
    }

    pub fn is_empty(&self) -> bool {
        self.branches.is_empty()
    }

    pub fn branch(&self, id: BranchId) -> Option<&Branch> {
        self.index.get(&id).map(|&k| &self.branches[k])
    }

    /// Ids of the branches starting at the tip of `id`.
    pub fn children(&self, id: BranchId) -> Vec<BranchId> {
        self.index
            .get(&id)
            .map(|&k| self.children[k].iter().map(|&c| self.branches[c].id).collect())
            .unwrap_or_default()
    }

    pub fn roots(&self) -> impl Iterator<Item = &Branch> {
        self.branches.iter().filter(|b| b.parent.is_none())
    }

    pub fn total_length(&self) -> f64 {
        self.branches.iter().map(Branch::length).sum()
    }

    /// Total mass delivered at tips.
    pub fn total_mass(&self) -> f64 {
        self.branches.iter().map(|b| b.node_mass).sum()
    }

    pub(crate) fn child_indices(&self, k: usize) -> &[usize] {
        &self.children[k]
    }
}
