//! Rooted tree shapes with labelled leaves.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A rooted tree over `n` atoms.
///
/// Node 0 is the fixed root at the origin. Every leaf carries exactly one atom
/// and every other non-root node is a movable branch point with at least two
/// children.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    parent: Vec<Option<usize>>,
    atom: Vec<Option<usize>>,
}

impl Topology {
    pub fn new(parent: Vec<Option<usize>>, atom: Vec<Option<usize>>) -> Result<Self> {
        let t = Topology { parent, atom };
        t.validate()?;
        Ok(t)
    }

    fn validate(&self) -> Result<()> {
        let n = self.parent.len();
        if n < 2 || self.atom.len() != n {
            return Err(Error::InvalidTopology("need a root and at least one leaf".into()));
        }
        if self.parent[0].is_some() || self.atom[0].is_some() {
            return Err(Error::InvalidTopology("node 0 must be the root".into()));
        }
        for v in 1..n {
            // parents precede children, which also rules out cycles
            match self.parent[v] {
                Some(p) if p < v => {}
                _ => return Err(Error::InvalidTopology(format!("node {v} has a bad parent"))),
            }
        }
        let mut seen = vec![false; self.atom_count()];
        for v in 1..n {
            let kids = self.children(v).len();
            match self.atom[v] {
                Some(a) => {
                    if kids > 0 || a >= seen.len() || seen[a] {
                        return Err(Error::InvalidTopology(format!("bad leaf {v}")));
                    }
                    seen[a] = true;
                }
                None if kids < 2 => {
                    return Err(Error::InvalidTopology(format!(
                        "branch point {v} has {kids} children"
                    )))
                }
                None => {}
            }
        }
        if self.children(0).is_empty() {
            return Err(Error::InvalidTopology("root has no children".into()));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        self.parent.len()
    }

    pub fn atom_count(&self) -> usize {
        self.atom.iter().filter(|a| a.is_some()).count()
    }

    pub fn parent(&self, v: usize) -> Option<usize> {
        self.parent[v]
    }

    pub fn atom(&self, v: usize) -> Option<usize> {
        self.atom[v]
    }

    pub fn children(&self, v: usize) -> Vec<usize> {
        (0..self.parent.len()).filter(|&c| self.parent[c] == Some(v)).collect()
    }

    /// Movable nodes: neither the root nor a leaf.
    pub fn branch_points(&self) -> Vec<usize> {
        (1..self.parent.len()).filter(|&v| self.atom[v].is_none()).collect()
    }

    /// Canonical nested-parenthesis form, e.g. `((0,1),2)`; `(0,1)` is a root with two leaves.
    pub fn describe(&self) -> String {
        fn rec(t: &Topology, v: usize) -> String {
            if let Some(a) = t.atom[v] {
                return a.to_string();
            }
            let mut parts: Vec<String> = t.children(v).into_iter().map(|c| rec(t, c)).collect();
            parts.sort();
            format!("({})", parts.join(","))
        }
        rec(self, 0)
    }
}

/// Leaf-labelled hierarchy; the node without a parent is the top.
#[derive(Clone)]
struct Hierarchy {
    parent: Vec<Option<usize>>,
    atom: Vec<Option<usize>>,
}

impl Hierarchy {
    fn top(&self) -> usize {
        self.parent.iter().position(Option::is_none).unwrap()
    }

    /// Every way to attach leaf `a`: below an internal node, or on the edge above any node.
    fn insertions(&self, a: usize) -> Vec<Hierarchy> {
        let n = self.parent.len();
        let mut out = Vec::new();
        for v in 0..n {
            if self.atom[v].is_none() {
                let mut h = self.clone();
                h.parent.push(Some(v));
                h.atom.push(Some(a));
                out.push(h);
            }
        }
        for v in 0..n {
            let mut h = self.clone();
            let u = n;
            h.parent.push(self.parent[v]);
            h.atom.push(None);
            h.parent[v] = Some(u);
            h.parent.push(Some(u));
            h.atom.push(Some(a));
            out.push(h);
        }
        out
    }

    /// Relabels nodes so that parents come first, with the root as node 0.
    fn to_topology(&self, with_trunk: bool) -> Topology {
        let top = self.top();
        let mut parent = vec![None];
        let mut atom = vec![None];
        let mut stack: Vec<(usize, usize)> = Vec::new();
        if with_trunk {
            parent.push(Some(0));
            atom.push(self.atom[top]);
            stack.push((top, 1));
        } else {
            stack.push((top, 0));
        }
        while let Some((v, id)) = stack.pop() {
            let kids: Vec<usize> = (0..self.parent.len())
                .filter(|&c| self.parent[c] == Some(v))
                .collect();
            for &c in kids.iter().rev() {
                let cid = parent.len();
                parent.push(Some(id));
                atom.push(self.atom[c]);
                stack.push((c, cid));
            }
        }
        Topology { parent, atom }
    }
}

/// All topologies over `n` atoms: for each leaf hierarchy, one shape with the
/// top branch point at the root and one with a trunk leading to it.
pub fn enumerate_topologies(n: usize) -> Result<Vec<Topology>> {
    if n == 0 {
        return Err(Error::InvalidTopology("need at least one atom".into()));
    }
    if n > super::MAX_ATOMS {
        return Err(Error::TooManyAtoms(n));
    }
    let mut level = vec![Hierarchy {
        parent: vec![None],
        atom: vec![Some(0)],
    }];
    for a in 1..n {
        level = level.iter().flat_map(|h| h.insertions(a)).collect();
    }
    if n == 1 {
        return Ok(vec![level[0].to_topology(true)]);
    }
    let mut out = Vec::with_capacity(2 * level.len());
    for h in &level {
        out.push(h.to_topology(false));
        out.push(h.to_topology(true));
    }
    Ok(out)
}
