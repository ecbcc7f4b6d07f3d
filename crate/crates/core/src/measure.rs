//! Atomic target measures and finite irrigation plans.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Point, PolylinePath};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub point: Point,
    pub mass: f64,
}

/// Finitely many point masses, all strictly positive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "MeasureRepr", into = "MeasureRepr")]
pub struct AtomicMeasure {
    atoms: Vec<Atom>,
}

#[derive(Serialize, Deserialize)]
struct MeasureRepr {
    atoms: Vec<Atom>,
}

impl TryFrom<MeasureRepr> for AtomicMeasure {
    type Error = Error;
    fn try_from(r: MeasureRepr) -> Result<Self> {
        AtomicMeasure::new(r.atoms)
    }
}

impl From<AtomicMeasure> for MeasureRepr {
    fn from(m: AtomicMeasure) -> Self {
        MeasureRepr { atoms: m.atoms }
    }
}

impl AtomicMeasure {
    pub fn new(atoms: Vec<Atom>) -> Result<Self> {
        let dim = atoms
            .first()
            .ok_or_else(|| Error::InvalidMeasure("measure has no atoms".into()))?
            .point
            .dim();
        for a in &atoms {
            if !(a.mass > 0.0 && a.mass.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom mass {} must be positive",
                    a.mass
                )));
            }
            if a.point.dim() != dim || dim == 0 {
                return Err(Error::InvalidMeasure("atoms have inconsistent dimensions".into()));
            }
            if a.point.0.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidMeasure("non-finite atom coordinate".into()));
            }
        }
        Ok(AtomicMeasure { atoms })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn total_mass(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    pub fn dim(&self) -> usize {
        self.atoms[0].point.dim()
    }

    /// Merges atoms whose positions agree within `tol`, keeping first-seen order.
    pub fn merged(&self, tol: f64) -> AtomicMeasure {
        let mut out: Vec<Atom> = Vec::new();
        for a in &self.atoms {
            match out.iter_mut().find(|b| b.point.distance(&a.point) <= tol) {
                Some(b) => b.mass += a.mass,
                None => out.push(a.clone()),
            }
        }
        AtomicMeasure { atoms: out }
    }
}

/// A packet of particles of total `mass` travelling together along `path`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParticleGroup {
    pub mass: f64,
    pub path: PolylinePath,
}

impl ParticleGroup {
    pub fn new(mass: f64, path: PolylinePath) -> Self {
        ParticleGroup { mass, path }
    }

    /// Travel time of the group; paths are arc-length parameterized.
    pub fn stopping_length(&self) -> f64 {
        self.path.length()
    }
}

/// A discretized irrigation plan: every group starts at the origin.
///
/// Zero-mass groups are representable so that the positivity condition on
/// multiplicities can be checked rather than assumed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PlanRepr", into = "PlanRepr")]
pub struct IrrigationPlan {
    groups: Vec<ParticleGroup>,
}

#[derive(Serialize, Deserialize)]
struct PlanRepr {
    groups: Vec<ParticleGroup>,
}

impl TryFrom<PlanRepr> for IrrigationPlan {
    type Error = Error;
    fn try_from(r: PlanRepr) -> Result<Self> {
        IrrigationPlan::new(r.groups)
    }
}

impl From<IrrigationPlan> for PlanRepr {
    fn from(p: IrrigationPlan) -> Self {
        PlanRepr { groups: p.groups }
    }
}

impl IrrigationPlan {
    pub fn new(groups: Vec<ParticleGroup>) -> Result<Self> {
        let dim = groups.first().map(|g| g.path.dim());
        for (i, g) in groups.iter().enumerate() {
            if !(g.mass >= 0.0 && g.mass.is_finite()) {
                return Err(Error::InvalidPlan(format!(
                    "group {i} has invalid mass {}",
                    g.mass
                )));
            }
            if Some(g.path.dim()) != dim {
                return Err(Error::InvalidPlan("groups have inconsistent dimensions".into()));
            }
            if g.path.start().norm() > 1e-12 {
                return Err(Error::InvalidPlan(format!(
                    "group {i} does not start at the origin"
                )));
            }
        }
        Ok(IrrigationPlan { groups })
    }

    pub fn empty() -> Self {
        IrrigationPlan { groups: Vec::new() }
    }

    pub fn groups(&self) -> &[ParticleGroup] {
        &self.groups
    }

    pub fn group(&self, g: usize) -> Result<&ParticleGroup> {
        self.groups.get(g).ok_or(Error::UnknownGroup(g))
    }

    pub fn len(&self) -> usize {
        self.groups.len()
    }

    pub fn is_empty(&self) -> bool {
        self.groups.is_empty()
    }

    pub fn total_mass(&self) -> f64 {
        self.groups.iter().map(|g| g.mass).sum()
    }

    /// Push-forward of the group masses by their endpoints.
    pub fn target_measure(&self, tol: f64) -> Result<AtomicMeasure> {
        let atoms = self
            .groups
            .iter()
            .filter(|g| g.mass > 0.0)
            .map(|g| Atom {
                point: g.path.end().clone(),
                mass: g.mass,
            })
            .collect();
        Ok(AtomicMeasure::new(atoms)?.merged(tol))
    }

    /// Whether the plan irrigates `mu`: same total mass and matching endpoint masses.
    pub fn irrigates(&self, mu: &AtomicMeasure, tol: f64) -> bool {
        let Ok(target) = self.target_measure(tol) else {
            return false;
        };
        let mu = mu.merged(tol);
        let scale = mu.total_mass().max(1.0);
        target.atoms().len() == mu.atoms().len()
            && mu.atoms().iter().all(|a| {
                target.atoms().iter().any(|b| {
                    b.point.distance(&a.point) <= tol && (b.mass - a.mass).abs() <= 1e-12 * scale
                })
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn measure_total_and_validation() {
        let mu = AtomicMeasure::new(vec![
            Atom { point: [1.0, 0.0].into(), mass: 0.25 },
            Atom { point: [0.0, 1.0].into(), mass: 0.75 },
        ])
        .unwrap();
        assert_eq!(mu.total_mass(), 1.0);
        assert!(AtomicMeasure::new(vec![Atom { point: [1.0].into(), mass: 0.0 }]).is_err());
        assert!(AtomicMeasure::new(vec![]).is_err());
    }

    #[test]
    fn plan_must_start_at_origin() {
        let off = PolylinePath::from_coords([[1.0, 0.0], [2.0, 0.0]]).unwrap();
        assert!(IrrigationPlan::new(vec![ParticleGroup::new(1.0, off)]).is_err());
    }

    #[test]
    fn plan_irrigates_its_endpoints() {
        let a = PolylinePath::from_coords([[0.0, 0.0], [1.0, 0.0]]).unwrap();
        let b = PolylinePath::from_coords([[0.0, 0.0], [0.5, 0.0], [1.0, 0.0]]).unwrap();
        let plan = IrrigationPlan::new(vec![
            ParticleGroup::new(0.4, a),
            ParticleGroup::new(0.6, b),
        ])
        .unwrap();
        let mu = AtomicMeasure::new(vec![Atom { point: [1.0, 0.0].into(), mass: 1.0 }]).unwrap();
        assert!(plan.irrigates(&mu, 1e-9));
        assert_eq!(plan.target_measure(1e-9).unwrap().atoms().len(), 1);
    }

    #[test]
    fn json_shape() {
        let json = r#"{"groups":[{"mass":1.0,"path":[[0.0,0.0],[1.0,1.0]]}]}"#;
        let plan: IrrigationPlan = serde_json::from_str(json).unwrap();
        assert_eq!(plan.len(), 1);
        let back: IrrigationPlan = serde_json::from_str(&serde_json::to_string(&plan).unwrap()).unwrap();
        assert_eq!(back, plan);
        let bad = r#"{"groups":[{"mass":1.0,"path":[[1.0,0.0],[1.0,1.0]]}]}"#;
        assert!(serde_json::from_str::<IrrigationPlan>(bad).is_err());
    }
}
