//! Named sequences of plans converging pointwise to a limit plan.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::frechet::param_free_distance;
use crate::geometry::PolylinePath;
use crate::measure::{IrrigationPlan, ParticleGroup};

type Generator = dyn Fn(usize) -> Result<IrrigationPlan> + Send + Sync;

/// Plans `χ_n` for `n >= 1` together with their limit `χ`; group `g` of every
/// `χ_n` corresponds to group `g` of the limit.
#[derive(Clone)]
pub struct PlanSequence {
    name: String,
    limit: IrrigationPlan,
    make: Arc<Generator>,
}

impl fmt::Debug for PlanSequence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PlanSequence")
            .field("name", &self.name)
            .field("limit", &self.limit)
            .finish_non_exhaustive()
    }
}

pub const BUILTIN_SEQUENCES: [&str; 5] = ["collapsing-v", "zigzag", "shortened", "late-split", "constant"];

fn path(pts: &[[f64; 2]]) -> PolylinePath {
    PolylinePath::from_coords(pts.iter().map(|p| p.to_vec())).expect("fixed coordinates")
}

fn y_plan() -> IrrigationPlan {
    IrrigationPlan::new(vec![
        ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, 1.0], [1.0, 2.0]])),
        ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, 1.0], [-1.0, 2.0]])),
    ])
    .expect("valid")
}

impl PlanSequence {
    pub fn new<F>(name: impl Into<String>, limit: IrrigationPlan, make: F) -> Self
    where
        F: Fn(usize) -> Result<IrrigationPlan> + Send + Sync + 'static,
    {
        PlanSequence {
            name: name.into(),
            limit,
            make: Arc::new(make),
        }
    }

    /// One of [`BUILTIN_SEQUENCES`]:
    ///
    /// * `collapsing-v`: two unit groups along `(0,0)-(±1/n,1)` merging into `(0,0)-(0,1)`.
    /// * `zigzag`: one unit group on a zigzag of length √2 with amplitude `1/(2n)` around `(0,0)-(0,1)`.
    /// * `shortened`: the Y plan with every path cut to the fraction `n/(n+1)` of its length.
    /// * `late-split`: a Y whose trunk reaches `(0, 1+1/n)` before splitting to `(±1,2)`.
    /// * `constant`: the Y plan itself, trunk to `(0,1)` then `(±1,2)`.
    pub fn builtin(name: &str) -> Result<Self> {
        let seq = match name {
            "collapsing-v" => {
                let limit = IrrigationPlan::new(vec![
                    ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, 1.0]])),
                    ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, 1.0]])),
                ])?;
                PlanSequence::new(name, limit, |n| {
                    let x = 1.0 / n as f64;
                    IrrigationPlan::new(vec![
                        ParticleGroup::new(1.0, path(&[[0.0, 0.0], [x, 1.0]])),
                        ParticleGroup::new(1.0, path(&[[0.0, 0.0], [-x, 1.0]])),
                    ])
                })
            }
            "zigzag" => {
                let limit = IrrigationPlan::new(vec![ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, 1.0]]))])?;
                PlanSequence::new(name, limit, |n| {
                    let h = 0.5 / n as f64;
                    let pts: Vec<Vec<f64>> = (0..=2 * n)
                        .map(|k| vec![if k % 2 == 1 { h } else { 0.0 }, k as f64 * h])
                        .collect();
                    IrrigationPlan::new(vec![ParticleGroup::new(1.0, PolylinePath::from_coords(pts)?)])
                })
            }
            "shortened" => PlanSequence::new(name, y_plan(), |n| {
                let frac = n as f64 / (n as f64 + 1.0);
                IrrigationPlan::new(
                    y_plan()
                        .groups()
                        .iter()
                        .map(|g| ParticleGroup::new(g.mass, g.path.prefix(frac * g.path.length())))
                        .collect(),
                )
            }),
            "late-split" => PlanSequence::new(name, y_plan(), |n| {
                let top = 1.0 + 1.0 / n as f64;
                IrrigationPlan::new(vec![
                    ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, top], [1.0, 2.0]])),
                    ParticleGroup::new(1.0, path(&[[0.0, 0.0], [0.0, top], [-1.0, 2.0]])),
                ])
            }),
            "constant" => PlanSequence::new(name, y_plan(), |_| Ok(y_plan())),
            _ => return Err(Error::UnknownSequence(name.to_string())),
        };
        Ok(seq)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn limit(&self) -> &IrrigationPlan {
        &self.limit
    }

    pub fn plan(&self, n: usize) -> Result<IrrigationPlan> {
        if n == 0 {
            return Err(Error::PreconditionViolated("sequence index starts at 1".into()));
        }
        let p = (self.make)(n)?;
        if p.len() != self.limit.len() {
            return Err(Error::InvalidPlan(format!(
                "plan {n} has {} groups but the limit has {}",
                p.len(),
                self.limit.len()
            )));
        }
        Ok(p)
    }

    /// Largest parameterization-free distance between corresponding groups of `χ_n` and `χ`.
    pub fn delta(&self, plan: &IrrigationPlan) -> f64 {
        plan.groups()
            .iter()
            .zip(self.limit.groups())
            .map(|(a, b)| param_free_distance(&a.path, &b.path))
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_converge() {
        for name in BUILTIN_SEQUENCES {
            let s = PlanSequence::builtin(name).unwrap();
            let d: Vec<f64> = [1, 4, 16].iter().map(|&n| s.delta(&s.plan(n).unwrap())).collect();
            assert!(d[2] <= d[1] && d[1] <= d[0], "{name}: {d:?}");
        }
        assert!(matches!(PlanSequence::builtin("spiral"), Err(Error::UnknownSequence(_))));
    }

    #[test]
    fn zigzag_keeps_its_length() {
        let s = PlanSequence::builtin("zigzag").unwrap();
        let p = s.plan(5).unwrap();
        assert!((p.groups()[0].path.length() - 2f64.sqrt()).abs() < 1e-12);
        assert!((s.delta(&p) - 0.1).abs() < 1e-12);
    }
}
