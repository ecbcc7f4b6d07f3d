//! Weighted branched transport: branch weights, Lagrangian plans, path
//! splitting and optimal irrigation networks for atomic measures.

pub mod error;
pub mod experiments;
pub mod frechet;
pub mod geometry;
pub mod lagrangian;
pub mod law;
pub mod measure;
pub mod network;
pub mod ode;
pub mod optimizer;
pub mod quadrature;
pub mod step;
pub mod tree;

pub use error::{Error, Result};
pub use geometry::{Point, PolylinePath};
pub use law::{Gauge, GaugeTerm, LawSpec, PsiLaw, WeightLaw};
pub use measure::{Atom, AtomicMeasure, IrrigationPlan, ParticleGroup};
pub use network::{Branch, BranchId, BranchedNetwork};
pub use ode::{Quadrature, SolveMethod, WeightProfile};
pub use step::StepFunction;
