//! Minimizers, mountain-pass critical points and heteroclinic solutions for
//! generalized Frenkel-Kontorova models on `Z^n`.

pub mod error;
pub mod field;
pub mod flow;
pub mod functional;
pub mod hetero;
pub mod linalg;
pub mod model;
pub mod mpp;
pub mod periodic;
pub mod tolerances;
pub mod verify;

pub use error::{FkError, Result};
pub use field::{Periods, StripField, TorusField, TransversePeriods};
pub use flow::{FlowOutcome, FlowParams, TracePoint};
pub use functional::{Functional, LatticeProblem};
pub use model::{build_potential, FkPotential, LatticeFn, LatticeIndex, ModelSpec, SitePotential};
pub use periodic::GapPair;
