//! Numerical laboratory for the Rademacher maximal function on dyadic
//! trees: R-bound estimation, dyadic systems, Haar and martingale
//! transforms, Calderón–Zygmund / Gundy / atomic decompositions,
//! Muckenhoupt weight diagnostics, and a seeded experiment harness.

pub mod corpus;
pub mod decomp;
pub mod dyadic;
pub mod error;
pub mod haar;
pub mod maximal;
pub mod rademacher;
pub mod space;
pub mod stepfn;

pub use dyadic::{Cube, DyadicTree};
pub use error::{Error, Result};
pub use maximal::MaxField;
pub use rademacher::{EstimatorConfig, EstimatorKind, RadEstimate, Selection, UpperMethod};
pub use space::NormedSpace;
pub use stepfn::StepFunction;
