//! Numerics for central limit theorems in Hölder spaces: Orlicz and Grand
//! Lebesgue norms, majorizing-measure distances on finite metric spaces,
//! Hölder and rectangle-Hölder norms, seeded random fields and Monte Carlo
//! audits of the associated moment and modulus inequalities.

pub mod cli;
pub mod clt;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod grand_lebesgue;
pub mod holder;
pub mod io;
pub mod numeric;
pub mod orlicz;

pub use error::{Error, Result};
