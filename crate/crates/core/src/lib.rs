//! Construction, verification and simulation of initial data for which the
//! porous medium equation instantaneously loses alpha-concavity of the pressure.

pub mod assembly;
pub mod cli;
pub mod construction;
pub mod dd;
pub mod error;
pub mod kv;
pub mod linalg;
pub mod polyjet;
pub mod sampling;
pub mod solver;
pub mod verifier;

pub use error::{Error, Result};
