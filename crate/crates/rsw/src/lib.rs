//! Numerical laboratory for gradient blow-up in the 2D rotating shallow
//! water equations: short-pulse initial data, evolution to shock formation,
//! acoustic ray tracing with the inverse foliation density, self-similar
//! profiles, and the associated diagnostics.

pub mod acoustic;
pub mod burgers;
pub mod diag;
pub mod error;
pub mod grid;
pub mod io;
pub mod pulse;
pub mod run;
pub mod solver;
pub mod state;

pub use error::{Result, RswError};
