//! Compatibility of quantum channels.
//!
//! Decides whether channels admit a joint compatibilizer (plain, Jordan,
//! PPT-restricted and k-copy variants) with a small embedded SDP engine, and
//! produces certificates that can be checked without trusting the solver.

pub mod analytic;
pub mod channels;
pub mod cli;
pub mod error;
pub mod io;
pub mod jordan;
pub mod linalg;
pub mod marginal;
pub mod random;
pub mod reference;
pub mod sdp;
pub mod sweep;
pub mod witness;

pub use error::{Error, Result};
