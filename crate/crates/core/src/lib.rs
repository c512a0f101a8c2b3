pub mod admm;
pub mod baseline;
pub mod bic;
pub mod echo;
pub mod error;
pub mod freq_init;
pub mod harness;
pub mod likelihood;
pub mod mmrelax;
pub mod obm;
pub mod reference;
pub mod relax;
pub mod signal;

pub use error::{Error, Result};
