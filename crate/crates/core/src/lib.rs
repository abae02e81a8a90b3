pub mod cli;
pub mod dynamics;
pub mod error;
pub mod feasibility;
pub mod optimizer;
pub mod protocol;
pub mod quantum;

pub use error::{Error, Result};
