pub mod axioms;
pub mod error;
pub mod exact;
pub mod intervention;
pub mod pdb;
pub mod query;
pub mod scores;

pub use error::{Error, Result};
