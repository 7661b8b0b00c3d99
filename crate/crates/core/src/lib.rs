pub mod cli;
pub mod error;
pub mod experiments;
pub mod expr;
pub mod gauss;
pub mod phase;
pub mod maximal;
pub mod norms;
pub mod oscquad;
pub mod testfns;

pub use error::{Error, Result};
