pub mod characterize;
pub mod error;
pub mod families;
pub mod gof;
pub mod numerics;
pub mod operators;
pub mod score_factor;
pub mod solver;
pub mod test_functions;

pub use error::{Result, SteinError};
