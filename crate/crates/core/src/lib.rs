pub mod blowup;
pub mod config;
pub mod curvature;
pub mod error;
pub mod homogeneous;
pub mod observables;
pub mod properties;
pub mod run;
pub mod warped;

pub use error::{LabError, Result};
