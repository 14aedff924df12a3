pub mod bspline;
pub mod config;
pub mod error;
pub mod hyperangular;
pub mod kinematics;
pub mod observables;
pub mod pipeline;
pub mod potentials2b;
pub mod quadrature;
pub mod radial3b;

pub use error::{Error, Result};
