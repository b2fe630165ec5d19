//! The theta method with a 3-point time filter.
//!
//! Each step takes a theta-method step to get `y*_{n+1}` and then filters it:
//! `y_{n+1} = y*_{n+1} - (nu/2)(y*_{n+1} - 2 y_n + y_{n-1})` for equal steps,
//! with a ratio-weighted version for variable steps. The crate provides the
//! stepper and drivers, the equivalent two-step method's coefficients, closed
//! forms for the accuracy and stability properties of the family, brute-force
//! checks of those closed forms, and a CSV command-line tool.

pub mod accuracy;
pub mod adaptive;
pub mod cli;
pub mod error;
pub mod newton;
pub mod problems;
pub mod reference;
pub mod stability;
pub mod stepper;
pub mod types;

pub use error::{Error, Result};
pub use newton::{JacobianSource, NewtonConfig};
pub use types::{IvpProblem, MethodParams, MultistepCoeffs, StepMode, StepRecord, Trajectory};
