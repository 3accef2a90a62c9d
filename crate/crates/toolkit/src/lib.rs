//! Numerical toolkit for quasilinear measure-data problems: Wolff potentials,
//! radial and grid p-Laplace solvers, the sublinear fixed-point scheme, and
//! verification diagnostics.

pub mod error;
pub mod grid;
pub mod measure;
pub mod potentials;
pub mod quad;
pub mod radial;
pub mod task;
pub mod verify;

pub use error::{Result, ToolkitError};
pub use measure::{GridMeasure, Measure, OperatorSpec, RadialMeasure, Tail, Weight};
pub use potentials::{PotentialValue, RadialProfile, Verdict};
