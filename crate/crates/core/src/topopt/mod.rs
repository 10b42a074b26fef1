//! 2D plane-stress SIMP topology optimization on an annular wheel domain, with an
//! L1 pull toward a reference design, density filtering and threshold projection.

mod domain;
mod element;
mod fem;
mod filter;
mod optimize;
mod problem;
mod sweep;

pub use domain::{DomainSpec, ElementKind, WheelDomain};
pub use element::q4_stiffness;
pub use fem::{assemble_and_solve, simp_modulus, Fem2d, FemState2D};
pub use filter::{project, project_derivative, DensityFilter};
pub use optimize::{optimize, TopOptResult};
pub use problem::{DensityField, Sensitivity, TopOptProblem, TopOptSettings};
pub use sweep::{sweep, SweepLevels, SweepOutput, SweepRow};
