//! Numerical laboratory for a two-dimensional vorticity/density model with a
//! nonlocal sector-kernel velocity law.

pub mod field;
pub mod geometry;
pub mod kernel;
pub mod numerics;
pub mod barrier;
pub mod scenario;
pub mod diagnostics;
pub mod solver;
pub mod onedim;

pub use field::{Field, FieldError, Marker, SupportBox};
pub use geometry::Point;
pub use kernel::{eval_grad_q, eval_q, eval_velocity, KernelError, SectorKernel, SectorSpec};
pub use barrier::{BarrierError, BarrierState, Params, TStarMode};
pub use scenario::{FeasibilityCertificate, MeshSpec, ScenarioError};
pub use solver::{RunConfig, RunOutcome, RunRecord, SimState, SolverError, StopReason};
