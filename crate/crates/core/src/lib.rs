//! Degeneracy-aware point-to-plane ICP.
//!
//! The registration loop linearizes point-to-plane residuals into a 6×6
//! Gauss–Newton system, splits it into rotation and translation Schur
//! complements to find weakly constrained directions, maps those directions
//! onto physical axes, and solves each step with a conjugate-gradient solver
//! whose block preconditioner has its small eigenvalues clamped.
//!
//! Parameter ordering everywhere is `[φ; δt]`: three rotation components
//! (axis-angle, radians) followed by three translation components (meters).

// `!(x > 0.0)` also rejects NaN, which `x <= 0.0` would let through.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod characterizer;
pub mod cloud;
pub mod detector;
pub mod eigen;
pub mod error;
pub mod linearizer;
pub mod mitigator;
pub mod pipeline;
pub mod scene;
pub mod se3;

pub use cloud::{CloudFormat, PointCloud, SpatialIndex};
pub use error::{Error, Result};
pub use pipeline::{register, RegistrationResult, SolverConfig};
pub use se3::{PoseIncrement, RigidTransform};
