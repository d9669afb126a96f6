//! Minimal SO(3)/SE(3) arithmetic.
//!
//! Poses are stored as `{R, t}` and updated with a *left* multiplicative
//! rotation increment, `R ← exp([φ]×)·R`, and an additive translation,
//! `t ← t + δt`. The linearizer differentiates with respect to exactly this
//! parametrization, so the rotation Jacobian pivots on `R·p` (the rotated but
//! not yet translated source point).

use nalgebra::{Matrix3, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Below this angle `exp_so3` switches to its second-order Taylor series.
pub const SMALL_ANGLE: f64 = 1e-8;

/// Tolerance on `‖RᵀR − I‖_F` and `|det R − 1|`.
pub const ORTHONORMAL_TOL: f64 = 1e-9;

/// Skew-symmetric cross-product matrix: `skew(v)·w = v × w`.
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Rodrigues' formula.
pub fn exp_so3(phi: &Vector3<f64>) -> Matrix3<f64> {
    let theta = phi.norm();
    let k = skew(phi);
    let k2 = k * k;
    if theta < SMALL_ANGLE {
        Matrix3::identity() + k + 0.5 * k2
    } else {
        let a = theta.sin() / theta;
        let b = (1.0 - theta.cos()) / (theta * theta);
        Matrix3::identity() + a * k + b * k2
    }
}

/// Rotation angle of `R` in radians, in `[0, π]`.
///
/// Uses `atan2(sin, cos)` with the sine taken from the skew part, which keeps
/// full precision near zero where `acos` of the trace alone does not.
pub fn rotation_angle(r: &Matrix3<f64>) -> f64 {
    let cos = 0.5 * (r.trace() - 1.0);
    let w = Vector3::new(
        r[(2, 1)] - r[(1, 2)],
        r[(0, 2)] - r[(2, 0)],
        r[(1, 0)] - r[(0, 1)],
    );
    let sin = 0.5 * w.norm();
    sin.atan2(cos)
}

fn orthonormal_error(r: &Matrix3<f64>) -> f64 {
    (r.transpose() * r - Matrix3::identity()).norm()
}

/// Project a nearly orthonormal matrix back onto SO(3) (Gram–Schmidt on the
/// columns; adequate for the tiny drift accumulated by repeated updates).
fn reorthonormalize(r: &Matrix3<f64>) -> Matrix3<f64> {
    let c0 = r.column(0).normalize();
    let c1 = r.column(1) - c0 * c0.dot(&r.column(1));
    let c1 = c1.normalize();
    let c2 = c0.cross(&c1);
    Matrix3::from_columns(&[c0, c1, c2])
}

/// Rigid transformation `{R ∈ SO(3), t ∈ R³}` acting as `p ↦ R·p + t`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RigidTransform {
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
}

impl Default for RigidTransform {
    fn default() -> Self {
        Self::identity()
    }
}

impl RigidTransform {
    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    /// Validating constructor. Rejects rotations that are not orthonormal with
    /// unit determinant within [`ORTHONORMAL_TOL`].
    pub fn new(rotation: Matrix3<f64>, translation: Vector3<f64>) -> Result<Self> {
        if !rotation
            .iter()
            .chain(translation.iter())
            .all(|x| x.is_finite())
        {
            return Err(Error::InvalidParameter("non-finite pose entry".into()));
        }
        let err = orthonormal_error(&rotation);
        let det = rotation.determinant();
        if err > ORTHONORMAL_TOL || (det - 1.0).abs() > ORTHONORMAL_TOL {
            return Err(Error::InvalidParameter(format!(
                "rotation is not in SO(3): ‖RᵀR − I‖ = {err:e}, det = {det}"
            )));
        }
        Ok(Self {
            rotation,
            translation,
        })
    }

    pub fn from_axis_angle(phi: &Vector3<f64>, translation: Vector3<f64>) -> Self {
        Self {
            rotation: exp_so3(phi),
            translation,
        }
    }

    pub fn from_translation(translation: Vector3<f64>) -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation,
        }
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p + self.translation
    }

    pub fn rotate_vector(&self, v: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * v
    }

    /// `self ∘ other`, i.e. apply `other` first.
    pub fn compose(&self, other: &RigidTransform) -> RigidTransform {
        RigidTransform {
            rotation: self.rotation * other.rotation,
            translation: self.rotation * other.translation + self.translation,
        }
    }

    pub fn inverse(&self) -> RigidTransform {
        let rt = self.rotation.transpose();
        RigidTransform {
            rotation: rt,
            translation: -(rt * self.translation),
        }
    }

    /// `R ← exp([φ]×)·R`, `t ← t + δt`.
    pub fn apply_increment(&self, xi: &PoseIncrement) -> RigidTransform {
        let mut rotation = exp_so3(&xi.phi) * self.rotation;
        if orthonormal_error(&rotation) > 1e-12 {
            rotation = reorthonormalize(&rotation);
        }
        RigidTransform {
            rotation,
            translation: self.translation + xi.delta_t,
        }
    }

    pub fn is_valid(&self) -> bool {
        orthonormal_error(&self.rotation) <= ORTHONORMAL_TOL
            && (self.rotation.determinant() - 1.0).abs() <= ORTHONORMAL_TOL
    }
}

/// Minimal update `ξ = [φ; δt]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseIncrement {
    pub phi: Vector3<f64>,
    pub delta_t: Vector3<f64>,
}

impl PoseIncrement {
    pub fn zero() -> Self {
        Self {
            phi: Vector3::zeros(),
            delta_t: Vector3::zeros(),
        }
    }

    /// Rejects non-finite entries and rotation steps with `‖φ‖ ≥ π`.
    pub fn new(phi: Vector3<f64>, delta_t: Vector3<f64>) -> Result<Self> {
        let norm = phi.norm();
        if !phi.iter().chain(delta_t.iter()).all(|x| x.is_finite()) || norm >= std::f64::consts::PI
        {
            return Err(Error::DivergedIncrement { norm });
        }
        Ok(Self { phi, delta_t })
    }

    pub fn from_vector(xi: &Vector6<f64>) -> Result<Self> {
        Self::new(xi.fixed_rows::<3>(0).into(), xi.fixed_rows::<3>(3).into())
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        let mut v = Vector6::zeros();
        v.fixed_rows_mut::<3>(0).copy_from(&self.phi);
        v.fixed_rows_mut::<3>(3).copy_from(&self.delta_t);
        v
    }
}
