//! Correspondence search and Gauss–Newton system assembly for the
//! point-to-plane metric.

use nalgebra::{DMatrix, Matrix3, Matrix6, RowVector6, Vector3, Vector6};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cloud::{PointCloud, SpatialIndex};
use crate::error::{Error, Result};
use crate::se3::RigidTransform;

/// Correspondences are summed in fixed-size chunks taken in index order, so the
/// floating-point result does not depend on the thread count.
const REDUCTION_CHUNK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correspondence {
    /// Source point mapped through the current pose, `R·p + t`.
    pub source_point: Vector3<f64>,
    /// Source point rotated by the current pose but not translated, `R·p`.
    /// This is the lever arm of the rotation Jacobian under the
    /// left-multiplicative update `R ← exp([φ]×)·R`, `t ← t + δt`.
    pub lever_arm: Vector3<f64>,
    pub target_point: Vector3<f64>,
    pub target_normal: Vector3<f64>,
    pub distance: f64,
    pub source_index: usize,
    pub target_index: usize,
}

impl Correspondence {
    /// Build a correspondence at the identity pose (lever arm = point).
    pub fn at_identity(
        source_point: Vector3<f64>,
        target_point: Vector3<f64>,
        normal: Vector3<f64>,
    ) -> Self {
        Self {
            source_point,
            lever_arm: source_point,
            target_point,
            target_normal: normal,
            distance: (source_point - target_point).norm(),
            source_index: 0,
            target_index: 0,
        }
    }
}

/// For each source point (in order), the single nearest target point within
/// `max_distance` whose normal is valid.
pub fn find_correspondences(
    source: &PointCloud,
    target: &SpatialIndex,
    pose: &RigidTransform,
    max_distance: f64,
) -> Result<Vec<Correspondence>> {
    if !(max_distance > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "correspondence radius must be positive, got {max_distance}"
        )));
    }
    let normals = target.cloud().normals().ok_or(Error::MissingNormals)?;
    let tpts = target.cloud().points();
    let found: Vec<Correspondence> = source
        .points()
        .par_iter()
        .enumerate()
        .filter_map(|(i, p)| {
            let rotated = pose.rotate_vector(p);
            let moved = rotated + pose.translation();
            let nn = target.nearest(&moved);
            let n = normals[nn.index];
            if nn.distance <= max_distance && n != Vector3::zeros() {
                Some(Correspondence {
                    source_point: moved,
                    lever_arm: rotated,
                    target_point: tpts[nn.index],
                    target_normal: n,
                    distance: nn.distance,
                    source_index: i,
                    target_index: nn.index,
                })
            } else {
                None
            }
        })
        .collect();
    if found.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    Ok(found)
}

/// Residual `r = nᵀ(p − q)` and Jacobian row `J = [ (a × n)ᵀ | nᵀ ]`, where
/// `a` is the lever arm. `(a × n)ᵀ = nᵀ(−[a]×)`.
pub fn residual_jacobian(c: &Correspondence) -> (f64, RowVector6<f64>) {
    let n = c.target_normal;
    let r = n.dot(&(c.source_point - c.target_point));
    let jr = c.lever_arm.cross(&n);
    let j = RowVector6::new(jr.x, jr.y, jr.z, n.x, n.y, n.z);
    (r, j)
}

/// Block form of `H = Σ JᵢᵀJᵢ` and `g = Σ Jᵢᵀrᵢ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HessianSystem {
    pub h_rr: Matrix3<f64>,
    pub h_rt: Matrix3<f64>,
    pub h_tt: Matrix3<f64>,
    pub g_r: Vector3<f64>,
    pub g_t: Vector3<f64>,
    pub residual_sq_sum: f64,
    pub count: usize,
}

impl HessianSystem {
    pub fn zero() -> Self {
        Self {
            h_rr: Matrix3::zeros(),
            h_rt: Matrix3::zeros(),
            h_tt: Matrix3::zeros(),
            g_r: Vector3::zeros(),
            g_t: Vector3::zeros(),
            residual_sq_sum: 0.0,
            count: 0,
        }
    }

    /// Split a dense 6×6 Hessian and gradient into blocks. The upper-right
    /// block is taken as `H_Rt`.
    pub fn from_dense(h: &Matrix6<f64>, g: &Vector6<f64>) -> Self {
        Self {
            h_rr: h.fixed_view::<3, 3>(0, 0).into(),
            h_rt: h.fixed_view::<3, 3>(0, 3).into(),
            h_tt: h.fixed_view::<3, 3>(3, 3).into(),
            g_r: g.fixed_rows::<3>(0).into(),
            g_t: g.fixed_rows::<3>(3).into(),
            residual_sq_sum: 0.0,
            count: 0,
        }
    }

    pub fn hessian(&self) -> Matrix6<f64> {
        let mut h = Matrix6::zeros();
        h.fixed_view_mut::<3, 3>(0, 0).copy_from(&self.h_rr);
        h.fixed_view_mut::<3, 3>(0, 3).copy_from(&self.h_rt);
        h.fixed_view_mut::<3, 3>(3, 0)
            .copy_from(&self.h_rt.transpose());
        h.fixed_view_mut::<3, 3>(3, 3).copy_from(&self.h_tt);
        h
    }

    pub fn gradient(&self) -> Vector6<f64> {
        let mut g = Vector6::zeros();
        g.fixed_rows_mut::<3>(0).copy_from(&self.g_r);
        g.fixed_rows_mut::<3>(3).copy_from(&self.g_t);
        g
    }

    pub fn rmse(&self) -> f64 {
        if self.count == 0 {
            0.0
        } else {
            (self.residual_sq_sum / self.count as f64).sqrt()
        }
    }

    fn accumulate(&mut self, c: &Correspondence) {
        let n = c.target_normal;
        let an = c.lever_arm.cross(&n);
        let r = n.dot(&(c.source_point - c.target_point));
        // H_RR = Σ [a]×ᵀ n nᵀ [a]×, H_Rt = −Σ [a]×ᵀ n nᵀ, H_tt = Σ n nᵀ
        self.h_rr += an * an.transpose();
        self.h_rt += an * n.transpose();
        self.h_tt += n * n.transpose();
        self.g_r += an * r;
        self.g_t += n * r;
        self.residual_sq_sum += r * r;
        self.count += 1;
    }

    fn merge(&mut self, other: &HessianSystem) {
        self.h_rr += other.h_rr;
        self.h_rt += other.h_rt;
        self.h_tt += other.h_tt;
        self.g_r += other.g_r;
        self.g_t += other.g_t;
        self.residual_sq_sum += other.residual_sq_sum;
        self.count += other.count;
    }
}

pub fn assemble_system(correspondences: &[Correspondence]) -> Result<HessianSystem> {
    if correspondences.is_empty() {
        return Err(Error::NoCorrespondences);
    }
    let partials: Vec<HessianSystem> = correspondences
        .par_chunks(REDUCTION_CHUNK)
        .map(|chunk| {
            let mut acc = HessianSystem::zero();
            for c in chunk {
                acc.accumulate(c);
            }
            acc
        })
        .collect();
    let mut total = HessianSystem::zero();
    for p in &partials {
        total.merge(p);
    }
    Ok(total)
}

/// Stacked Jacobian columns `(J_R, J_t)`, each `m × 3`.
pub fn stacked_jacobians(correspondences: &[Correspondence]) -> (DMatrix<f64>, DMatrix<f64>) {
    let m = correspondences.len();
    let mut jr = DMatrix::zeros(m, 3);
    let mut jt = DMatrix::zeros(m, 3);
    for (i, c) in correspondences.iter().enumerate() {
        let (_, row) = residual_jacobian(c);
        for k in 0..3 {
            jr[(i, k)] = row[k];
            jt[(i, k)] = row[k + 3];
        }
    }
    (jr, jt)
}
