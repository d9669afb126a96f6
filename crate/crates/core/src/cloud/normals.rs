//! k-nearest-neighbor normal estimation.
//!
//! The covariance of each neighborhood is uniformly weighted (every neighbor,
//! including the query point itself, counts once). The normal is the
//! eigenvector of the smallest covariance eigenvalue with its largest-magnitude
//! component made positive.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::{PointCloud, SpatialIndex};
use crate::eigen::symmetric_eigen;
use crate::error::{Error, Result};

pub const DEFAULT_NORMAL_NEIGHBORS: usize = 5;

/// Relative size of the middle covariance eigenvalue below which a
/// neighborhood counts as collinear.
const COLLINEAR_TOL: f64 = 1e-10;

/// Returns a copy of `cloud` with estimated normals. Points whose neighborhood
/// is collinear (or coincident) receive a zero normal.
pub fn estimate_normals(cloud: &PointCloud, k: usize) -> Result<PointCloud> {
    if k < 3 {
        return Err(Error::InvalidParameter(format!(
            "normal estimation needs k >= 3, got {k}"
        )));
    }
    if cloud.len() < k {
        return Err(Error::TooFewPoints {
            needed: k,
            available: cloud.len(),
        });
    }
    let index = SpatialIndex::new(cloud)?;
    let pts = cloud.points();
    let normals: Vec<Vector3<f64>> = pts
        .par_iter()
        .map(|p| {
            let nbrs = index.knn(p, k);
            let mean: Vector3<f64> =
                nbrs.iter().map(|n| pts[n.index]).sum::<Vector3<f64>>() / nbrs.len() as f64;
            let mut cov = Matrix3::zeros();
            for n in &nbrs {
                let d = pts[n.index] - mean;
                cov += d * d.transpose();
            }
            cov /= nbrs.len() as f64;
            let eig = symmetric_eigen(&cov);
            let lmax = eig.eigenvalues[2];
            if lmax <= 0.0 || eig.eigenvalues[1] <= COLLINEAR_TOL * lmax {
                Vector3::zeros()
            } else {
                eig.eigenvectors.column(0).into_owned()
            }
        })
        .collect();
    PointCloud::with_normals(pts.to_vec(), normals)
}
