//! Point-cloud container, ASCII file formats, nearest-neighbor index and
//! normal estimation.

mod index;
mod io;
mod normals;

pub use index::{Neighbor, SpatialIndex};
pub use io::{load_cloud, parse_cloud, save_cloud, write_cloud, CloudFormat};
pub use normals::{estimate_normals, DEFAULT_NORMAL_NEIGHBORS};

use nalgebra::Vector3;

use crate::error::{Error, Result};
use crate::se3::RigidTransform;

/// Tolerance on `|‖n‖ − 1|` for stored normals.
pub const NORMAL_UNIT_TOL: f64 = 1e-6;

/// A list of points with optional per-point unit normals.
///
/// A zero normal marks a point whose neighborhood was degenerate; such points
/// never take part in correspondences.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    points: Vec<Vector3<f64>>,
    normals: Option<Vec<Vector3<f64>>>,
}

impl PointCloud {
    pub fn new(points: Vec<Vector3<f64>>) -> Result<Self> {
        check_finite(&points)?;
        Ok(Self {
            points,
            normals: None,
        })
    }

    /// Normals are renormalized; zero vectors are kept as "no normal".
    pub fn with_normals(points: Vec<Vector3<f64>>, normals: Vec<Vector3<f64>>) -> Result<Self> {
        check_finite(&points)?;
        check_finite(&normals)?;
        if normals.len() != points.len() {
            return Err(Error::InvalidParameter(format!(
                "{} normals for {} points",
                normals.len(),
                points.len()
            )));
        }
        let normals = normals
            .into_iter()
            .map(|n| {
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vector3::zeros()
                }
            })
            .collect();
        Ok(Self {
            points,
            normals: Some(normals),
        })
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vector3<f64>] {
        &self.points
    }

    pub fn normals(&self) -> Option<&[Vector3<f64>]> {
        self.normals.as_deref()
    }

    pub fn has_normals(&self) -> bool {
        self.normals.is_some()
    }

    pub fn without_normals(&self) -> PointCloud {
        PointCloud {
            points: self.points.clone(),
            normals: None,
        }
    }

    /// Apply `pose` to every point (and rotate normals).
    pub fn transformed(&self, pose: &RigidTransform) -> PointCloud {
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| pose.transform_point(p))
                .collect(),
            normals: self
                .normals
                .as_ref()
                .map(|ns| ns.iter().map(|n| pose.rotate_vector(n)).collect()),
        }
    }

    pub fn centroid(&self) -> Option<Vector3<f64>> {
        if self.points.is_empty() {
            return None;
        }
        let sum: Vector3<f64> = self.points.iter().sum();
        Some(sum / self.points.len() as f64)
    }
}

fn check_finite(vs: &[Vector3<f64>]) -> Result<()> {
    if vs.iter().all(|v| v.iter().all(|x| x.is_finite())) {
        Ok(())
    } else {
        Err(Error::InvalidParameter("non-finite coordinate".into()))
    }
}
