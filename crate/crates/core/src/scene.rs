//! Synthetic scenes with analytic normals, plus perturbation helpers.

use std::f64::consts::TAU;
use std::fmt;
use std::str::FromStr;

use nalgebra::Vector3;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::characterizer::Axis;
use crate::cloud::PointCloud;
use crate::error::{Error, Result};
use crate::se3::RigidTransform;

pub const MIN_SCENE_POINTS: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SceneKind {
    /// Lateral surface of a z-aligned cylinder, no end caps.
    Cylinder,
    /// Grid on z = 0.
    Plane,
    /// Two walls at y = ±gap/2 plus a floor at z = 0, running along x.
    Corridor,
    /// Inside faces of a cube, the well-constrained control.
    Room,
}

impl SceneKind {
    pub const ALL: [SceneKind; 4] = [
        SceneKind::Cylinder,
        SceneKind::Plane,
        SceneKind::Corridor,
        SceneKind::Room,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Cylinder => "cylinder",
            SceneKind::Plane => "plane",
            SceneKind::Corridor => "corridor",
            SceneKind::Room => "room",
        }
    }
}

impl fmt::Display for SceneKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SceneKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SceneKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidSpec(format!("unknown scene {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneSpec {
    pub kind: SceneKind,
    /// Cylinder radius.
    pub radius: f64,
    /// Cylinder and corridor wall height.
    pub height: f64,
    /// Side length of the plane and the room, length of the corridor.
    pub extent: f64,
    /// Distance between corridor walls.
    pub wall_gap: f64,
    pub point_count: usize,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl SceneSpec {
    pub fn new(kind: SceneKind) -> Self {
        let point_count = match kind {
            SceneKind::Cylinder => 7600,
            SceneKind::Plane => 2500,
            SceneKind::Corridor | SceneKind::Room => 6000,
        };
        Self {
            kind,
            radius: 5.0,
            height: 10.0,
            extent: 10.0,
            wall_gap: 4.0,
            point_count,
            noise_sigma: 0.005,
            seed: 0,
        }
    }

    pub fn cylinder() -> Self {
        Self::new(SceneKind::Cylinder)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radius", self.radius),
            ("height", self.height),
            ("extent", self.extent),
            ("wall_gap", self.wall_gap),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidSpec(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidSpec(format!(
                "noise_sigma must be non-negative, got {}",
                self.noise_sigma
            )));
        }
        if self.point_count < MIN_SCENE_POINTS {
            return Err(Error::InvalidSpec(format!(
                "point_count must be at least {MIN_SCENE_POINTS}, got {}",
                self.point_count
            )));
        }
        Ok(())
    }
}

/// Sample a scene. Normals come from the noise-free surface; noise is added to
/// the coordinates afterwards.
pub fn gen_scene(spec: &SceneSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let n = spec.point_count;
    let (points, normals) = match spec.kind {
        SceneKind::Cylinder => {
            let half = spec.height / 2.0;
            (0..n)
                .map(|_| {
                    let a = rng.random_range(0.0..TAU);
                    let z = rng.random_range(-half..half);
                    let radial = Vector3::new(a.cos(), a.sin(), 0.0);
                    (spec.radius * radial + Vector3::z() * z, radial)
                })
                .unzip()
        }
        SceneKind::Plane => {
            let nx = (n as f64).sqrt().ceil() as usize;
            let ny = n.div_ceil(nx);
            let step_x = spec.extent / nx as f64;
            let step_y = spec.extent / ny as f64;
            let half = spec.extent / 2.0;
            (0..n)
                .map(|i| {
                    let (ix, iy) = (i % nx, i / nx);
                    let p = Vector3::new(
                        -half + (ix as f64 + 0.5) * step_x,
                        -half + (iy as f64 + 0.5) * step_y,
                        0.0,
                    );
                    (p, Vector3::z())
                })
                .unzip()
        }
        SceneKind::Corridor => {
            let half_len = spec.extent / 2.0;
            let half_gap = spec.wall_gap / 2.0;
            (0..n)
                .map(|i| {
                    let x = rng.random_range(-half_len..half_len);
                    match i % 3 {
                        0 => (
                            Vector3::new(x, half_gap, rng.random_range(0.0..spec.height)),
                            -Vector3::y(),
                        ),
                        1 => (
                            Vector3::new(x, -half_gap, rng.random_range(0.0..spec.height)),
                            Vector3::y(),
                        ),
                        _ => (
                            Vector3::new(x, rng.random_range(-half_gap..half_gap), 0.0),
                            Vector3::z(),
                        ),
                    }
                })
                .unzip()
        }
        SceneKind::Room => {
            let half = spec.extent / 2.0;
            (0..n)
                .map(|i| {
                    let axis = (i / 2) % 3;
                    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
                    let mut p = Vector3::new(
                        rng.random_range(-half..half),
                        rng.random_range(-half..half),
                        rng.random_range(-half..half),
                    );
                    p[axis] = sign * half;
                    let mut normal = Vector3::zeros();
                    normal[axis] = -sign;
                    (p, normal)
                })
                .unzip()
        }
    };
    let points = add_noise(points, spec.noise_sigma, &mut rng)?;
    PointCloud::with_normals(points, normals)
}

fn add_noise(
    mut points: Vec<Vector3<f64>>,
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Result<Vec<Vector3<f64>>> {
    if sigma == 0.0 {
        return Ok(points);
    }
    let dist = Normal::new(0.0, sigma).map_err(|e| Error::InvalidSpec(e.to_string()))?;
    for p in &mut points {
        *p += Vector3::new(dist.sample(rng), dist.sample(rng), dist.sample(rng));
    }
    Ok(points)
}

/// Rotation of `rot_deg` about one axis combined with a translation of
/// `trans_m` along another.
pub fn perturb_pose(
    rot_axis: Axis,
    rot_deg: f64,
    trans_axis: Axis,
    trans_m: f64,
) -> RigidTransform {
    RigidTransform::from_axis_angle(
        &(rot_axis.unit() * rot_deg.to_radians()),
        trans_axis.unit() * trans_m,
    )
}
