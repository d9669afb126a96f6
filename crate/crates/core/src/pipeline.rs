//! The outer ICP loop and registration-quality metrics.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::characterizer::{characterize_spectrum, Axis};
use crate::cloud::{estimate_normals, PointCloud, SpatialIndex, DEFAULT_NORMAL_NEIGHBORS};
use crate::detector::{
    detect, diagonal_block_kappas, full_kappa, DegeneracyMask, DEFAULT_KAPPA_TH,
};
use crate::error::{Error, Result};
use crate::linearizer::{assemble_system, find_correspondences};
use crate::mitigator::{
    solve_step, PcgStatus, SolverKind, StepParams, DEFAULT_KAPPA_TG, DEFAULT_PCG_MAX_ITER,
    DEFAULT_PCG_TOL, DEFAULT_TREG_LAMBDA,
};
use crate::se3::{rotation_angle, PoseIncrement, RigidTransform};

/// Inlier radius used for the fitness metric.
pub const DEFAULT_FITNESS_RADIUS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    pub kappa_th: f64,
    pub kappa_tg: f64,
    pub max_icp_iterations: usize,
    /// Meters.
    pub trans_convergence: f64,
    /// Radians.
    pub rot_convergence: f64,
    pub corr_radius: f64,
    pub pcg_tol: f64,
    pub pcg_max_iter: usize,
    pub solver: SolverKind,
    pub treg_lambda: f64,
    /// Neighbors for target normal estimation when the target has none.
    pub normal_k: usize,
    pub fitness_radius: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            kappa_th: DEFAULT_KAPPA_TH,
            kappa_tg: DEFAULT_KAPPA_TG,
            max_icp_iterations: 30,
            trans_convergence: 1e-3,
            rot_convergence: 1e-5,
            corr_radius: 1.0,
            pcg_tol: DEFAULT_PCG_TOL,
            pcg_max_iter: DEFAULT_PCG_MAX_ITER,
            solver: SolverKind::DcregPcg,
            treg_lambda: DEFAULT_TREG_LAMBDA,
            normal_k: DEFAULT_NORMAL_NEIGHBORS,
            fitness_radius: DEFAULT_FITNESS_RADIUS,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("kappa_th", self.kappa_th),
            ("kappa_tg", self.kappa_tg),
            ("trans_convergence", self.trans_convergence),
            ("rot_convergence", self.rot_convergence),
            ("corr_radius", self.corr_radius),
            ("pcg_tol", self.pcg_tol),
            ("treg_lambda", self.treg_lambda),
            ("fitness_radius", self.fitness_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        if self.kappa_tg <= 1.0 || self.kappa_th <= 1.0 {
            return Err(Error::InvalidParameter(
                "condition-number thresholds must exceed 1".into(),
            ));
        }
        if self.max_icp_iterations == 0 || self.pcg_max_iter == 0 {
            return Err(Error::InvalidParameter(
                "iteration caps must be at least 1".into(),
            ));
        }
        if self.normal_k < 3 {
            return Err(Error::InvalidParameter(format!(
                "normal_k must be at least 3, got {}",
                self.normal_k
            )));
        }
        Ok(())
    }

    fn step_params(&self) -> StepParams {
        StepParams {
            kappa_tg: self.kappa_tg,
            pcg_tol: self.pcg_tol,
            pcg_max_iter: self.pcg_max_iter,
            treg_lambda: self.treg_lambda,
        }
    }
}

/// JSON has no infinity; rank-deficient systems report `null`.
mod kappa_serde {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationTrace {
    /// 1-based.
    pub iteration: usize,
    /// Pose after this iteration's update.
    pub pose: RigidTransform,
    pub correspondences: usize,
    /// Point-to-plane residual RMS at the linearization point.
    pub residual_rmse: f64,
    pub rot_update_norm: f64,
    pub trans_update_norm: f64,
    #[serde(with = "kappa_serde")]
    pub kappa_r: f64,
    #[serde(with = "kappa_serde")]
    pub kappa_t: f64,
    #[serde(with = "kappa_serde")]
    pub diag_kappa_r: f64,
    #[serde(with = "kappa_serde")]
    pub diag_kappa_t: f64,
    #[serde(with = "kappa_serde")]
    pub full_kappa: f64,
    /// Condition numbers of the clamped Schur spectra the preconditioner
    /// works with. Only set for the preconditioned solver.
    pub mitigated_kappa_r: Option<f64>,
    pub mitigated_kappa_t: Option<f64>,
    pub mask: DegeneracyMask,
    /// Dominant axis of each translation / rotation eigenvector, ascending
    /// eigenvalue order. Missing when characterization collapsed.
    pub dominant_rot: Option<[Axis; 3]>,
    pub dominant_trans: Option<[Axis; 3]>,
    pub pcg_iterations: usize,
    pub pcg_status: Option<PcgStatus>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StopReason {
    Converged,
    MaxIterations,
    NoCorrespondences,
    Diverged,
    /// The selected direct solver could not factor the system.
    SingularSystem,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Percent of source points with a target neighbor inside the inlier radius.
    pub fitness: f64,
    pub rmse: f64,
    pub chamfer: f64,
    pub trans_error: Option<f64>,
    /// Degrees.
    pub rot_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegistrationResult {
    pub final_pose: RigidTransform,
    pub converged: bool,
    pub reason: StopReason,
    pub trace: Vec<IterationTrace>,
    pub metrics: Metrics,
}

impl RegistrationResult {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    /// Fill in pose errors against a known answer.
    pub fn with_ground_truth(mut self, truth: &RigidTransform) -> Self {
        let (t, r) = pose_error(&self.final_pose, truth);
        self.metrics.trans_error = Some(t);
        self.metrics.rot_error = Some(r);
        self
    }
}

/// Align `source` to `target` starting from `init`. Target normals are
/// estimated when missing.
pub fn register(
    source: &PointCloud,
    target: &PointCloud,
    init: &RigidTransform,
    config: &SolverConfig,
) -> Result<RegistrationResult> {
    config.validate()?;
    if source.is_empty() || target.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let target = if target.has_normals() {
        target.clone()
    } else {
        estimate_normals(target, config.normal_k)?
    };
    let index = SpatialIndex::new(&target)?;
    let params = config.step_params();

    let mut pose = *init;
    let mut trace = Vec::with_capacity(config.max_icp_iterations);
    let mut reason = StopReason::MaxIterations;
    for iteration in 1..=config.max_icp_iterations {
        let corrs = match find_correspondences(source, &index, &pose, config.corr_radius) {
            Ok(c) => c,
            Err(Error::NoCorrespondences) => {
                reason = StopReason::NoCorrespondences;
                break;
            }
            Err(e) => return Err(e),
        };
        let system = assemble_system(&corrs)?;
        let detection = detect(&system, config.kappa_th)?;
        let characterization = characterize_spectrum(&detection.spectrum).ok();
        let (outcome, precond) = match solve_step(
            config.solver,
            &system,
            &detection.spectrum,
            &detection.mask,
            &params,
        ) {
            Ok(step) => step,
            Err(Error::SingularSystem) => {
                reason = StopReason::SingularSystem;
                break;
            }
            Err(e) => return Err(e),
        };
        let increment = match PoseIncrement::from_vector(&outcome.increment) {
            Ok(inc) => inc,
            Err(Error::DivergedIncrement { .. }) => {
                reason = StopReason::Diverged;
                break;
            }
            Err(e) => return Err(e),
        };
        pose = pose.apply_increment(&increment);

        let (diag_kappa_r, diag_kappa_t) = diagonal_block_kappas(&system);
        let mitigated = precond.map(|p| p.clamped_kappas());
        let rot_norm = increment.phi.norm();
        let trans_norm = increment.delta_t.norm();
        trace.push(IterationTrace {
            iteration,
            pose,
            correspondences: corrs.len(),
            residual_rmse: system.rmse(),
            rot_update_norm: rot_norm,
            trans_update_norm: trans_norm,
            kappa_r: detection.spectrum.kappa_r,
            kappa_t: detection.spectrum.kappa_t,
            diag_kappa_r,
            diag_kappa_t,
            full_kappa: full_kappa(&system),
            mitigated_kappa_r: mitigated.map(|m| m.0),
            mitigated_kappa_t: mitigated.map(|m| m.1),
            mask: detection.mask,
            dominant_rot: characterization.map(|c| c.rot.dominant_axis),
            dominant_trans: characterization.map(|c| c.trans.dominant_axis),
            pcg_iterations: outcome.inner_iterations,
            pcg_status: precond.map(|_| outcome.status),
        });
        if trans_norm < config.trans_convergence && rot_norm < config.rot_convergence {
            reason = StopReason::Converged;
            break;
        }
    }

    let (fitness, rmse) = fitness_and_rmse(source, &index, &pose, config.fitness_radius);
    let moved = source.transformed(&pose);
    let chamfer = chamfer_distance(&moved, &target)?;
    Ok(RegistrationResult {
        final_pose: pose,
        converged: reason == StopReason::Converged,
        reason,
        trace,
        metrics: Metrics {
            fitness,
            rmse,
            chamfer,
            trans_error: None,
            rot_error: None,
        },
    })
}

/// Fitness (percent of source points whose nearest target lies within
/// `inlier_radius`) and RMS of those inlier distances.
pub fn fitness_and_rmse(
    source: &PointCloud,
    target: &SpatialIndex,
    pose: &RigidTransform,
    inlier_radius: f64,
) -> (f64, f64) {
    if source.is_empty() {
        return (0.0, 0.0);
    }
    let mut inliers = 0usize;
    let mut sq = 0.0;
    for p in source.points() {
        let d = target.nearest(&pose.transform_point(p)).distance;
        if d <= inlier_radius {
            inliers += 1;
            sq += d * d;
        }
    }
    let fitness = 100.0 * inliers as f64 / source.len() as f64;
    let rmse = if inliers == 0 {
        0.0
    } else {
        (sq / inliers as f64).sqrt()
    };
    (fitness, rmse)
}

/// Symmetric mean nearest-neighbor distance.
pub fn chamfer_distance(a: &PointCloud, b: &PointCloud) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let one_way = |from: &PointCloud, to: &PointCloud| -> Result<f64> {
        let index = SpatialIndex::new(to)?;
        let sum: f64 = from
            .points()
            .iter()
            .map(|p| index.nearest(p).distance)
            .sum();
        Ok(sum / from.len() as f64)
    };
    Ok(0.5 * (one_way(a, b)? + one_way(b, a)?))
}

/// Translation error in meters and rotation error in degrees.
pub fn pose_error(estimate: &RigidTransform, truth: &RigidTransform) -> (f64, f64) {
    let dt: Vector3<f64> = estimate.translation() - truth.translation();
    let dr = estimate.rotation() * truth.rotation().transpose();
    (dt.norm(), rotation_angle(&dr).to_degrees())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{gen_scene, SceneKind, SceneSpec};

    #[test]
    fn default_config_values() {
        let c = SolverConfig::default();
        assert_eq!(c.kappa_th, 10.0);
        assert_eq!(c.kappa_tg, 10.0);
        assert_eq!(c.max_icp_iterations, 30);
        assert_eq!(c.trans_convergence, 1e-3);
        assert_eq!(c.rot_convergence, 1e-5);
        assert_eq!(c.corr_radius, 1.0);
        assert_eq!(c.pcg_tol, 1e-6);
        assert_eq!(c.pcg_max_iter, 10);
        assert_eq!(c.treg_lambda, 100.0);
        assert_eq!(c.solver, SolverKind::DcregPcg);
        c.validate().unwrap();
        let bad = SolverConfig { kappa_tg: 1.0, ..c };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn self_registration_converges_immediately() {
        let cloud = gen_scene(&SceneSpec::new(SceneKind::Room)).unwrap();
        let r = register(
            &cloud,
            &cloud,
            &RigidTransform::identity(),
            &SolverConfig::default(),
        )
        .unwrap();
        assert!(r.converged);
        assert_eq!(r.iterations(), 1);
        assert_eq!(r.metrics.fitness, 100.0);
        assert_eq!(r.metrics.rmse, 0.0);
        assert_eq!(r.metrics.chamfer, 0.0);
        let r = r.with_ground_truth(&RigidTransform::identity());
        assert_eq!(r.metrics.trans_error, Some(0.0));
        assert_eq!(r.metrics.rot_error, Some(0.0));
    }

    #[test]
    fn far_init_reports_no_correspondences() {
        let cloud = gen_scene(&SceneSpec::new(SceneKind::Room)).unwrap();
        let init = RigidTransform::from_translation(Vector3::new(100.0, 0.0, 0.0));
        let r = register(&cloud, &cloud, &init, &SolverConfig::default()).unwrap();
        assert!(!r.converged);
        assert_eq!(r.reason, StopReason::NoCorrespondences);
        assert!(r.trace.is_empty());
        assert_eq!(r.final_pose, init);
    }

    #[test]
    fn pose_error_quarter_turn() {
        let q = RigidTransform::from_axis_angle(
            &Vector3::new(0.0, 0.0, std::f64::consts::FRAC_PI_2),
            Vector3::zeros(),
        );
        let (t, r) = pose_error(&q, &RigidTransform::identity());
        assert_eq!(t, 0.0);
        assert!((r - 90.0).abs() < 1e-12);
    }

    #[test]
    fn chamfer_two_points() {
        let a = PointCloud::new(vec![Vector3::zeros()]).unwrap();
        let b = PointCloud::new(vec![Vector3::x()]).unwrap();
        assert_eq!(chamfer_distance(&a, &b).unwrap(), 1.0);
        assert_eq!(chamfer_distance(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn half_displaced_fitness() {
        let pts: Vec<_> = (0..10).map(|i| Vector3::new(i as f64, 0.0, 0.0)).collect();
        let target = PointCloud::new(pts.clone()).unwrap();
        let moved: Vec<_> = pts
            .iter()
            .enumerate()
            .map(|(i, p)| {
                if i % 2 == 0 {
                    *p
                } else {
                    p + Vector3::new(0.0, 0.3, 0.0)
                }
            })
            .collect();
        let source = PointCloud::new(moved).unwrap();
        let idx = SpatialIndex::new(&target).unwrap();
        let (f, rmse) = fitness_and_rmse(&source, &idx, &RigidTransform::identity(), 0.1);
        assert_eq!(f, 50.0);
        assert_eq!(rmse, 0.0);
    }

    #[test]
    fn trace_serializes_infinite_kappa_as_null() {
        let spec = SceneSpec {
            noise_sigma: 0.0,
            ..SceneSpec::new(SceneKind::Plane)
        };
        let cloud = gen_scene(&spec).unwrap();
        let init = RigidTransform::from_translation(Vector3::new(0.0, 0.0, 0.1));
        let r = register(&cloud, &cloud, &init, &SolverConfig::default()).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        let back: RegistrationResult = serde_json::from_str(&json).unwrap();
        assert_eq!(back, r);
    }
}
