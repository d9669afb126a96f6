//! Benchmark harness for degeneracy-aware registration on synthetic scenes.
//!
//! A benchmark generates one scene, perturbs it, and self-registers the
//! perturbed copy against the original once per solver. Every run becomes one
//! JSON line; a CSV summary holds the headline metrics.

pub mod report;

use std::path::Path;
use std::time::Instant;

use dcreg_core::characterizer::{
    characterize_spectrum, format_table, report_rows, Axis, ReportRow,
};
use dcreg_core::cloud::{estimate_normals, PointCloud, SpatialIndex};
use dcreg_core::detector::{detect, DegeneracyMask};
use dcreg_core::linearizer::{assemble_system, find_correspondences};
use dcreg_core::mitigator::SolverKind;
use dcreg_core::pipeline::{register, SolverConfig};
use dcreg_core::scene::{gen_scene, perturb_pose, SceneSpec};
use dcreg_core::RigidTransform;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use report::{BenchRecord, BenchReport, RunSummary, SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Core(#[from] dcreg_core::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, BenchError>;

/// Initial pose error injected before registration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Perturbation {
    pub rot_axis: Axis,
    pub rot_deg: f64,
    pub trans_axis: Axis,
    pub trans_m: f64,
}

impl Default for Perturbation {
    /// Yaw plus a shift along the cylinder axis, inside the basin where the
    /// surface texture still pins both down.
    fn default() -> Self {
        Self {
            rot_axis: Axis::Z,
            rot_deg: 2.0,
            trans_axis: Axis::Z,
            trans_m: 0.3,
        }
    }
}

impl Perturbation {
    pub fn pose(&self) -> RigidTransform {
        perturb_pose(self.rot_axis, self.rot_deg, self.trans_axis, self.trans_m)
    }
}

/// Where the target normals come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalSource {
    /// Re-estimated from the target points with `normal_k` neighbors.
    #[default]
    Estimated,
    /// The generator's exact surface normals.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BenchSpec {
    pub scene: SceneSpec,
    pub perturbation: Perturbation,
    pub normals: NormalSource,
}

impl BenchSpec {
    pub fn new(scene: SceneSpec) -> Self {
        Self {
            scene,
            perturbation: Perturbation::default(),
            normals: NormalSource::default(),
        }
    }
}

/// Short SHA-256 digest of everything that determines a run's outcome.
pub fn config_hash(spec: &BenchSpec, config: &SolverConfig) -> Result<String> {
    let bytes = serde_json::to_vec(&(spec, config))?;
    Ok(hex::encode(&Sha256::digest(&bytes)[..8]))
}

/// Self-register the perturbed scene once per solver. Rows come back in the
/// order of `solvers`, whatever order the runs finish in. When `out` is given,
/// the JSONL report goes there and the CSV summary next to it.
pub fn run_benchmark(
    spec: &BenchSpec,
    solvers: &[SolverKind],
    config: &SolverConfig,
    out: Option<&Path>,
) -> Result<BenchReport> {
    config.validate()?;
    let cloud = gen_scene(&spec.scene)?;
    let target = match spec.normals {
        NormalSource::Estimated => cloud.without_normals(),
        NormalSource::Analytic => cloud.clone(),
    };
    let init = spec.perturbation.pose();
    let records = solvers
        .par_iter()
        .map(|&solver| -> Result<BenchRecord> {
            let run_config = SolverConfig { solver, ..*config };
            let started = Instant::now();
            let result = register(&cloud, &target, &init, &run_config)?
                .with_ground_truth(&RigidTransform::identity());
            let wall_ms = started.elapsed().as_secs_f64() * 1e3;
            Ok(BenchRecord {
                schema_version: SCHEMA_VERSION,
                config_hash: config_hash(spec, &run_config)?,
                spec: *spec,
                config: run_config,
                solver,
                summary: RunSummary::from_result(&result),
                trace: result.trace,
                final_pose: result.final_pose,
                wall_ms,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let report = BenchReport { records };
    if let Some(path) = out {
        report.write(path)?;
    }
    Ok(report)
}

/// One-shot detection and characterization at a fixed pose.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Inspection {
    pub correspondences: usize,
    pub mask: DegeneracyMask,
    pub kappa_r: Option<f64>,
    pub kappa_t: Option<f64>,
    pub rows: Vec<ReportRow>,
}

impl Inspection {
    pub fn table(&self) -> String {
        let (rot, trans) = self.mask.bits();
        let show = |k: Option<f64>| k.map_or("inf".to_string(), |k| format!("{k:.3e}"));
        format!(
            "correspondences: {}\nkappa rot: {}  kappa trans: {}\nmask rot: {rot}  mask trans: {trans}\n\n{}",
            self.correspondences,
            show(self.kappa_r),
            show(self.kappa_t),
            format_table(&self.rows)
        )
    }
}

/// Target normals are estimated with `normal_k` neighbors when the target
/// has none.
pub fn inspect(
    source: &PointCloud,
    target: &PointCloud,
    pose: &RigidTransform,
    config: &SolverConfig,
) -> Result<Inspection> {
    config.validate()?;
    let target = if target.has_normals() {
        target.clone()
    } else {
        estimate_normals(target, config.normal_k)?
    };
    let index = SpatialIndex::new(&target)?;
    let corrs = find_correspondences(source, &index, pose, config.corr_radius)?;
    let det = detect(&assemble_system(&corrs)?, config.kappa_th)?;
    let ch = characterize_spectrum(&det.spectrum)?;
    let finite = |k: f64| k.is_finite().then_some(k);
    Ok(Inspection {
        correspondences: corrs.len(),
        mask: det.mask,
        kappa_r: finite(det.spectrum.kappa_r),
        kappa_t: finite(det.spectrum.kappa_t),
        rows: report_rows(&det.spectrum, &det.mask, &ch),
    })
}

/// Parses `all` or a comma-separated list of solver names.
pub fn parse_solvers(list: &str) -> Result<Vec<SolverKind>> {
    if list.trim() == "all" {
        return Ok(SolverKind::ALL.to_vec());
    }
    list.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse::<SolverKind>().map_err(BenchError::from))
        .collect()
}
