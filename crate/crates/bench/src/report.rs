//! Benchmark records and their JSONL / CSV forms.
//!
//! One JSON object per line, one line per run. Fields:
//! `schema_version`, `config_hash`, `spec` (scene, perturbation, normal
//! source), `config` (full solver configuration), `solver`, `summary`,
//! `trace` (per-iteration diagnostics), `final_pose`, `wall_ms`.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use dcreg_core::mitigator::SolverKind;
use dcreg_core::pipeline::{IterationTrace, RegistrationResult, SolverConfig, StopReason};
use dcreg_core::RigidTransform;
use serde::{Deserialize, Serialize};

use crate::{BenchSpec, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub converged: bool,
    pub reason: StopReason,
    pub iterations: usize,
    pub fitness: f64,
    pub rmse: f64,
    pub chamfer: f64,
    pub trans_error: Option<f64>,
    pub rot_error_deg: Option<f64>,
    /// Final-iteration masks, "010"-style, ascending eigenvalue order.
    pub rot_mask: String,
    pub trans_mask: String,
}

impl RunSummary {
    pub fn from_result(r: &RegistrationResult) -> Self {
        let (rot_mask, trans_mask) = r
            .trace
            .last()
            .map(|t| t.mask.bits())
            .unwrap_or_else(|| ("---".into(), "---".into()));
        Self {
            converged: r.converged,
            reason: r.reason,
            iterations: r.iterations(),
            fitness: r.metrics.fitness,
            rmse: r.metrics.rmse,
            chamfer: r.metrics.chamfer,
            trans_error: r.metrics.trans_error,
            rot_error_deg: r.metrics.rot_error,
            rot_mask,
            trans_mask,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRecord {
    pub schema_version: u32,
    pub config_hash: String,
    pub spec: BenchSpec,
    pub config: SolverConfig,
    pub solver: SolverKind,
    pub summary: RunSummary,
    pub trace: Vec<IterationTrace>,
    pub final_pose: RigidTransform,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct BenchReport {
    pub records: Vec<BenchRecord>,
}

#[derive(Serialize)]
struct CsvRow<'a> {
    scene: &'a str,
    solver: &'a str,
    converged: bool,
    iterations: usize,
    trans_error_cm: Option<f64>,
    rot_error_deg: Option<f64>,
    chamfer_cm: f64,
    rmse_cm: f64,
    fitness_pct: f64,
    wall_ms: f64,
    trans_mask: &'a str,
    rot_mask: &'a str,
    config_hash: &'a str,
}

impl BenchReport {
    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }

    pub fn from_jsonl(text: &str) -> Result<Self> {
        let records = text
            .lines()
            .filter(|l| !l.trim().is_empty())
            .map(serde_json::from_str)
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { records })
    }

    pub fn read(path: &Path) -> Result<Self> {
        let mut records = Vec::new();
        for line in BufReader::new(File::open(path)?).lines() {
            let line = line?;
            if !line.trim().is_empty() {
                records.push(serde_json::from_str(&line)?);
            }
        }
        Ok(Self { records })
    }

    /// Summary table in centimeters.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for r in &self.records {
            let s = &r.summary;
            w.serialize(CsvRow {
                scene: r.spec.scene.kind.name(),
                solver: r.solver.name(),
                converged: s.converged,
                iterations: s.iterations,
                trans_error_cm: s.trans_error.map(|e| e * 100.0),
                rot_error_deg: s.rot_error_deg,
                chamfer_cm: s.chamfer * 100.0,
                rmse_cm: s.rmse * 100.0,
                fitness_pct: s.fitness,
                wall_ms: r.wall_ms,
                trans_mask: &s.trans_mask,
                rot_mask: &s.rot_mask,
                config_hash: &r.config_hash,
            })?;
        }
        w.flush()?;
        Ok(())
    }

    /// Writes `path` (JSONL) and the CSV summary beside it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        w.write_all(self.to_jsonl()?.as_bytes())?;
        w.flush()?;
        self.write_csv(BufWriter::new(File::create(csv_path(path))?))
    }

    /// Same runs with the same outcomes, ignoring wall-clock time.
    pub fn same_outcome(&self, other: &BenchReport) -> bool {
        self.records.len() == other.records.len()
            && self.records.iter().zip(&other.records).all(|(a, b)| {
                BenchRecord {
                    wall_ms: 0.0,
                    ..a.clone()
                } == BenchRecord {
                    wall_ms: 0.0,
                    ..b.clone()
                }
            })
    }
}

/// `report.jsonl` → `report.csv`.
pub fn csv_path(jsonl: &Path) -> PathBuf {
    jsonl.with_extension("csv")
}
