//! Mapping subspace eigenvectors onto physical motion axes.
//!
//! Absolute inner products with the canonical axes remove the sign ambiguity,
//! the dominant axis and its alignment strength resolve ordering, and a
//! Gram–Schmidt pass in order of decreasing alignment produces a stable
//! orthonormal basis that spans the same invariant subspaces.

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::detector::{DegeneracyMask, SchurSpectrum};
use crate::error::{Error, Result};

const COLLAPSE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    pub fn from_index(i: usize) -> Self {
        match i {
            0 => Axis::X,
            1 => Axis::Y,
            _ => Axis::Z,
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn unit(self) -> Vector3<f64> {
        match self {
            Axis::X => Vector3::x(),
            Axis::Y => Vector3::y(),
            Axis::Z => Vector3::z(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Subspace {
    Rotation,
    Translation,
}

impl Subspace {
    /// Physical motion name: roll/pitch/yaw for rotation, x/y/z for translation.
    pub fn motion_label(self, axis: Axis) -> &'static str {
        match (self, axis) {
            (Subspace::Rotation, Axis::X) => "roll",
            (Subspace::Rotation, Axis::Y) => "pitch",
            (Subspace::Rotation, Axis::Z) => "yaw",
            (Subspace::Translation, Axis::X) => "x",
            (Subspace::Translation, Axis::Y) => "y",
            (Subspace::Translation, Axis::Z) => "z",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisAlignment {
    /// `α[i][j] = |v_i · e_j|`, row per eigenvector.
    pub coefficients: Matrix3<f64>,
    pub dominant_axis: [Axis; 3],
    /// `γ_i = max_j α[i][j]`.
    pub strength: [f64; 3],
    /// Per-eigenvector L1 shares `|v_j| / Σ|v_k|`, in percent.
    pub contributions: Matrix3<f64>,
    /// Angle between each eigenvector and its dominant axis, degrees.
    pub angles_deg: [f64; 3],
}

/// Rows are eigenvectors (columns of `eigvecs`), columns are x, y, z.
pub fn alignment_coefficients(eigvecs: &Matrix3<f64>) -> Matrix3<f64> {
    eigvecs.transpose().abs()
}

pub fn characterize(eigvecs: &Matrix3<f64>) -> AxisAlignment {
    let coefficients = alignment_coefficients(eigvecs);
    let mut dominant_axis = [Axis::X; 3];
    let mut strength = [0.0; 3];
    let mut contributions = Matrix3::zeros();
    let mut angles_deg = [0.0; 3];
    for i in 0..3 {
        let row = coefficients.row(i);
        let mut best = 0;
        for j in 1..3 {
            if row[j] > row[best] {
                best = j;
            }
        }
        dominant_axis[i] = Axis::from_index(best);
        strength[i] = row[best];
        let l1 = row.sum();
        for j in 0..3 {
            contributions[(i, j)] = if l1 > 0.0 { 100.0 * row[j] / l1 } else { 0.0 };
        }
        angles_deg[i] = row[best].min(1.0).acos().to_degrees();
    }
    AxisAlignment {
        coefficients,
        dominant_axis,
        strength,
        contributions,
        angles_deg,
    }
}

/// Orthonormal basis from Gram–Schmidt over eigenvectors taken in processing
/// order. `basis.column(k)` is produced from input column `order[k]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubspaceBasis {
    pub basis: Matrix3<f64>,
    pub order: [usize; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlignedBasis {
    pub rot: SubspaceBasis,
    pub trans: SubspaceBasis,
}

/// Processing order: descending alignment strength, ties by ascending
/// eigenvalue index.
pub fn processing_order(alignment: &AxisAlignment) -> [usize; 3] {
    let mut order = [0, 1, 2];
    order.sort_by(|&a, &b| {
        alignment.strength[b]
            .total_cmp(&alignment.strength[a])
            .then(a.cmp(&b))
    });
    order
}

pub fn orthogonalize(eigvecs: &Matrix3<f64>, alignment: &AxisAlignment) -> Result<SubspaceBasis> {
    let order = processing_order(alignment);
    let mut basis = Matrix3::zeros();
    for (k, &src) in order.iter().enumerate() {
        let v = eigvecs.column(src).into_owned();
        let mut w = v;
        for m in 0..k {
            let p = basis.column(m);
            w -= p * v.dot(&p);
        }
        let norm = w.norm();
        if norm < COLLAPSE_TOL {
            return Err(Error::NumericalCollapse { norm });
        }
        basis.set_column(k, &(w / norm));
    }
    Ok(SubspaceBasis { basis, order })
}

/// Both subspaces of one detection pass, characterized and orthogonalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Characterization {
    pub rot: AxisAlignment,
    pub trans: AxisAlignment,
    pub basis: AlignedBasis,
}

pub fn characterize_spectrum(spectrum: &SchurSpectrum) -> Result<Characterization> {
    let rot = characterize(&spectrum.eigvecs_r);
    let trans = characterize(&spectrum.eigvecs_t);
    let basis = AlignedBasis {
        rot: orthogonalize(&spectrum.eigvecs_r, &rot)?,
        trans: orthogonalize(&spectrum.eigvecs_t, &trans)?,
    };
    Ok(Characterization { rot, trans, basis })
}

/// One line of the characterization table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub subspace: Subspace,
    pub eig_index: usize,
    pub eigenvalue: f64,
    /// `None` when the normalized value is infinite.
    pub normalized_kappa: Option<f64>,
    pub degenerate: bool,
    pub dominant_axis: Axis,
    pub motion: String,
    pub gamma: f64,
    pub angle_deg: f64,
    pub contributions_pct: [f64; 3],
}

pub fn report_rows(
    spectrum: &SchurSpectrum,
    mask: &DegeneracyMask,
    ch: &Characterization,
) -> Vec<ReportRow> {
    let mut rows = Vec::with_capacity(6);
    let parts = [
        (
            Subspace::Rotation,
            &spectrum.eigvals_r,
            &spectrum.normalized_r,
            &mask.rot,
            &ch.rot,
        ),
        (
            Subspace::Translation,
            &spectrum.eigvals_t,
            &spectrum.normalized_t,
            &mask.trans,
            &ch.trans,
        ),
    ];
    for (subspace, vals, norm, flags, al) in parts {
        for i in 0..3 {
            rows.push(ReportRow {
                subspace,
                eig_index: i,
                eigenvalue: vals[i],
                normalized_kappa: norm[i].is_finite().then_some(norm[i]),
                degenerate: flags[i],
                dominant_axis: al.dominant_axis[i],
                motion: subspace.motion_label(al.dominant_axis[i]).to_string(),
                gamma: al.strength[i],
                angle_deg: al.angles_deg[i],
                contributions_pct: [
                    al.contributions[(i, 0)],
                    al.contributions[(i, 1)],
                    al.contributions[(i, 2)],
                ],
            });
        }
    }
    rows
}

/// Fixed-width text rendering of [`report_rows`].
pub fn format_table(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "subspace     idx  eigenvalue     norm.kappa   degen  axis   gamma   angle   x%     y%     z%\n",
    );
    for r in rows {
        let sub = match r.subspace {
            Subspace::Rotation => "rotation",
            Subspace::Translation => "translation",
        };
        let nk = r
            .normalized_kappa
            .map_or_else(|| "inf".to_string(), |k| format!("{k:.3e}"));
        out.push_str(&format!(
            "{sub:<12} {:<4} {:<14.6e} {nk:<12} {:<6} {:<6} {:<7.4} {:<7.2} {:<6.1} {:<6.1} {:<6.1}\n",
            r.eig_index,
            r.eigenvalue,
            if r.degenerate { "yes" } else { "no" },
            r.motion,
            r.gamma,
            r.angle_deg,
            r.contributions_pct[0],
            r.contributions_pct[1],
            r.contributions_pct[2],
        ));
    }
    out
}
