//! Direction-specific ill-conditioning detection on the rotation and
//! translation Schur complements of the Gauss–Newton Hessian.
//!
//! `S_R = H_RR − H_Rt·H_tt⁻¹·H_tR` is the curvature left for rotation once
//! translation has been optimally re-fitted (and symmetrically for `S_t`).
//! Each subspace is eigendecomposed on its own, and every eigen-direction gets
//! a normalized eigenvalue `λ_max / λ_i`; directions whose value exceeds the
//! threshold are flagged.
//!
//! When the eliminated block is singular the Moore–Penrose pseudoinverse is
//! used instead of the inverse; [`SchurSpectrum`] records which branch ran.

use nalgebra::{DMatrix, Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::eigen::{asymmetry, pinv_symmetric, symmetric_eigen};
use crate::error::{Error, Result};
use crate::linearizer::HessianSystem;

pub const DEFAULT_KAPPA_TH: f64 = 10.0;
pub const DEFAULT_PINV_TOL: f64 = 1e-10;

/// Relative symmetry tolerance accepted by [`spectrum`].
pub const SYMMETRY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchurPair {
    pub s_r: Matrix3<f64>,
    pub s_t: Matrix3<f64>,
    /// `H_tt` was singular and pseudo-inverted while forming `S_R`.
    pub pinv_r: bool,
    /// `H_RR` was singular and pseudo-inverted while forming `S_t`.
    pub pinv_t: bool,
}

/// Inverse of a symmetric PSD block, or its pseudoinverse when the smallest
/// eigenvalue falls below `pinv_tol · λ_max`.
fn block_inverse(block: &Matrix3<f64>, pinv_tol: f64) -> (Matrix3<f64>, bool) {
    let eig = symmetric_eigen(block);
    let lmax = eig.eigenvalues[2];
    if lmax <= 0.0 {
        return (Matrix3::zeros(), true);
    }
    let singular = eig.eigenvalues[0] < pinv_tol * lmax;
    if singular {
        return (pinv_symmetric(block, pinv_tol), true);
    }
    let v = eig.eigenvectors;
    let inv = v * Matrix3::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l)) * v.transpose();
    (inv, false)
}

fn symmetrize(m: Matrix3<f64>) -> Matrix3<f64> {
    0.5 * (m + m.transpose())
}

pub fn schur_complements(h: &HessianSystem, pinv_tol: f64) -> SchurPair {
    let h_tr = h.h_rt.transpose();
    let (tt_inv, pinv_r) = block_inverse(&h.h_tt, pinv_tol);
    let (rr_inv, pinv_t) = block_inverse(&h.h_rr, pinv_tol);
    SchurPair {
        s_r: symmetrize(h.h_rr - h.h_rt * tt_inv * h_tr),
        s_t: symmetrize(h.h_tt - h_tr * rr_inv * h.h_rt),
        pinv_r,
        pinv_t,
    }
}

/// Coupling term `M_R = H_Rt·H_tt⁺·H_tR`, so that `S_R = H_RR − M_R`.
pub fn coupling_r(h: &HessianSystem, pinv_tol: f64) -> Matrix3<f64> {
    let (tt_inv, _) = block_inverse(&h.h_tt, pinv_tol);
    symmetrize(h.h_rt * tt_inv * h.h_rt.transpose())
}

/// Coupling term `M_t = H_tR·H_RR⁺·H_Rt`.
pub fn coupling_t(h: &HessianSystem, pinv_tol: f64) -> Matrix3<f64> {
    let (rr_inv, _) = block_inverse(&h.h_rr, pinv_tol);
    symmetrize(h.h_rt.transpose() * rr_inv * h.h_rt)
}

/// Projection form `J_Rᵀ(I − J_t·J_t⁺)J_R` of the rotation Schur complement,
/// computed from the stacked Jacobian columns through an SVD pseudoinverse.
/// Swap the arguments for the translation complement.
pub fn projection_form_schur(j_r: &DMatrix<f64>, j_t: &DMatrix<f64>) -> Matrix3<f64> {
    let m = j_t.nrows();
    let scale = j_t.norm().max(f64::MIN_POSITIVE);
    let jt_pinv = j_t
        .clone()
        .pseudo_inverse(1e-12 * scale)
        .expect("non-negative tolerance");
    let proj = DMatrix::<f64>::identity(m, m) - j_t * jt_pinv;
    let s = j_r.transpose() * proj * j_r;
    symmetrize(Matrix3::from_iterator(s.iter().copied()))
}

/// Ascending eigenvalues and matching unit eigenvectors (largest-magnitude
/// component positive).
pub fn spectrum(s: &Matrix3<f64>) -> Result<(Vector3<f64>, Matrix3<f64>)> {
    let asym = asymmetry(s);
    if asym > SYMMETRY_TOL * s.norm() {
        return Err(Error::NotSymmetric { asymmetry: asym });
    }
    let eig = symmetric_eigen(s);
    Ok((eig.eigenvalues, eig.eigenvectors))
}

/// `λ_max / λ_min`, or `+∞` when `λ_min ≤ 0`.
pub fn condition_number(eigvals: &[f64]) -> Result<f64> {
    let lmax = eigvals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lmin = eigvals.iter().copied().fold(f64::INFINITY, f64::min);
    if !(lmax > 0.0) {
        return Err(Error::AllZeroSpectrum);
    }
    Ok(if lmin > 0.0 {
        lmax / lmin
    } else {
        f64::INFINITY
    })
}

/// `λ_max / λ_i` per direction; `+∞` for non-positive eigenvalues.
pub fn normalized_eigenvalues(eigvals: &Vector3<f64>) -> Result<Vector3<f64>> {
    let lmax = eigvals[2];
    if !(lmax > 0.0) {
        return Err(Error::AllZeroSpectrum);
    }
    Ok(eigvals.map(|l| if l > 0.0 { lmax / l } else { f64::INFINITY }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SchurSpectrum {
    pub s_r: Matrix3<f64>,
    pub s_t: Matrix3<f64>,
    pub eigvals_r: Vector3<f64>,
    pub eigvals_t: Vector3<f64>,
    pub eigvecs_r: Matrix3<f64>,
    pub eigvecs_t: Matrix3<f64>,
    pub kappa_r: f64,
    pub kappa_t: f64,
    pub normalized_r: Vector3<f64>,
    pub normalized_t: Vector3<f64>,
    pub pinv_r: bool,
    pub pinv_t: bool,
}

/// Per-direction flags, indexed by ascending eigenvalue position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DegeneracyMask {
    pub rot: [bool; 3],
    pub trans: [bool; 3],
}

impl DegeneracyMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn count(&self) -> usize {
        self.rot
            .iter()
            .chain(self.trans.iter())
            .filter(|&&b| b)
            .count()
    }

    pub fn any(&self) -> bool {
        self.count() > 0
    }

    /// Compact "010"-style rendering, rotation then translation.
    pub fn bits(&self) -> (String, String) {
        let f = |m: &[bool; 3]| m.iter().map(|&b| if b { '1' } else { '0' }).collect();
        (f(&self.rot), f(&self.trans))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub spectrum: SchurSpectrum,
    pub mask: DegeneracyMask,
}

/// Full detection pass on one Gauss–Newton system.
pub fn detect(h: &HessianSystem, kappa_th: f64) -> Result<Detection> {
    detect_with_tol(h, kappa_th, DEFAULT_PINV_TOL)
}

pub fn detect_with_tol(h: &HessianSystem, kappa_th: f64, pinv_tol: f64) -> Result<Detection> {
    if !(kappa_th > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "detection threshold must exceed 1, got {kappa_th}"
        )));
    }
    let pair = schur_complements(h, pinv_tol);
    let (eigvals_r, eigvecs_r) = spectrum(&pair.s_r)?;
    let (eigvals_t, eigvecs_t) = spectrum(&pair.s_t)?;
    let normalized_r = normalized_eigenvalues(&eigvals_r)?;
    let normalized_t = normalized_eigenvalues(&eigvals_t)?;
    let kappa_r = condition_number(eigvals_r.as_slice())?;
    let kappa_t = condition_number(eigvals_t.as_slice())?;
    let mask = DegeneracyMask {
        rot: std::array::from_fn(|i| normalized_r[i] > kappa_th),
        trans: std::array::from_fn(|i| normalized_t[i] > kappa_th),
    };
    Ok(Detection {
        spectrum: SchurSpectrum {
            s_r: pair.s_r,
            s_t: pair.s_t,
            eigvals_r,
            eigvals_t,
            eigvecs_r,
            eigvecs_t,
            kappa_r,
            kappa_t,
            normalized_r,
            normalized_t,
            pinv_r: pair.pinv_r,
            pinv_t: pair.pinv_t,
        },
        mask,
    })
}

/// Condition numbers of the plain diagonal blocks `H_RR` and `H_tt`, the
/// coupling-blind comparison to the Schur values.
pub fn diagonal_block_kappas(h: &HessianSystem) -> (f64, f64) {
    let k = |m: &Matrix3<f64>| {
        let e = symmetric_eigen(m).eigenvalues;
        condition_number(e.as_slice()).unwrap_or(f64::INFINITY)
    };
    (k(&h.h_rr), k(&h.h_tt))
}

/// Condition number of the full 6×6 Hessian.
pub fn full_kappa(h: &HessianSystem) -> f64 {
    let e = symmetric_eigen(&h.hessian()).eigenvalues;
    condition_number(e.as_slice()).unwrap_or(f64::INFINITY)
}
