//! Step computation for one Gauss–Newton system.
//!
//! The main solver is preconditioned conjugate gradient with a block-diagonal
//! preconditioner built from the Schur spectra: each block is
//! `V·Λ̃⁻¹·Vᵀ`, where `Λ̃` floors every eigenvalue at `λ_max / κ_tg`. The
//! operator is applied as multiplication by this approximate inverse Hessian
//! (`z = P·r`) everywhere.
//!
//! Baselines for comparison: solution remapping (project the full solve away
//! from flagged directions), truncated pseudoinverse, and uniform Tikhonov
//! damping.

use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use serde::{Deserialize, Serialize};

use crate::detector::{DegeneracyMask, SchurSpectrum};
use crate::eigen::pinv_symmetric;
use crate::error::{Error, Result};
use crate::linearizer::HessianSystem;

pub const DEFAULT_KAPPA_TG: f64 = 10.0;
pub const DEFAULT_PCG_TOL: f64 = 1e-6;
pub const DEFAULT_PCG_MAX_ITER: usize = 10;
pub const DEFAULT_TREG_LAMBDA: f64 = 100.0;

/// `pᵀHp ≤ CURVATURE_TOL · ‖p‖² · ‖H‖_F` stops PCG.
pub const CURVATURE_TOL: f64 = 1e-15;

/// Relative eigenvalue cutoff of the pseudoinverse solvers.
const PINV_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolverKind {
    DcregPcg,
    Sr,
    Tsvd,
    Treg,
    Plain,
}

impl SolverKind {
    pub const ALL: [SolverKind; 5] = [
        SolverKind::DcregPcg,
        SolverKind::Treg,
        SolverKind::Tsvd,
        SolverKind::Sr,
        SolverKind::Plain,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::DcregPcg => "dcreg-pcg",
            SolverKind::Sr => "sr",
            SolverKind::Tsvd => "tsvd",
            SolverKind::Treg => "treg",
            SolverKind::Plain => "plain",
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SolverKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SolverKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::InvalidParameter(format!("unknown solver {s:?}")))
    }
}

/// Floor every eigenvalue at `λ_max / κ_tg`. Input order is preserved.
pub fn clamp_eigenvalues(eigvals: &Vector3<f64>, kappa_tg: f64) -> Result<Vector3<f64>> {
    if !(kappa_tg > 1.0) {
        return Err(Error::InvalidParameter(format!(
            "target condition number must exceed 1, got {kappa_tg}"
        )));
    }
    let lmax = eigvals.max();
    if !(lmax > 0.0) {
        return Err(Error::AllZeroSpectrum);
    }
    let floor = lmax / kappa_tg;
    Ok(eigvals.map(|l| if l > floor { l } else { floor }))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Preconditioner {
    pub rot_eigvecs: Matrix3<f64>,
    pub trans_eigvecs: Matrix3<f64>,
    pub rot_clamped: Vector3<f64>,
    pub trans_clamped: Vector3<f64>,
    pub kappa_tg: f64,
}

impl Preconditioner {
    pub fn identity() -> Self {
        Self {
            rot_eigvecs: Matrix3::identity(),
            trans_eigvecs: Matrix3::identity(),
            rot_clamped: Vector3::repeat(1.0),
            trans_clamped: Vector3::repeat(1.0),
            kappa_tg: f64::INFINITY,
        }
    }

    /// Dense form `blkdiag(V_R Λ̃_R⁻¹ V_Rᵀ, V_t Λ̃_t⁻¹ V_tᵀ)`.
    pub fn matrix(&self) -> Matrix6<f64> {
        let block = |v: &Matrix3<f64>, l: &Vector3<f64>| {
            v * Matrix3::from_diagonal(&l.map(|x| 1.0 / x)) * v.transpose()
        };
        let mut p = Matrix6::zeros();
        p.fixed_view_mut::<3, 3>(0, 0)
            .copy_from(&block(&self.rot_eigvecs, &self.rot_clamped));
        p.fixed_view_mut::<3, 3>(3, 3)
            .copy_from(&block(&self.trans_eigvecs, &self.trans_clamped));
        p
    }

    pub fn apply(&self, r: &Vector6<f64>) -> Vector6<f64> {
        let rr: Vector3<f64> = r.fixed_rows::<3>(0).into();
        let rt: Vector3<f64> = r.fixed_rows::<3>(3).into();
        let zr =
            self.rot_eigvecs * (self.rot_eigvecs.transpose() * rr).component_div(&self.rot_clamped);
        let zt = self.trans_eigvecs
            * (self.trans_eigvecs.transpose() * rt).component_div(&self.trans_clamped);
        let mut z = Vector6::zeros();
        z.fixed_rows_mut::<3>(0).copy_from(&zr);
        z.fixed_rows_mut::<3>(3).copy_from(&zt);
        z
    }

    /// Condition numbers of the clamped rotation and translation spectra.
    pub fn clamped_kappas(&self) -> (f64, f64) {
        (
            self.rot_clamped.max() / self.rot_clamped.min(),
            self.trans_clamped.max() / self.trans_clamped.min(),
        )
    }
}

pub fn build_preconditioner(spectrum: &SchurSpectrum, kappa_tg: f64) -> Result<Preconditioner> {
    Ok(Preconditioner {
        rot_eigvecs: spectrum.eigvecs_r,
        trans_eigvecs: spectrum.eigvecs_t,
        rot_clamped: clamp_eigenvalues(&spectrum.eigvals_r, kappa_tg)?,
        trans_clamped: clamp_eigenvalues(&spectrum.eigvals_t, kappa_tg)?,
        kappa_tg,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PcgStatus {
    Converged,
    MaxIterations,
    CurvatureBreakdown,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolveOutcome {
    /// Step `[φ; δt]`; turned into a pose increment (and checked) by the caller.
    pub increment: Vector6<f64>,
    pub inner_iterations: usize,
    pub final_residual_norm: f64,
    pub status: PcgStatus,
}

impl SolveOutcome {
    fn direct(increment: Vector6<f64>) -> Self {
        Self {
            increment,
            inner_iterations: 0,
            final_residual_norm: 0.0,
            status: PcgStatus::Converged,
        }
    }
}

/// Preconditioned conjugate gradient on `H·Δξ = −g`.
///
/// Stops when `‖r_k‖ ≤ tol·‖r_0‖`, after `max_iter` steps, or when the search
/// direction has (numerically) no curvature.
pub fn pcg_solve(
    h: &Matrix6<f64>,
    g: &Vector6<f64>,
    precond: &Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<SolveOutcome> {
    if !(tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "PCG tolerance must be positive, got {tol}"
        )));
    }
    let h_norm = h.norm();
    let mut x = Vector6::zeros();
    let mut r = -g;
    let r0_norm = r.norm();
    if r0_norm == 0.0 {
        return Ok(SolveOutcome {
            increment: x,
            inner_iterations: 0,
            final_residual_norm: 0.0,
            status: PcgStatus::Converged,
        });
    }
    let mut z = precond.apply(&r);
    let mut p = z;
    let mut rz = r.dot(&z);
    let mut k = 0;
    let status = loop {
        if k >= max_iter {
            break PcgStatus::MaxIterations;
        }
        let hp = h * p;
        let curvature = p.dot(&hp);
        if curvature <= CURVATURE_TOL * p.norm_squared() * h_norm {
            break PcgStatus::CurvatureBreakdown;
        }
        let alpha = rz / curvature;
        x += alpha * p;
        r -= alpha * hp;
        k += 1;
        if r.norm() <= tol * r0_norm {
            break PcgStatus::Converged;
        }
        z = precond.apply(&r);
        let rz_next = r.dot(&z);
        let beta = rz_next / rz;
        rz = rz_next;
        p = z + beta * p;
    };
    Ok(SolveOutcome {
        increment: x,
        inner_iterations: k,
        final_residual_norm: r.norm(),
        status,
    })
}

/// Direct solve of `H·Δξ = −g`.
pub fn solve_plain(h: &Matrix6<f64>, g: &Vector6<f64>) -> Result<Vector6<f64>> {
    if let Some(ch) = h.cholesky() {
        return Ok(ch.solve(&-g));
    }
    h.lu().solve(&-g).ok_or(Error::SingularSystem)
}

/// Six-dimensional directions `[v; 0]` / `[0; v]` of the flagged (or
/// unflagged) Schur eigenvectors.
fn directions(
    mask: &DegeneracyMask,
    rot_eigvecs: &Matrix3<f64>,
    trans_eigvecs: &Matrix3<f64>,
    flagged: bool,
) -> Vec<Vector6<f64>> {
    let mut out = Vec::new();
    for i in 0..3 {
        if mask.rot[i] == flagged {
            let mut d = Vector6::zeros();
            d.fixed_rows_mut::<3>(0).copy_from(&rot_eigvecs.column(i));
            out.push(d);
        }
    }
    for i in 0..3 {
        if mask.trans[i] == flagged {
            let mut d = Vector6::zeros();
            d.fixed_rows_mut::<3>(3).copy_from(&trans_eigvecs.column(i));
            out.push(d);
        }
    }
    out
}

fn projector(dirs: &[Vector6<f64>]) -> Matrix6<f64> {
    dirs.iter().map(|d| d * d.transpose()).sum()
}

/// Solution remapping: full solve, then drop the components along flagged
/// eigen-directions.
pub fn solve_sr(
    h: &Matrix6<f64>,
    g: &Vector6<f64>,
    mask: &DegeneracyMask,
    rot_eigvecs: &Matrix3<f64>,
    trans_eigvecs: &Matrix3<f64>,
) -> Result<Vector6<f64>> {
    let keep = directions(mask, rot_eigvecs, trans_eigvecs, false);
    if keep.is_empty() {
        return Ok(Vector6::zeros());
    }
    let full = solve_plain(h, g)?;
    Ok(projector(&keep) * full)
}

/// Truncated solve: pseudoinverse of `H` restricted to the unflagged
/// eigen-directions, `U·(UᵀHU)⁺·Uᵀ·(−g)`.
pub fn solve_tsvd(
    h: &Matrix6<f64>,
    g: &Vector6<f64>,
    mask: &DegeneracyMask,
    rot_eigvecs: &Matrix3<f64>,
    trans_eigvecs: &Matrix3<f64>,
) -> Vector6<f64> {
    let keep = directions(mask, rot_eigvecs, trans_eigvecs, false);
    if keep.is_empty() {
        return Vector6::zeros();
    }
    let q = projector(&keep);
    let restricted = q * h * q;
    let x = pinv_symmetric(&(0.5 * (restricted + restricted.transpose())), PINV_TOL) * (q * -g);
    // exact zero outside span(U)
    q * x
}

/// Uniformly damped solve `(H + λI)·Δξ = −g`.
pub fn solve_treg(h: &Matrix6<f64>, g: &Vector6<f64>, lambda: f64) -> Result<Vector6<f64>> {
    if !(lambda > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "damping must be positive, got {lambda}"
        )));
    }
    solve_plain(&(h + Matrix6::identity() * lambda), g)
}

/// Minimum-norm solution `S⁺·g` of a reduced 3×3 subproblem.
pub fn pinv_reduced_solve(s: &Matrix3<f64>, g_reduced: &Vector3<f64>) -> Vector3<f64> {
    pinv_symmetric(s, PINV_TOL) * g_reduced
}

/// Reduced rotation gradient `g̃_R = g_R − H_Rt·H_tt⁺·g_t`.
pub fn reduced_gradient_r(h: &HessianSystem) -> Vector3<f64> {
    h.g_r - h.h_rt * pinv_symmetric(&h.h_tt, PINV_TOL) * h.g_t
}

/// Reduced translation gradient `g̃_t = g_t − H_tR·H_RR⁺·g_R`.
pub fn reduced_gradient_t(h: &HessianSystem) -> Vector3<f64> {
    h.g_t - h.h_rt.transpose() * pinv_symmetric(&h.h_rr, PINV_TOL) * h.g_r
}

/// Parameters consumed by [`solve_step`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepParams {
    pub kappa_tg: f64,
    pub pcg_tol: f64,
    pub pcg_max_iter: usize,
    pub treg_lambda: f64,
}

/// Solve one Gauss–Newton step with the selected strategy. For `DcregPcg`
/// the preconditioner is returned as well.
pub fn solve_step(
    kind: SolverKind,
    system: &HessianSystem,
    spectrum: &SchurSpectrum,
    mask: &DegeneracyMask,
    params: &StepParams,
) -> Result<(SolveOutcome, Option<Preconditioner>)> {
    let h = system.hessian();
    let g = system.gradient();
    match kind {
        SolverKind::DcregPcg => {
            let p = build_preconditioner(spectrum, params.kappa_tg)?;
            let out = pcg_solve(&h, &g, &p, params.pcg_tol, params.pcg_max_iter)?;
            Ok((out, Some(p)))
        }
        SolverKind::Plain => Ok((SolveOutcome::direct(solve_plain(&h, &g)?), None)),
        SolverKind::Treg => Ok((
            SolveOutcome::direct(solve_treg(&h, &g, params.treg_lambda)?),
            None,
        )),
        SolverKind::Sr => Ok((
            SolveOutcome::direct(solve_sr(
                &h,
                &g,
                mask,
                &spectrum.eigvecs_r,
                &spectrum.eigvecs_t,
            )?),
            None,
        )),
        SolverKind::Tsvd => Ok((
            SolveOutcome::direct(solve_tsvd(
                &h,
                &g,
                mask,
                &spectrum.eigvecs_r,
                &spectrum.eigvecs_t,
            )),
            None,
        )),
    }
}
