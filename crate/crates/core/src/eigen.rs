//! Symmetric eigendecomposition for the small fixed-size matrices used here
//! (3×3 subspace blocks and the 6×6 Hessian).
//!
//! Cyclic Jacobi: every step zeroes one off-diagonal pair with an exact 2×2
//! rotation, so the result is deterministic and eigenvalues keep high relative
//! accuracy even when they span many orders of magnitude, which is exactly the
//! degenerate regime this crate cares about.

use nalgebra::{SMatrix, SVector};

const MAX_SWEEPS: usize = 64;

/// Eigenvalues in ascending order with matching unit eigenvector columns.
///
/// Eigenvector signs are canonical: the component of largest magnitude is
/// positive (first such index wins on ties).
#[derive(Debug, Clone, PartialEq)]
pub struct SymmetricEigen<const N: usize> {
    pub eigenvalues: SVector<f64, N>,
    pub eigenvectors: SMatrix<f64, N, N>,
}

/// Largest absolute deviation from symmetry, `max |A_ij − A_ji|`.
pub fn asymmetry<const N: usize>(a: &SMatrix<f64, N, N>) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..N {
        for j in (i + 1)..N {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst
}

pub fn symmetric_eigen<const N: usize>(a: &SMatrix<f64, N, N>) -> SymmetricEigen<N> {
    let mut m = 0.5 * (a + a.transpose());
    let mut v = SMatrix::<f64, N, N>::identity();
    let scale = m.norm();

    if scale > 0.0 {
        for _ in 0..MAX_SWEEPS {
            let mut off = 0.0;
            for i in 0..N {
                for j in (i + 1)..N {
                    off += m[(i, j)] * m[(i, j)];
                }
            }
            if off.sqrt() <= f64::EPSILON * 1e-3 * scale {
                break;
            }
            for p in 0..N {
                for q in (p + 1)..N {
                    let apq = m[(p, q)];
                    if apq == 0.0 {
                        continue;
                    }
                    let app = m[(p, p)];
                    let aqq = m[(q, q)];
                    let theta = (aqq - app) / (2.0 * apq);
                    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                    let t = if theta == 0.0 { 1.0 } else { t };
                    let c = 1.0 / (t * t + 1.0).sqrt();
                    let s = t * c;
                    rotate(&mut m, &mut v, p, q, c, s);
                }
            }
        }
    }

    let mut order: [usize; N] = std::array::from_fn(|i| i);
    order.sort_by(|&i, &j| m[(i, i)].total_cmp(&m[(j, j)]).then(i.cmp(&j)));

    let mut eigenvalues = SVector::<f64, N>::zeros();
    let mut eigenvectors = SMatrix::<f64, N, N>::zeros();
    for (k, &idx) in order.iter().enumerate() {
        eigenvalues[k] = m[(idx, idx)];
        let mut col = v.column(idx).into_owned();
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
        canonicalize_sign(&mut col);
        eigenvectors.set_column(k, &col);
    }
    SymmetricEigen {
        eigenvalues,
        eigenvectors,
    }
}

fn rotate<const N: usize>(
    m: &mut SMatrix<f64, N, N>,
    v: &mut SMatrix<f64, N, N>,
    p: usize,
    q: usize,
    c: f64,
    s: f64,
) {
    // m ← Jᵀ m J with J the Givens rotation in the (p, q) plane
    for k in 0..N {
        let mkp = m[(k, p)];
        let mkq = m[(k, q)];
        m[(k, p)] = c * mkp - s * mkq;
        m[(k, q)] = s * mkp + c * mkq;
    }
    for k in 0..N {
        let mpk = m[(p, k)];
        let mqk = m[(q, k)];
        m[(p, k)] = c * mpk - s * mqk;
        m[(q, k)] = s * mpk + c * mqk;
    }
    m[(p, q)] = 0.0;
    m[(q, p)] = 0.0;
    for k in 0..N {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// Flip `v` so its largest-magnitude component is positive.
pub fn canonicalize_sign<const N: usize>(v: &mut SVector<f64, N>) {
    let mut best = 0;
    for i in 1..N {
        if v[i].abs() > v[best].abs() {
            best = i;
        }
    }
    if v[best] < 0.0 {
        *v = -*v;
    }
}

/// Moore–Penrose pseudoinverse of a symmetric matrix. Eigenvalues at or below
/// `rel_tol · λ_max` are treated as zero.
pub fn pinv_symmetric<const N: usize>(a: &SMatrix<f64, N, N>, rel_tol: f64) -> SMatrix<f64, N, N> {
    let eig = symmetric_eigen(a);
    let lmax = eig.eigenvalues.iter().fold(0.0f64, |m, &x| m.max(x.abs()));
    let cutoff = rel_tol * lmax;
    let mut out = SMatrix::<f64, N, N>::zeros();
    if lmax == 0.0 {
        return out;
    }
    for k in 0..N {
        let lam = eig.eigenvalues[k];
        if lam.abs() > cutoff {
            let col = eig.eigenvectors.column(k);
            out += (col * col.transpose()) / lam;
        }
    }
    out
}
