#![allow(dead_code)]

use dcreg_core::linearizer::{assemble_system, Correspondence, HessianSystem};
use nalgebra::{Matrix3, Matrix6, Vector3, Vector6};
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn unit(rng: &mut ChaCha8Rng) -> Vector3<f64> {
    loop {
        let v = Vector3::new(
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
            rng.random_range(-1.0..1.0),
        );
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Correspondences from a seeded generator. Normals are either spread in all
/// directions, squeezed towards one plane (cylinder-like) or towards one axis
/// (plane-like), so the resulting systems range from benign to badly
/// conditioned.
pub fn random_correspondences(seed: u64) -> Vec<Correspondence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = rng.random_range(12..60);
    let extent: f64 = 10f64.powf(rng.random_range(-0.5..1.5));
    let flavour = rng.random_range(0..3);
    let squeeze: f64 = 10f64.powf(rng.random_range(-3.0..-0.5));
    let offset = Vector3::new(
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
        rng.random_range(-1.0..1.0),
    ) * extent;
    (0..m)
        .map(|_| {
            let p = offset
                + Vector3::new(
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ) * extent;
            let mut n = unit(&mut rng);
            match flavour {
                1 => n.z *= squeeze,
                2 => {
                    n.x *= squeeze;
                    n.y *= squeeze;
                }
                _ => {}
            }
            let n = n.normalize();
            let q = p + Vector3::new(
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
                rng.random_range(-0.05..0.05),
            );
            Correspondence::at_identity(p, q, n)
        })
        .collect()
}

pub fn random_system(seed: u64) -> HessianSystem {
    assemble_system(&random_correspondences(seed)).unwrap()
}

pub fn random_rotation(rng: &mut ChaCha8Rng) -> Matrix3<f64> {
    let axis = unit(rng);
    let angle = rng.random_range(-3.0..3.0);
    dcreg_core::se3::exp_so3(&(axis * angle))
}

/// SPD matrix with eigenvalues log-uniform in `[1, kappa]` and a random basis.
pub fn random_spd6(rng: &mut ChaCha8Rng, kappa: f64) -> Matrix6<f64> {
    let a = Matrix6::from_fn(|_, _| rng.random_range(-1.0..1.0));
    let q = a.qr().q();
    let d = Vector6::from_fn(|i, _| {
        if i == 0 {
            1.0
        } else if i == 5 {
            kappa
        } else {
            kappa.powf(rng.random_range(0.0..1.0))
        }
    });
    let h = q * Matrix6::from_diagonal(&d) * q.transpose();
    0.5 * (h + h.transpose())
}

pub fn random_spd3(rng: &mut ChaCha8Rng, kappa: f64) -> Matrix3<f64> {
    let q = random_rotation(rng);
    let d = Vector3::new(1.0, kappa.powf(rng.random_range(0.0..1.0)), kappa);
    let s = q * Matrix3::from_diagonal(&d) * q.transpose();
    0.5 * (s + s.transpose())
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
