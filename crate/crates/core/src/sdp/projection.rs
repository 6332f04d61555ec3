//! Dykstra alternating projections between an affine set and a product of
//! PSD cones, both expressed in real Hermitian coordinates.

use nalgebra::{DMatrix, DVector};

use crate::linalg::{coords_to_herm, eigh, herm_dim, herm_to_coords_into, spectral_map};

#[derive(Clone, Debug)]
pub struct ProjectionRun {
    /// Last cone iterate (PSD by construction).
    pub point: DVector<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// `‖rows·point − rhs‖` at exit.
    pub residual: f64,
}

/// Projection onto `{s : rows·s = rhs}`; `rows` has orthonormal rows.
fn project_affine(rows: &DMatrix<f64>, rhs: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
    let r = rows * x - rhs;
    x - rows.transpose() * r
}

/// Eigenvalue clipping on each block; `blocks` holds (offset, side).
fn project_cone(blocks: &[(usize, usize)], x: &DVector<f64>) -> DVector<f64> {
    let mut out = x.clone();
    for &(off, n) in blocks {
        let len = herm_dim(n);
        let h = coords_to_herm(&x.as_slice()[off..off + len], n);
        let (vals, vecs) = eigh(&h).expect("finite iterate");
        if vals[0] >= 0.0 {
            continue;
        }
        let p = spectral_map(&vals, &vecs, |l| l.max(0.0));
        herm_to_coords_into(&p, &mut out.as_mut_slice()[off..off + len]);
    }
    out
}

/// Finds a point of the cone satisfying the affine constraints up to `tol`
/// (relative to `1 + ‖rhs‖`), or gives up after `max_iter` rounds.
pub fn dykstra(
    rows: &DMatrix<f64>,
    rhs: &DVector<f64>,
    blocks: &[(usize, usize)],
    max_iter: usize,
    tol: f64,
) -> ProjectionRun {
    let n = rows.ncols();
    let scale = 1.0 + rhs.norm();
    // Minimum-norm affine point.
    let mut x = rows.transpose() * rhs;
    let mut p = DVector::zeros(n);
    let mut cone = project_cone(blocks, &x);
    let mut residual = (rows * &cone - rhs).norm();
    for it in 0..max_iter {
        if residual <= tol * scale {
            return ProjectionRun {
                point: cone,
                converged: true,
                iterations: it,
                residual,
            };
        }
        // The affine set needs no correction term.
        let y = project_cone(blocks, &(&x + &p));
        p = &x + &p - &y;
        x = project_affine(rows, rhs, &y);
        cone = y;
        residual = (rows * &cone - rhs).norm();
    }
    ProjectionRun {
        point: cone,
        converged: residual <= tol * scale,
        iterations: max_iter,
        residual,
    }
}
