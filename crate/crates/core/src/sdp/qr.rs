//! Householder QR with column pivoting, used for rank decisions.

use nalgebra::{DMatrix, DVector};

/// `A[:, perm] = Q·R` truncated to the numerical rank: `Q` is `m × rank`
/// with orthonormal columns and `R` is `rank × n` upper trapezoidal.
#[derive(Clone, Debug)]
pub struct PivotedQr {
    pub q: DMatrix<f64>,
    pub r: DMatrix<f64>,
    /// Column `k` of `A·P` is column `perm[k]` of `A`.
    pub perm: Vec<usize>,
    pub rank: usize,
}

/// Stops once the largest remaining column norm is at most `tol` times the
/// first pivot's norm.
pub fn pivoted_qr(a: &DMatrix<f64>, tol: f64) -> PivotedQr {
    let (m, n) = a.shape();
    let mut w = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut reflectors: Vec<DVector<f64>> = Vec::new();
    let mut first = 0.0;
    let steps = m.min(n);
    let mut rank = 0;
    for k in 0..steps {
        let (mut best, mut best_norm) = (k, -1.0);
        for j in k..n {
            let nrm = w.view((k, j), (m - k, 1)).norm();
            if nrm > best_norm {
                best = j;
                best_norm = nrm;
            }
        }
        if k == 0 {
            first = best_norm;
        }
        if best_norm <= tol * first || best_norm == 0.0 {
            break;
        }
        w.swap_columns(k, best);
        perm.swap(k, best);
        // Reflector mapping w[k.., k] to ∓‖·‖e₁.
        let x = w.view((k, k), (m - k, 1)).clone_owned();
        let alpha = if x[0] >= 0.0 { -best_norm } else { best_norm };
        let mut v = DVector::from_iterator(m - k, x.iter().cloned());
        v[0] -= alpha;
        let vn = v.norm();
        if vn > 0.0 {
            v /= vn;
            let mut block = w.view_mut((k, k), (m - k, n - k));
            let proj = v.transpose() * &block;
            block -= &v * proj * 2.0;
        }
        for i in k + 1..m {
            w[(i, k)] = 0.0;
        }
        reflectors.push(v);
        rank = k + 1;
    }
    let r = DMatrix::from_fn(rank, n, |i, j| if j >= i { w[(i, j)] } else { 0.0 });
    // Q = H₀ H₁ … applied to the first `rank` unit vectors.
    let mut q = DMatrix::from_fn(m, rank, |i, j| if i == j { 1.0 } else { 0.0 });
    for (k, v) in reflectors.iter().enumerate().rev() {
        let mut block = q.view_mut((k, 0), (m - k, rank));
        let proj = v.transpose() * &block;
        block -= v * proj * 2.0;
    }
    PivotedQr { q, r, perm, rank }
}

impl PivotedQr {
    /// Leading `rank × rank` triangle.
    pub fn r11(&self) -> DMatrix<f64> {
        self.r.columns(0, self.rank).into_owned()
    }

    /// `v[perm]`.
    pub fn permute(&self, v: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(self.perm.len(), |k, _| v[self.perm[k]])
    }

    /// Scatters `u` (indexed in pivot order) back to original positions.
    pub fn unpermute(&self, u: &DVector<f64>) -> DVector<f64> {
        let mut out = DVector::zeros(self.perm.len());
        for (k, &p) in self.perm.iter().enumerate() {
            out[p] = u[k];
        }
        out
    }
}
