//! Primal-dual interior-point method for real block-diagonal SDPs
//!
//! ```text
//! min Σ_b ⟨C_b, X_b⟩  s.t.  Σ_b ⟨A_ib, X_b⟩ = b_i,  X_b ⪰ 0
//! max bᵀy             s.t.  C_b − Σ_i y_i A_ib = Z_b ⪰ 0
//! ```
//!
//! Infeasible start, Nesterov–Todd scaling, Mehrotra predictor-corrector.

use nalgebra::{DMatrix, DVector};

type Mat = DMatrix<f64>;

/// Problem data. `a[i][b]` is `None` when constraint `i` does not touch
/// block `b`.
#[derive(Clone, Debug)]
pub struct BlockProblem {
    pub sides: Vec<usize>,
    pub a: Vec<Vec<Option<Mat>>>,
    pub b: DVector<f64>,
    pub c: Vec<Mat>,
}

#[derive(Clone, Copy, Debug)]
pub struct IpmSettings {
    pub tol: f64,
    /// Accuracy accepted (flagged) when the method stalls before `tol`.
    pub fallback_tol: f64,
    pub max_iter: usize,
}

impl Default for IpmSettings {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            fallback_tol: 1e-7,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IpmStatus {
    Converged,
    /// Stalled, but the best iterate meets the fallback accuracy.
    ReducedAccuracy,
    Failed,
}

#[derive(Clone, Debug)]
pub struct IpmSolution {
    pub x: Vec<Mat>,
    pub y: DVector<f64>,
    pub z: Vec<Mat>,
    pub pobj: f64,
    pub dobj: f64,
    pub status: IpmStatus,
    pub iterations: usize,
    pub rel_primal: f64,
    pub rel_dual: f64,
    pub rel_gap: f64,
}

impl IpmSolution {
    fn accuracy(&self) -> f64 {
        self.rel_primal.max(self.rel_dual).max(self.rel_gap)
    }
}

fn dot(a: &Mat, b: &Mat) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: Mat) -> Mat {
    (&m + m.transpose()) * 0.5
}

struct Scaling {
    r: Mat,
    lam: DVector<f64>,
}

/// NT scaling `W = R Rᵀ` with `Rᵀ Z R = R⁻¹ X R⁻ᵀ = Λ`.
fn nt_scaling(x: &Mat, z: &Mat) -> Option<Scaling> {
    let l = x.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &l).svd(false, true);
    let vt = svd.v_t?;
    let lam = svd.singular_values;
    if lam.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return None;
    }
    let v = vt.transpose();
    let mut r = l * v;
    for (k, &s) in lam.iter().enumerate() {
        let f = 1.0 / s.sqrt();
        for i in 0..r.nrows() {
            r[(i, k)] *= f;
        }
    }
    Some(Scaling { r, lam })
}

/// Largest step `α` with `Λ + α·D ⪰ 0` (infinite if `D ⪰ 0`).
fn max_step(lam: &DVector<f64>, d: &Mat) -> f64 {
    let n = lam.len();
    let s: Vec<f64> = lam.iter().map(|v| 1.0 / v.sqrt()).collect();
    let m = Mat::from_fn(n, n, |i, j| d[(i, j)] * s[i] * s[j]);
    let m = sym(m);
    let eig = nalgebra::SymmetricEigen::new(m);
    let lmin = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
    if lmin >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lmin
    }
}

pub fn solve(p: &BlockProblem, settings: &IpmSettings) -> IpmSolution {
    let m = p.b.len();
    let nb = p.sides.len();
    let n_tot: usize = p.sides.iter().sum();

    // Starting point (SDPT3-style magnitudes).
    let mut x: Vec<Mat> = Vec::with_capacity(nb);
    let mut z: Vec<Mat> = Vec::with_capacity(nb);
    for b in 0..nb {
        let n = p.sides[b] as f64;
        let mut xi: f64 = 10.0f64.max(n.sqrt());
        let mut nrm_a: f64 = 0.0;
        for i in 0..m {
            if let Some(a) = &p.a[i][b] {
                let na = a.norm();
                nrm_a = nrm_a.max(na);
                xi = xi.max(n * (1.0 + p.b[i].abs()) / (1.0 + na));
            }
        }
        let eta = 10.0f64.max(n.sqrt()).max((1.0 + nrm_a.max(p.c[b].norm())) / n.sqrt());
        x.push(Mat::identity(p.sides[b], p.sides[b]) * xi);
        z.push(Mat::identity(p.sides[b], p.sides[b]) * eta);
    }
    let mut y = DVector::zeros(m);

    let norm_b = p.b.norm();
    let norm_c = p.c.iter().map(|c| c.norm_squared()).sum::<f64>().sqrt();

    let apply_a = |xs: &[Mat]| -> DVector<f64> {
        DVector::from_fn(m, |i, _| {
            (0..nb)
                .map(|b| p.a[i][b].as_ref().map_or(0.0, |a| dot(a, &xs[b])))
                .sum()
        })
    };
    let apply_at = |v: &DVector<f64>, b: usize| -> Mat {
        let mut out = Mat::zeros(p.sides[b], p.sides[b]);
        for i in 0..m {
            if let Some(a) = &p.a[i][b] {
                out += a * v[i];
            }
        }
        out
    };

    let mut best: Option<IpmSolution> = None;
    let mut iterations = 0;
    let mut gamma: f64 = 0.9;
    let mut stall = 0;

    for iter in 0..=settings.max_iter {
        iterations = iter;
        let ax = apply_a(&x);
        let rp = &p.b - ax;
        let rd: Vec<Mat> = (0..nb).map(|b| &p.c[b] - &z[b] - apply_at(&y, b)).collect();
        let pobj: f64 = (0..nb).map(|b| dot(&p.c[b], &x[b])).sum();
        let dobj = p.b.dot(&y);
        let xz: f64 = (0..nb).map(|b| dot(&x[b], &z[b])).sum();
        let rel_primal = rp.norm() / (1.0 + norm_b);
        let rel_dual = rd.iter().map(|r| r.norm_squared()).sum::<f64>().sqrt() / (1.0 + norm_c);
        let rel_gap = (pobj - dobj).abs().max(xz.abs()) / (1.0 + pobj.abs() + dobj.abs());
        let current = IpmSolution {
            x: x.clone(),
            y: y.clone(),
            z: z.clone(),
            pobj,
            dobj,
            status: IpmStatus::Failed,
            iterations: iter,
            rel_primal,
            rel_dual,
            rel_gap,
        };
        let improved = best.as_ref().is_none_or(|b| current.accuracy() < b.accuracy());
        if improved {
            best = Some(current);
            stall = 0;
        } else {
            stall += 1;
        }
        if rel_primal <= settings.tol && rel_dual <= settings.tol && rel_gap <= settings.tol {
            let mut sol = best.take().unwrap();
            sol.status = IpmStatus::Converged;
            return sol;
        }
        if iter == settings.max_iter || stall > 15 {
            break;
        }

        // Scaling and Schur complement.
        let mut scal = Vec::with_capacity(nb);
        let mut ok = true;
        for b in 0..nb {
            match nt_scaling(&x[b], &z[b]) {
                Some(s) => scal.push(s),
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            break;
        }
        let ahat: Vec<Vec<Option<Mat>>> = (0..m)
            .map(|i| {
                (0..nb)
                    .map(|b| {
                        p.a[i][b].as_ref().map(|a| {
                            let r = &scal[b].r;
                            sym(r.transpose() * a * r)
                        })
                    })
                    .collect()
            })
            .collect();
        let rdhat: Vec<Mat> = (0..nb)
            .map(|b| {
                let r = &scal[b].r;
                sym(r.transpose() * &rd[b] * r)
            })
            .collect();
        let mut schur = Mat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let mut s = 0.0;
                for b in 0..nb {
                    if let (Some(ai), Some(aj)) = (&ahat[i][b], &ahat[j][b]) {
                        s += dot(ai, aj);
                    }
                }
                schur[(i, j)] = s;
                schur[(j, i)] = s;
            }
        }
        let chol = schur.clone().cholesky();
        let lu = if chol.is_none() { Some(schur.clone().lu()) } else { None };
        let solve_schur = |r: &DVector<f64>| -> Option<DVector<f64>> {
            match (&chol, &lu) {
                (Some(c), _) => Some(c.solve(r)),
                (None, Some(l)) => l.solve(r),
                _ => None,
            }
        };

        // Direction for a scaled complementarity right-hand side H.
        let direction = |h: &[Mat]| -> Option<(DVector<f64>, Vec<Mat>, Vec<Mat>)> {
            let rhs = DVector::from_fn(m, |i, _| {
                let mut v = rp[i];
                for b in 0..nb {
                    if let Some(a) = &ahat[i][b] {
                        v += dot(a, &rdhat[b]) - dot(a, &h[b]);
                    }
                }
                v
            });
            let dy = solve_schur(&rhs)?;
            let mut dzh = Vec::with_capacity(nb);
            let mut dxh = Vec::with_capacity(nb);
            for b in 0..nb {
                let mut d = rdhat[b].clone();
                for i in 0..m {
                    if let Some(a) = &ahat[i][b] {
                        d -= a * dy[i];
                    }
                }
                dxh.push(&h[b] - &d);
                dzh.push(d);
            }
            Some((dy, dxh, dzh))
        };

        let mu = xz / n_tot as f64;
        // Predictor.
        let h_aff: Vec<Mat> = scal
            .iter()
            .map(|s| Mat::from_diagonal(&(-&s.lam)))
            .collect();
        let Some((_, dxa, dza)) = direction(&h_aff) else { break };
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for b in 0..nb {
            ap = ap.min(max_step(&scal[b].lam, &dxa[b]));
            ad = ad.min(max_step(&scal[b].lam, &dza[b]));
        }
        let ap = ap.min(1.0);
        let ad = ad.min(1.0);
        let mut mu_aff = 0.0;
        for b in 0..nb {
            let l = Mat::from_diagonal(&scal[b].lam);
            mu_aff += dot(&(&l + &dxa[b] * ap), &(&l + &dza[b] * ad));
        }
        mu_aff /= n_tot as f64;
        let sigma = if mu > 0.0 {
            (mu_aff / mu).max(0.0).powi(3).min(1.0)
        } else {
            0.0
        };

        // Corrector.
        let h_cor: Vec<Mat> = (0..nb)
            .map(|b| {
                let lam = &scal[b].lam;
                let n = lam.len();
                let cross = sym(&dxa[b] * &dza[b]);
                Mat::from_fn(n, n, |i, j| {
                    let target = if i == j { sigma * mu - lam[i] * lam[i] } else { 0.0 };
                    2.0 * (target - cross[(i, j)]) / (lam[i] + lam[j])
                })
            })
            .collect();
        let Some((dy, dxh, dzh)) = direction(&h_cor) else { break };
        let mut ap = f64::INFINITY;
        let mut ad = f64::INFINITY;
        for b in 0..nb {
            ap = ap.min(max_step(&scal[b].lam, &dxh[b]));
            ad = ad.min(max_step(&scal[b].lam, &dzh[b]));
        }
        let ap = (gamma * ap).min(1.0);
        let ad = (gamma * ad).min(1.0);
        gamma = 0.9 + 0.09 * ap.min(ad);

        for b in 0..nb {
            let r = &scal[b].r;
            let dx = r * &dxh[b] * r.transpose();
            x[b] = sym(&x[b] + dx * ap);
        }
        y += &dy * ad;
        for b in 0..nb {
            // ΔZ = R_d − A*(Δy) keeps dual residuals exactly linear.
            let mut dz = rd[b].clone();
            for i in 0..m {
                if let Some(a) = &p.a[i][b] {
                    dz -= a * dy[i];
                }
            }
            z[b] = sym(&z[b] + dz * ad);
        }
        if ap < 1e-12 && ad < 1e-12 {
            break;
        }
    }

    let mut sol = best.expect("at least one iterate");
    sol.iterations = iterations;
    sol.status = if sol.accuracy() <= settings.fallback_tol {
        IpmStatus::ReducedAccuracy
    } else {
        IpmStatus::Failed
    };
    sol
}

#[cfg(test)]
mod tests {
    use super::*;

    /// max t s.t. X − tI ⪰ 0, Tr X = 1 on 2×2 real symmetric X, written as
    /// min −t with X = S + tI: min ⟨−I/2, S⟩ after eliminating t.
    #[test]
    fn trivial_eigenvalue_problem() {
        // Variables S ⪰ 0 (2×2). Constraint: S_01 = 0.3 (off-diagonal) and
        // Tr S = 1. Objective: min Tr(C S) with C = diag(1, 2).
        let e01 = Mat::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]);
        let p = BlockProblem {
            sides: vec![2],
            a: vec![vec![Some(e01)], vec![Some(Mat::identity(2, 2))]],
            b: DVector::from_vec(vec![0.3, 1.0]),
            c: vec![Mat::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 2.0])],
        };
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::Converged);
        // Optimum: S = [[a, .3], [.3, 1−a]] with a(1−a) ≥ .09, minimize 2 − a.
        let a_max = (1.0 + (1.0f64 - 0.36).sqrt()) / 2.0;
        assert!((sol.pobj - (2.0 - a_max)).abs() < 1e-7);
        assert!((sol.pobj - sol.dobj).abs() < 1e-8);
    }

    #[test]
    fn two_blocks() {
        // min Tr(X1) + 2 Tr(X2) s.t. Tr(X1) + Tr(X2) = 1 → all weight on X1.
        let p = BlockProblem {
            sides: vec![2, 3],
            a: vec![vec![Some(Mat::identity(2, 2)), Some(Mat::identity(3, 3))]],
            b: DVector::from_vec(vec![1.0]),
            c: vec![Mat::identity(2, 2), Mat::identity(3, 3) * 2.0],
        };
        let sol = solve(&p, &IpmSettings::default());
        assert_eq!(sol.status, IpmStatus::Converged);
        assert!((sol.pobj - 1.0).abs() < 1e-8);
        assert!(sol.x[1].trace().abs() < 1e-7);
    }
}
