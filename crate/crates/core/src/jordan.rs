//! Jordan products of matrices and of linear maps.

use crate::channels::{check_compatibilizer, compose, invert_map, Channel, LinearMapRep};
use crate::error::{Error, Result};
use crate::linalg::{
    apply_on_factor, kron_raw, max_abs, ptrace, unit, CMatrix, HermitianMatrix, TensorShape, C64,
};

/// Marginal tolerance for operators built exactly.
pub const EXACT_TOL: f64 = 1e-8;
/// Marginal tolerance for operators sourced from solver output.
pub const SOLVER_TOL: f64 = 1e-7;

/// `(AB + BA)/2`, or with a traceless anchor `X` the generalized product
/// `A⊙B + Tr(XA)·Tr(XB)·I`.
pub fn jordan_matrix(
    a: &HermitianMatrix,
    b: &HermitianMatrix,
    anchor: Option<&HermitianMatrix>,
) -> Result<HermitianMatrix> {
    if a.side() != b.side() {
        return Err(Error::ShapeMismatch {
            expected: a.side(),
            found: b.side(),
        });
    }
    let (am, bm) = (a.matrix(), b.matrix());
    let mut p = (am * bm + bm * am) * C64::new(0.5, 0.0);
    if let Some(x) = anchor {
        if x.side() != a.side() {
            return Err(Error::ShapeMismatch {
                expected: a.side(),
                found: x.side(),
            });
        }
        if x.trace().abs() > 1e-10 {
            return Err(Error::ParameterOutOfRange(format!(
                "anchor must be traceless, has trace {}",
                x.trace()
            )));
        }
        let c = x.inner(a) * x.inner(b);
        for i in 0..p.nrows() {
            p[(i, i)] += c;
        }
    }
    HermitianMatrix::new(p, a.shape().clone())
}

/// Hermitian `A` on `X⊗X₁⊗X₂` with `Tr_{X₁}A = Tr_{X₂}A = J(I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct GenJordanOperator {
    a: HermitianMatrix,
    d: usize,
}

impl GenJordanOperator {
    /// Validates the marginal constraints within `tol`.
    pub fn new(a: HermitianMatrix, tol: f64) -> Result<Self> {
        let d = (a.side() as f64).cbrt().round() as usize;
        if d == 0 || d * d * d != a.side() {
            return Err(Error::DimensionMismatch(format!(
                "side {} is not a cube",
                a.side()
            )));
        }
        let a = a.reshaped(TensorShape::new(vec![d, d, d])?)?;
        let deviation = marginal_deviation(a.matrix(), d);
        if deviation > tol {
            return Err(Error::InvalidJordanOperator { deviation });
        }
        Ok(Self { a, d })
    }

    pub fn matrix(&self) -> &HermitianMatrix {
        &self.a
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// `A_JP + I⊗X⊗X` for traceless Hermitian `X`; the correction has zero
    /// partial traces so the constraints still hold.
    pub fn anchored(d: usize, x: &HermitianMatrix) -> Result<Self> {
        if x.side() != d {
            return Err(Error::ShapeMismatch {
                expected: d,
                found: x.side(),
            });
        }
        if x.trace().abs() > 1e-10 {
            return Err(Error::ParameterOutOfRange("anchor must be traceless".into()));
        }
        let base = a_jp(d);
        let corr = kron_raw(&CMatrix::identity(d, d), &kron_raw(x.matrix(), x.matrix()));
        let m = base.a.matrix() + corr;
        Self::new(HermitianMatrix::new(m, base.a.shape().clone())?, EXACT_TOL)
    }
}

fn identity_choi(d: usize) -> CMatrix {
    let mut j = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for k in 0..d {
            j[(i * d + i, k * d + k)] = C64::new(1.0, 0.0);
        }
    }
    j
}

/// Largest deviation of the two middle marginals from `J(I)`.
pub fn marginal_deviation(a: &CMatrix, d: usize) -> f64 {
    let dims = [d, d, d];
    let jid = identity_choi(d);
    let t1 = ptrace(a, &dims, &[1]).expect("three factors");
    let t2 = ptrace(a, &dims, &[2]).expect("three factors");
    max_abs(&(t1 - &jid)).max(max_abs(&(t2 - &jid)))
}

/// `A_JP = ½ Σ_ij E_ij ⊗ Σ_k (E_ik⊗E_kj + E_kj⊗E_ik)`, the Choi matrix of
/// `I ⊙ I`.
pub fn a_jp(d: usize) -> GenJordanOperator {
    let d = d.max(1);
    let n = d * d * d;
    let mut m = CMatrix::zeros(n, n);
    let idx = |i: usize, a: usize, b: usize| (i * d + a) * d + b;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                // E_ij ⊗ E_ik ⊗ E_kj
                m[(idx(i, i, k), idx(j, k, j))] += C64::new(0.5, 0.0);
                // E_ij ⊗ E_kj ⊗ E_ik
                m[(idx(i, k, i), idx(j, j, k))] += C64::new(0.5, 0.0);
            }
        }
    }
    let shape = TensorShape::new(vec![d, d, d]).expect("positive");
    GenJordanOperator {
        a: HermitianMatrix::new(m, shape).expect("A_JP is Hermitian"),
        d,
    }
}

fn output_shape(f: &LinearMapRep, g: &LinearMapRep) -> TensorShape {
    TensorShape::new(vec![f.d_out(), g.d_out()]).expect("positive")
}

/// Jordan product of maps:
/// `J(f⊙g) = ½ Σ_ij E_ij ⊗ Σ_k [f(E_ik)⊗g(E_kj) + f(E_kj)⊗g(E_ik)]`.
pub fn jordan_channel(f: &LinearMapRep, g: &LinearMapRep) -> Result<LinearMapRep> {
    if f.d_in() != g.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "input dimensions {} and {} differ",
            f.d_in(),
            g.d_in()
        )));
    }
    let d = f.d_in();
    let (d1, d2) = (f.d_out(), g.d_out());
    let dout = d1 * d2;
    let fi: Vec<Vec<CMatrix>> = (0..d)
        .map(|i| (0..d).map(|k| f.apply_raw(&unit(d, i, k)).unwrap()).collect())
        .collect();
    let gi: Vec<Vec<CMatrix>> = (0..d)
        .map(|i| (0..d).map(|k| g.apply_raw(&unit(d, i, k)).unwrap()).collect())
        .collect();
    let mut j = CMatrix::zeros(d * dout, d * dout);
    for i in 0..d {
        for jj in 0..d {
            let mut block = CMatrix::zeros(dout, dout);
            for k in 0..d {
                block += kron_raw(&fi[i][k], &gi[k][jj]);
                block += kron_raw(&fi[k][jj], &gi[i][k]);
            }
            j.view_mut((i * dout, jj * dout), (dout, dout))
                .copy_from(&(block * C64::new(0.5, 0.0)));
        }
    }
    let input = f.input().clone();
    let output = output_shape(f, g);
    let choi = HermitianMatrix::new(j, input.concat(&output))?;
    LinearMapRep::with_shapes(choi, input, output)
}

/// Generalized Jordan product: `J(f ⊙_A g) = (I⊗f⊗g)(A)`, applying the maps
/// factor-wise to `A`.
pub fn gen_jordan(f: &LinearMapRep, g: &LinearMapRep, a: &GenJordanOperator) -> Result<LinearMapRep> {
    apply_pair(f, g, a.matrix().matrix(), a.dim()).and_then(|m| {
        let input = f.input().clone();
        let output = output_shape(f, g);
        let choi = HermitianMatrix::with_tolerance(m, input.concat(&output), 1e-10)?;
        LinearMapRep::with_shapes(choi, input, output)
    })
}

/// `(I⊗f⊗g)(M)` for any operator `M` on `X⊗X₁⊗X₂`.
pub fn apply_pair(f: &LinearMapRep, g: &LinearMapRep, m: &CMatrix, d: usize) -> Result<CMatrix> {
    if f.d_in() != d || g.d_in() != d {
        return Err(Error::DimensionMismatch(format!(
            "maps with inputs {} and {} applied to a dimension-{d} operator",
            f.d_in(),
            g.d_in()
        )));
    }
    let step = apply_on_factor(m, &[d, d, d], 1, f.d_out(), |b| f.apply_raw(b).unwrap())?;
    apply_on_factor(&step, &[d, f.d_out(), d], 2, g.d_out(), |b| g.apply_raw(b).unwrap())
}

/// `A = (I⊗f⁻¹⊗g⁻¹)(J(comp))` for invertible `f, g` and a compatibilizer
/// `comp`; then `f ⊙_A g = comp`.
pub fn gen_jordan_from_compatibilizer(f: &Channel, g: &Channel, comp: &Channel) -> Result<GenJordanOperator> {
    let d = f.d_in();
    if g.d_in() != d || comp.d_in() != d || comp.d_out() != f.d_out() * g.d_out() {
        return Err(Error::DimensionMismatch("compatibilizer does not match the pair".into()));
    }
    let comp = comp.with_output_shape(TensorShape::new(vec![f.d_out(), g.d_out()])?)?;
    check_compatibilizer(f, g, &comp, SOLVER_TOL)?;
    let fi = invert_map(f.rep())?;
    let gi = invert_map(g.rep())?;
    let m = apply_pair(&fi, &gi, comp.choi().matrix(), d)?;
    let a = HermitianMatrix::with_tolerance(m, TensorShape::new(vec![d, d, d])?, 1e-9)?;
    GenJordanOperator::new(a, SOLVER_TOL)
}

/// `(Ψ₁⊗Ψ₂) ∘ h` for a map `h` into `Y₁⊗Y₂`.
pub fn post_compose_pair(psi1: &LinearMapRep, psi2: &LinearMapRep, h: &LinearMapRep) -> Result<LinearMapRep> {
    let t = crate::channels::tensor(psi1, psi2)?;
    let h = h.with_output_shape(TensorShape::single(h.d_out()))?;
    let c = compose(&t, &h)?;
    c.with_output_shape(TensorShape::new(vec![psi1.d_out(), psi2.d_out()])?)
}
