//! Incompatibility certificates and their solver-independent verification.
//!
//! A plain [`Witness`] `(Z₁, Z₂)` proves that no compatibilizer exists when
//! `Tr*_{Y₂}Z₁ + Tr*_{Y₁}Z₂ ⪰ 0` while `⟨Z₁, J(f)⟩ + ⟨Z₂, J(g)⟩ < 0`: any
//! compatibilizer `X` would give `0 ≤ ⟨Tr*Z₁ + Tr*Z₂, X⟩ = pairing`. The ppt
//! variant pairs against partially transposed Choi matrices and rules out
//! compatibilizers with `X^{T_X} ⪰ 0`.

use crate::channels::{Channel, Povm};
use crate::error::{Error, Result};
use crate::linalg::{embed_identity, inner, ptranspose, CMatrix, HermitianMatrix, TensorShape, C64};
use crate::sdp::{LinOp, PairMap};

/// Slack allowed on eigenvalues, and the most a pairing may be before a
/// certificate stops counting as strict.
pub const WITNESS_TOL: f64 = 1e-9;
/// Equality residual allowed in a Jordan witness.
pub const JORDAN_RESIDUAL_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WitnessMode {
    Plain,
    Ppt,
}

impl WitnessMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WitnessMode::Plain => "plain",
            WitnessMode::Ppt => "ppt",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Witness {
    pub z1: HermitianMatrix,
    pub z2: HermitianMatrix,
    pub mode: WitnessMode,
}

/// `(W₁, W₂, ρ)` with `(I⊗f*⊗g*)(ρ) = Tr*_{X₂}W₁ + Tr*_{X₁}W₂`, `ρ ⪰ 0` and
/// `⟨W₁ + W₂, J(I)⟩ < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct JordanWitness {
    pub w1: HermitianMatrix,
    pub w2: HermitianMatrix,
    pub rho: HermitianMatrix,
}

/// `Z_a` on `X⊗Y`, one per copy, with `Σ_a Tr*_{others} Z_a ⪰ 0` and
/// `Σ_a ⟨Z_a, J(f)⟩ < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExtensionWitness {
    pub zs: Vec<HermitianMatrix>,
}

/// `A_i + B_j ⪰ 0` for all `i, j` and `Σ⟨A_i, M_i⟩ + Σ⟨B_j, N_j⟩ < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct PovmWitness {
    pub a: Vec<HermitianMatrix>,
    pub b: Vec<HermitianMatrix>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Verification {
    pub valid: bool,
    /// The pairing value; negative for a useful certificate.
    pub margin: f64,
    /// Smallest eigenvalue of the operator that must be PSD.
    pub min_eigenvalue: f64,
    /// Equality residual (zero for witnesses without equality constraints).
    pub residual: f64,
}

fn verdict(margin: f64, min_eigenvalue: f64, residual: f64, residual_tol: f64) -> Verification {
    Verification {
        valid: min_eigenvalue >= -WITNESS_TOL && margin <= -WITNESS_TOL && residual <= residual_tol,
        margin,
        min_eigenvalue,
        residual,
    }
}

fn expect_side(m: &HermitianMatrix, side: usize) -> Result<()> {
    if m.side() != side {
        return Err(Error::ShapeMismatch {
            expected: side,
            found: m.side(),
        });
    }
    Ok(())
}

fn min_eig(m: CMatrix, shape: TensorShape) -> Result<f64> {
    HermitianMatrix::with_tolerance(m, shape, 1e-9)?.min_eigenvalue()
}

impl Witness {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            z1: self.z1.scale(s),
            z2: self.z2.scale(s),
            mode: self.mode,
        }
    }

    /// `Tr*_{Y₂}Z₁ + Tr*_{Y₁}Z₂` on `X⊗Y₁⊗Y₂`.
    pub fn adjoint_sum(&self, d: usize, d1: usize, d2: usize) -> Result<CMatrix> {
        expect_side(&self.z1, d * d1)?;
        expect_side(&self.z2, d * d2)?;
        let dims = [d, d1, d2];
        Ok(embed_identity(self.z1.matrix(), &dims, &[2])? + embed_identity(self.z2.matrix(), &dims, &[1])?)
    }

    /// The pairing `⟨Z₁, J₁⟩ + ⟨Z₂, J₂⟩` (partially transposed Chois in ppt
    /// mode).
    pub fn pairing(&self, f: &Channel, g: &Channel) -> Result<f64> {
        let d = f.d_in();
        let (j1, j2) = match self.mode {
            WitnessMode::Plain => (f.choi().matrix().clone(), g.choi().matrix().clone()),
            WitnessMode::Ppt => (
                ptranspose(f.choi().matrix(), &[d, f.d_out()], 0)?,
                ptranspose(g.choi().matrix(), &[d, g.d_out()], 0)?,
            ),
        };
        expect_side(&self.z1, j1.nrows())?;
        expect_side(&self.z2, j2.nrows())?;
        Ok(inner(self.z1.matrix(), &j1) + inner(self.z2.matrix(), &j2))
    }
}

pub fn verify_witness(w: &Witness, f: &Channel, g: &Channel) -> Result<Verification> {
    if f.d_in() != g.d_in() {
        return Err(Error::DimensionMismatch("channels act on different inputs".into()));
    }
    let (d, d1, d2) = (f.d_in(), f.d_out(), g.d_out());
    let sum = w.adjoint_sum(d, d1, d2)?;
    let lmin = min_eig(sum, TensorShape::new(vec![d, d1, d2])?)?;
    let margin = w.pairing(f, g)?;
    Ok(verdict(margin, lmin, 0.0, 0.0))
}

impl JordanWitness {
    pub fn scaled(&self, s: f64) -> Self {
        Self {
            w1: self.w1.scale(s),
            w2: self.w2.scale(s),
            rho: self.rho.scale(s),
        }
    }
}

/// `⟨W₁ + W₂, J(I)⟩`: the sum of the `W` entries at `(i·d+i, j·d+j)`.
fn pair_with_identity_choi(w: &CMatrix, d: usize) -> f64 {
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            s += w[(i * d + i, j * d + j)].re;
        }
    }
    s
}

pub fn verify_jordan_witness(w: &JordanWitness, f: &Channel, g: &Channel) -> Result<Verification> {
    if f.d_in() != g.d_in() {
        return Err(Error::DimensionMismatch("channels act on different inputs".into()));
    }
    let (d, d1, d2) = (f.d_in(), f.d_out(), g.d_out());
    expect_side(&w.w1, d * d)?;
    expect_side(&w.w2, d * d)?;
    expect_side(&w.rho, d * d1 * d2)?;
    let pulled = LinOp::Pair(Box::new(PairMap::new(f.rep(), g.rep())?)).adjoint(w.rho.matrix())?;
    let dims = [d, d, d];
    let target = embed_identity(w.w1.matrix(), &dims, &[2])? + embed_identity(w.w2.matrix(), &dims, &[1])?;
    let residual = crate::linalg::max_abs(&(pulled - target));
    let lmin = w.rho.min_eigenvalue()?;
    let margin = pair_with_identity_choi(w.w1.matrix(), d) + pair_with_identity_choi(w.w2.matrix(), d);
    Ok(verdict(margin, lmin, residual, JORDAN_RESIDUAL_TOL))
}

impl ExtensionWitness {
    /// `Σ_a Tr*_{others}(Z_a)` on `X⊗Y^{⊗k}`.
    pub fn adjoint_sum(&self, d: usize, dy: usize) -> Result<CMatrix> {
        let k = self.zs.len();
        let mut dims = vec![d];
        dims.extend(std::iter::repeat_n(dy, k));
        let n: usize = dims.iter().product();
        let mut sum = CMatrix::zeros(n, n);
        for (a, z) in self.zs.iter().enumerate() {
            expect_side(z, d * dy)?;
            let traced: Vec<usize> = (1..=k).filter(|&b| b != a + 1).collect();
            sum += embed_identity(z.matrix(), &dims, &traced)?;
        }
        Ok(sum)
    }
}

pub fn verify_extension_witness(w: &ExtensionWitness, f: &Channel) -> Result<Verification> {
    if w.zs.len() < 2 {
        return Err(Error::ParameterOutOfRange("an extension witness needs k ≥ 2 parts".into()));
    }
    let (d, dy) = (f.d_in(), f.d_out());
    let sum = w.adjoint_sum(d, dy)?;
    let n = sum.nrows();
    let lmin = min_eig(sum, TensorShape::single(n))?;
    let margin = w.zs.iter().map(|z| inner(z.matrix(), f.choi().matrix())).sum();
    Ok(verdict(margin, lmin, 0.0, 0.0))
}

pub fn verify_povm_witness(w: &PovmWitness, m: &Povm, n: &Povm) -> Result<Verification> {
    if w.a.len() != m.len() || w.b.len() != n.len() {
        return Err(Error::DimensionMismatch("witness does not match the outcome counts".into()));
    }
    let mut lmin = f64::INFINITY;
    for a in &w.a {
        for b in &w.b {
            lmin = lmin.min(a.add(b)?.min_eigenvalue()?);
        }
    }
    let margin = w.a.iter().zip(m.effects()).map(|(a, e)| a.inner(e)).sum::<f64>()
        + w.b.iter().zip(n.effects()).map(|(b, e)| b.inner(e)).sum::<f64>();
    Ok(verdict(margin, lmin, 0.0, 0.0))
}

/// `Z₁ = Z₂ = I⊗I − (2/(d+1)) Σ E_ij⊗E_ij`, certifying that no channel close
/// to the identity can be broadcast.
pub fn no_broadcast_witness(d: usize) -> Result<Witness> {
    if d < 2 {
        return Err(Error::ParameterOutOfRange(format!("d = {d} (need d ≥ 2)")));
    }
    let c = 2.0 / (d as f64 + 1.0);
    let mut z = CMatrix::identity(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            z[(i * d + i, j * d + j)] -= C64::new(c, 0.0);
        }
    }
    let z = HermitianMatrix::new(z, TensorShape::new(vec![d, d])?)?;
    Ok(Witness {
        z1: z.clone(),
        z2: z,
        mode: WitnessMode::Plain,
    })
}
