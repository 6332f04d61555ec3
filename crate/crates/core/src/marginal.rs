//! Constructive reductions between the state marginal problem and channel
//! compatibility, plus lifting and extraction of joint measurements.

use crate::channels::{check_density, check_projective, Channel, LinearMapRep};
use crate::error::{Error, Result};
use crate::linalg::{
    kron_raw, max_abs, pinv_sqrt, ptrace, sqrt_psd, support_projector, CMatrix, HermitianMatrix,
    TensorShape, C64,
};

/// Marginal consistency tolerance for state pairs and joint states.
pub const MARGINAL_TOL: f64 = 1e-9;

/// Two bipartite states sharing the marginal `σ` on `X`.
#[derive(Clone, Debug, PartialEq)]
pub struct StatePair {
    rho1: HermitianMatrix,
    rho2: HermitianMatrix,
    sigma: HermitianMatrix,
}

impl StatePair {
    /// `rho1` lives on `X⊗Y₁` (`d·d1`), `rho2` on `X⊗Y₂`, `sigma` on `X`.
    pub fn new(rho1: HermitianMatrix, rho2: HermitianMatrix, sigma: HermitianMatrix, d1: usize, d2: usize) -> Result<Self> {
        let d = sigma.side();
        for (rho, dy) in [(&rho1, d1), (&rho2, d2)] {
            if rho.side() != d * dy {
                return Err(Error::ShapeMismatch {
                    expected: d * dy,
                    found: rho.side(),
                });
            }
            check_density(rho)?;
        }
        check_density(&sigma)?;
        let rho1 = rho1.reshaped(TensorShape::new(vec![d, d1])?)?;
        let rho2 = rho2.reshaped(TensorShape::new(vec![d, d2])?)?;
        let sigma = sigma.reshaped(TensorShape::single(d))?;
        for rho in [&rho1, &rho2] {
            let deviation = max_abs(&(ptrace(rho.matrix(), rho.shape().factors(), &[1])? - sigma.matrix()));
            if deviation > MARGINAL_TOL {
                return Err(Error::MarginalMismatch { deviation });
            }
        }
        Ok(Self { rho1, rho2, sigma })
    }

    pub fn rho1(&self) -> &HermitianMatrix {
        &self.rho1
    }

    pub fn rho2(&self) -> &HermitianMatrix {
        &self.rho2
    }

    pub fn sigma(&self) -> &HermitianMatrix {
        &self.sigma
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let f1 = self.rho1.shape().factors();
        let f2 = self.rho2.shape().factors();
        (f1[0], f1[1], f2[1])
    }
}

/// `(S⊗I)·M·(S⊗I)` for `S` on the first factor of side `d`.
fn conj_first(s: &CMatrix, m: &CMatrix, rest: usize) -> CMatrix {
    let k = kron_raw(s, &CMatrix::identity(rest, rest));
    &k * m * &k
}

/// `(σ^{−1/2}⊗I)ρ(σ^{−1/2}⊗I) + (I − Π_σ)⊗I/dy`: the channel with Choi
/// state `ρ` relative to `σ`, completed outside the support of `σ`.
fn normalize_state(rho: &CMatrix, sigma: &HermitianMatrix, dy: usize) -> Result<CMatrix> {
    let d = sigma.side();
    let s = pinv_sqrt(sigma)?;
    let pi = support_projector(sigma)?;
    let comp = (CMatrix::identity(d, d) - pi.matrix()) * C64::new(1.0 / dy as f64, 0.0);
    Ok(conj_first(s.matrix(), rho, dy) + kron_raw(&comp, &CMatrix::identity(dy, dy)))
}

/// The two channels whose Choi matrices reproduce the states relative to `σ`.
pub fn states_to_channels(sp: &StatePair) -> Result<(Channel, Channel)> {
    let (d, d1, d2) = sp.dims();
    let mut out = Vec::with_capacity(2);
    for (rho, dy) in [(&sp.rho1, d1), (&sp.rho2, d2)] {
        let j = normalize_state(rho.matrix(), &sp.sigma, dy)?;
        let choi = HermitianMatrix::with_tolerance(j, TensorShape::new(vec![d, dy])?, 1e-10)?;
        out.push(Channel::with_tolerance(LinearMapRep::new(choi, d, dy)?, 1e-8)?);
    }
    let g = out.pop().expect("two channels");
    let f = out.pop().expect("two channels");
    Ok((f, g))
}

/// `ρ = (σ^{1/2}⊗I⊗I)·J(Φ)·(σ^{1/2}⊗I⊗I)` for a compatibilizer with output
/// shape `[d1, d2]`.
pub fn joint_state_from_compatibilizer(comp: &Channel, sigma: &HermitianMatrix) -> Result<HermitianMatrix> {
    let d = comp.d_in();
    if sigma.side() != d {
        return Err(Error::ShapeMismatch {
            expected: d,
            found: sigma.side(),
        });
    }
    check_density(sigma)?;
    let out = comp.output().factors().to_vec();
    if out.len() != 2 {
        return Err(Error::DimensionMismatch("compatibilizer needs a two-factor output".into()));
    }
    let s = sqrt_psd(sigma)?;
    let rho = conj_first(s.matrix(), comp.choi().matrix(), out[0] * out[1]);
    HermitianMatrix::with_tolerance(rho, TensorShape::new(vec![d, out[0], out[1]])?, 1e-10)
}

/// Inverse of [`joint_state_from_compatibilizer`]; `rho` lives on
/// `X⊗Y₁⊗Y₂` with `Tr_{Y₁Y₂}ρ = σ`.
pub fn compatibilizer_from_joint_state(rho: &HermitianMatrix, sigma: &HermitianMatrix, d1: usize, d2: usize) -> Result<Channel> {
    let d = sigma.side();
    if rho.side() != d * d1 * d2 {
        return Err(Error::ShapeMismatch {
            expected: d * d1 * d2,
            found: rho.side(),
        });
    }
    check_density(rho)?;
    check_density(sigma)?;
    let deviation = max_abs(&(ptrace(rho.matrix(), &[d, d1, d2], &[1, 2])? - sigma.matrix()));
    if deviation > MARGINAL_TOL {
        return Err(Error::MarginalMismatch { deviation });
    }
    let j = normalize_state(rho.matrix(), sigma, d1 * d2)?;
    let input = TensorShape::single(d);
    let output = TensorShape::new(vec![d1, d2])?;
    let choi = HermitianMatrix::with_tolerance(j, input.concat(&output), 1e-10)?;
    Channel::with_tolerance(LinearMapRep::with_shapes(choi, input, output)?, 1e-8)
}

/// Row sums `Σ_j P_ij` and column sums `Σ_i P_ij` of a joint measurement.
pub fn joint_marginals(p: &[Vec<HermitianMatrix>]) -> Result<(Vec<CMatrix>, Vec<CMatrix>)> {
    let rows = p.len();
    let cols = p.first().map_or(0, Vec::len);
    if rows == 0 || cols == 0 || p.iter().any(|r| r.len() != cols) {
        return Err(Error::NotPovm("joint measurement must be a non-empty rectangular array".into()));
    }
    let d = p[0][0].side();
    let mut row_sums = vec![CMatrix::zeros(d, d); rows];
    let mut col_sums = vec![CMatrix::zeros(d, d); cols];
    for (i, row) in p.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            if e.side() != d {
                return Err(Error::NotPovm(format!("effect ({i},{j}) has side {}", e.side())));
            }
            row_sums[i] += e.matrix();
            col_sums[j] += e.matrix();
        }
    }
    Ok((row_sums, col_sums))
}

/// Checks that `P` is a POVM (PSD effects summing to `I`) within `tol`.
fn check_joint(p: &[Vec<HermitianMatrix>], tol: f64) -> Result<usize> {
    let (rows, _) = joint_marginals(p)?;
    let d = p[0][0].side();
    let total: CMatrix = rows.iter().fold(CMatrix::zeros(d, d), |acc, r| acc + r);
    let dev = max_abs(&(total - CMatrix::identity(d, d)));
    if dev > tol {
        return Err(Error::NotPovm(format!("effects sum to I only within {dev:e}")));
    }
    for (i, row) in p.iter().enumerate() {
        for (j, e) in row.iter().enumerate() {
            let lmin = e.min_eigenvalue()?;
            if lmin < -tol {
                return Err(Error::NotPovm(format!("effect ({i},{j}) has eigenvalue {lmin:e}")));
            }
        }
    }
    Ok(d)
}

/// `Φ(X) = Σ_ij ⟨P_ij, X⟩ ρ_i ⊗ σ_j`: a compatibilizer of the two
/// measure-and-prepare channels generated by the marginals of `P`. `tol`
/// bounds the POVM defects accepted in `P`.
pub fn lift_povm_compatibilizer(
    p: &[Vec<HermitianMatrix>],
    preps1: &[HermitianMatrix],
    preps2: &[HermitianMatrix],
    tol: f64,
) -> Result<Channel> {
    let d = check_joint(p, tol)?;
    if preps1.len() != p.len() || preps2.len() != p[0].len() {
        return Err(Error::DimensionMismatch(format!(
            "{}×{} joint measurement with {} and {} preparations",
            p.len(),
            p[0].len(),
            preps1.len(),
            preps2.len()
        )));
    }
    for r in preps1.iter().chain(preps2) {
        check_density(r)?;
    }
    let (d1, d2) = (preps1[0].side(), preps2[0].side());
    if preps1.iter().any(|r| r.side() != d1) || preps2.iter().any(|r| r.side() != d2) {
        return Err(Error::DimensionMismatch("preparations of different sizes".into()));
    }
    let mut j = CMatrix::zeros(d * d1 * d2, d * d1 * d2);
    for (i, row) in p.iter().enumerate() {
        for (k, e) in row.iter().enumerate() {
            let out = kron_raw(preps1[i].matrix(), preps2[k].matrix());
            j += kron_raw(&e.matrix().transpose(), &out);
        }
    }
    let input = TensorShape::single(d);
    let output = TensorShape::new(vec![d1, d2])?;
    let choi = HermitianMatrix::with_tolerance(j, input.concat(&output), 1e-10)?;
    Channel::with_tolerance(LinearMapRep::with_shapes(choi, input, output)?, tol.max(1e-10))
}

/// Appends `I − ΣΠ_i` when the family does not resolve the identity.
fn complete_family(family: &[HermitianMatrix], d: usize) -> Result<Vec<HermitianMatrix>> {
    if family.iter().any(|p| p.side() != d) {
        return Err(Error::DimensionMismatch(format!("projectors must act on dimension {d}")));
    }
    check_projective(family)?;
    let mut rest = CMatrix::identity(d, d);
    for p in family {
        rest -= p.matrix();
    }
    let mut out = family.to_vec();
    if max_abs(&rest) > 1e-9 {
        out.push(HermitianMatrix::from_matrix(rest)?);
        check_projective(&out)?;
    }
    Ok(out)
}

/// `P_ij = Φ*(Π_i ⊗ Π'_j)` for orthogonal projector families on the two
/// outputs of `comp`. Families that do not sum to `I` are padded with the
/// complementary projector, which then contributes the last row/column.
pub fn extract_povm_compatibilizer(
    comp: &Channel,
    proj1: &[HermitianMatrix],
    proj2: &[HermitianMatrix],
) -> Result<Vec<Vec<HermitianMatrix>>> {
    let out = comp.output().factors();
    if out.len() != 2 {
        return Err(Error::DimensionMismatch("compatibilizer needs a two-factor output".into()));
    }
    let p1 = complete_family(proj1, out[0])?;
    let p2 = complete_family(proj2, out[1])?;
    let mut joint = Vec::with_capacity(p1.len());
    for a in &p1 {
        let mut row = Vec::with_capacity(p2.len());
        for b in &p2 {
            let e = comp.rep().adjoint_apply_raw(&kron_raw(a.matrix(), b.matrix()))?;
            row.push(HermitianMatrix::with_tolerance(e, TensorShape::single(comp.d_in()), 1e-10)?);
        }
        joint.push(row);
    }
    Ok(joint)
}

/// Branches `Φ_i(X) = (I⊗⟨i|)·Φ(X)·(I⊗|i⟩)` of a channel into `Y⊗Z` whose
/// second factor is an `m`-level classical register.
pub fn instrument_from_compatibilizer(comp: &Channel, m: usize) -> Result<Vec<LinearMapRep>> {
    let out = comp.output().factors();
    if out.len() != 2 || out[1] != m {
        return Err(Error::DimensionMismatch(format!(
            "expected an output shape [dy, {m}], found {out:?}"
        )));
    }
    let (d, dy) = (comp.d_in(), out[0]);
    let j = comp.choi().matrix();
    let mut maps = Vec::with_capacity(m);
    for i in 0..m {
        // Rows/columns of J with register index i, in X⊗Y order.
        let idx: Vec<usize> = (0..d * dy).map(|r| r * m + i).collect();
        let block = CMatrix::from_fn(d * dy, d * dy, |r, c| j[(idx[r], idx[c])]);
        let choi = HermitianMatrix::new(block, TensorShape::new(vec![d, dy])?)?;
        maps.push(LinearMapRep::new(choi, d, dy)?);
    }
    Ok(maps)
}

/// Effect `M_i = Tr_Y(J(Φ_i))ᵀ` measured by an instrument branch.
pub fn branch_effect(branch: &LinearMapRep) -> Result<HermitianMatrix> {
    let t = ptrace(branch.choi().matrix(), &[branch.d_in(), branch.d_out()], &[1])?;
    HermitianMatrix::new(t.transpose(), TensorShape::single(branch.d_in()))
}

/// `Tr_{Y₂}` and `Tr_{Y₁}` of a joint state on `X⊗Y₁⊗Y₂`.
pub fn joint_state_marginals(rho: &HermitianMatrix) -> Result<(HermitianMatrix, HermitianMatrix)> {
    let f = rho.shape().factors().to_vec();
    if f.len() != 3 {
        return Err(Error::DimensionMismatch("joint state needs three factors".into()));
    }
    let m1 = ptrace(rho.matrix(), &f, &[2])?;
    let m2 = ptrace(rho.matrix(), &f, &[1])?;
    Ok((
        HermitianMatrix::new(m1, TensorShape::new(vec![f[0], f[1]])?)?,
        HermitianMatrix::new(m2, TensorShape::new(vec![f[0], f[2]])?)?,
    ))
}
