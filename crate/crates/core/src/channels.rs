//! Linear maps and channels in the Choi representation.
//!
//! `J(Φ) = Σ_ij E_ij ⊗ Φ(E_ij)` with the input factor first, so that
//! `J[(i·d_out + a), (j·d_out + b)] = Φ(E_ij)[a, b]`.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{
    self, coords_to_herm, eigh, herm_basis, herm_to_coords_into, hermitian_part, max_abs, ptrace,
    ptranspose, unit, CMatrix, HermitianMatrix, TensorShape, C64,
};

/// Eigenvalue slack for complete positivity.
pub const CP_TOL: f64 = 1e-8;
/// Marginal deviation allowed for trace preservation and unitality.
pub const TP_TOL: f64 = 1e-8;
/// Tolerance for POVM, PVM and density-matrix invariants.
pub const STATE_TOL: f64 = 1e-10;
/// Largest condition number accepted by [`invert_map`].
pub const MAX_CONDITION: f64 = 1e12;

/// A Hermitian-preserving linear map `L(X) → L(Y)` stored as its Choi
/// matrix. Input and output spaces may themselves be tensor products.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearMapRep {
    input: TensorShape,
    output: TensorShape,
    choi: HermitianMatrix,
}

impl LinearMapRep {
    pub fn new(choi: HermitianMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        Self::with_shapes(choi, TensorShape::single(d_in), TensorShape::single(d_out))
    }

    pub fn with_shapes(choi: HermitianMatrix, input: TensorShape, output: TensorShape) -> Result<Self> {
        let side = input.dim() * output.dim();
        if choi.side() != side {
            return Err(Error::ShapeMismatch {
                expected: side,
                found: choi.side(),
            });
        }
        let choi = choi.reshaped(input.concat(&output))?;
        Ok(Self {
            input,
            output,
            choi,
        })
    }

    /// Builds the Choi matrix from the action on the matrix units.
    pub fn from_action<F>(input: TensorShape, output: TensorShape, f: F) -> Result<Self>
    where
        F: Fn(&CMatrix) -> CMatrix,
    {
        let (di, dout) = (input.dim(), output.dim());
        let mut j = CMatrix::zeros(di * dout, di * dout);
        for a in 0..di {
            for b in 0..di {
                let img = f(&unit(di, a, b));
                if img.nrows() != dout || img.ncols() != dout {
                    return Err(Error::ShapeMismatch {
                        expected: dout,
                        found: img.nrows(),
                    });
                }
                j.view_mut((a * dout, b * dout), (dout, dout)).copy_from(&img);
            }
        }
        let choi = HermitianMatrix::with_tolerance(j, input.concat(&output), 1e-10)?;
        Ok(Self {
            input,
            output,
            choi,
        })
    }

    pub fn d_in(&self) -> usize {
        self.input.dim()
    }

    pub fn d_out(&self) -> usize {
        self.output.dim()
    }

    pub fn input(&self) -> &TensorShape {
        &self.input
    }

    pub fn output(&self) -> &TensorShape {
        &self.output
    }

    pub fn choi(&self) -> &HermitianMatrix {
        &self.choi
    }

    /// Same Choi matrix with a different factorization of the output space.
    pub fn with_output_shape(&self, output: TensorShape) -> Result<Self> {
        Self::with_shapes(self.choi.clone(), self.input.clone(), output)
    }

    /// `Φ(X)` for an arbitrary (not necessarily Hermitian) square `X`.
    pub fn apply_raw(&self, x: &CMatrix) -> Result<CMatrix> {
        let (di, dout) = (self.d_in(), self.d_out());
        if x.nrows() != di || x.ncols() != di {
            return Err(Error::ShapeMismatch {
                expected: di,
                found: x.nrows(),
            });
        }
        let j = self.choi.matrix();
        let mut y = CMatrix::zeros(dout, dout);
        for a in 0..di {
            for b in 0..di {
                let c = x[(a, b)];
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                y += j.view((a * dout, b * dout), (dout, dout)) * c;
            }
        }
        Ok(y)
    }

    /// `Φ*(Y) = (Tr_Y((I⊗Y)·J))ᵀ`, the Hilbert–Schmidt adjoint.
    pub fn adjoint_apply_raw(&self, y: &CMatrix) -> Result<CMatrix> {
        let (di, dout) = (self.d_in(), self.d_out());
        if y.nrows() != dout || y.ncols() != dout {
            return Err(Error::ShapeMismatch {
                expected: dout,
                found: y.nrows(),
            });
        }
        let j = self.choi.matrix();
        // Entry (b, a) of the result is Tr(Y · J_block(a, b)).
        Ok(CMatrix::from_fn(di, di, |b, a| {
            let block = j.view((a * dout, b * dout), (dout, dout));
            let mut s = C64::new(0.0, 0.0);
            for r in 0..dout {
                for c in 0..dout {
                    s += y[(r, c)] * block[(c, r)];
                }
            }
            s
        }))
    }

    /// The adjoint map `Φ*: L(Y) → L(X)`.
    pub fn adjoint(&self) -> LinearMapRep {
        LinearMapRep::from_action(self.output.clone(), self.input.clone(), |y| {
            self.adjoint_apply_raw(y).expect("shape fixed by construction")
        })
        .expect("adjoint of a Hermitian-preserving map is Hermitian preserving")
    }

    /// Real-linear combination `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &LinearMapRep, b: f64) -> Result<LinearMapRep> {
        if self.d_in() != other.d_in() || self.d_out() != other.d_out() {
            return Err(Error::DimensionMismatch("maps act between different spaces".into()));
        }
        let choi = self.choi.scale(a).add(&other.choi.scale(b))?;
        Ok(Self {
            input: self.input.clone(),
            output: self.output.clone(),
            choi,
        })
    }

    pub fn scale(&self, a: f64) -> LinearMapRep {
        Self {
            input: self.input.clone(),
            output: self.output.clone(),
            choi: self.choi.scale(a),
        }
    }

    /// The map whose Choi matrix is `J^{T_X}` (partial transpose on the
    /// input factor). For a channel this is again trace preserving.
    pub fn input_transposed(&self) -> LinearMapRep {
        let m = ptranspose(self.choi.matrix(), &[self.d_in(), self.d_out()], 0).expect("two factors");
        let shape = self.choi.shape().clone();
        Self {
            input: self.input.clone(),
            output: self.output.clone(),
            choi: HermitianMatrix::from_parts_unchecked(m, shape),
        }
    }

    pub fn validate(&self) -> ValidationReport {
        validate(self)
    }
}

/// `Φ(X)` for Hermitian `X`.
pub fn apply(map: &LinearMapRep, x: &HermitianMatrix) -> Result<HermitianMatrix> {
    let y = map.apply_raw(x.matrix())?;
    HermitianMatrix::new(y, map.output.clone())
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidationReport {
    pub cp: bool,
    pub tp: bool,
    pub unital: bool,
    /// Entanglement breaking, decided exactly via PPT; only for qubit maps.
    pub eb_2x2: Option<bool>,
    pub min_eigenvalue: f64,
    pub tp_deviation: f64,
    pub unital_deviation: f64,
}

pub fn validate(map: &LinearMapRep) -> ValidationReport {
    let (di, dout) = (map.d_in(), map.d_out());
    let dims = [di, dout];
    let j = map.choi.matrix();
    let min_eigenvalue = eigh(j).map(|(v, _)| v[0]).unwrap_or(f64::NEG_INFINITY);
    let tr_out = ptrace(j, &dims, &[1]).expect("two factors");
    let tr_in = ptrace(j, &dims, &[0]).expect("two factors");
    let tp_deviation = max_abs(&(tr_out - CMatrix::identity(di, di)));
    let unital_deviation = max_abs(&(tr_in - CMatrix::identity(dout, dout)));
    let cp = min_eigenvalue >= -CP_TOL;
    let eb_2x2 = (di == 2 && dout == 2).then(|| {
        let pt = ptranspose(j, &dims, 0).expect("two factors");
        let pt_min = eigh(&pt).map(|(v, _)| v[0]).unwrap_or(f64::NEG_INFINITY);
        cp && pt_min >= -CP_TOL
    });
    ValidationReport {
        cp,
        tp: tp_deviation <= TP_TOL,
        unital: unital_deviation <= TP_TOL,
        eb_2x2,
        min_eigenvalue,
        tp_deviation,
        unital_deviation,
    }
}

/// A completely positive, trace-preserving map.
#[derive(Clone, Debug, PartialEq)]
pub struct Channel {
    rep: LinearMapRep,
}

impl Channel {
    pub fn new(rep: LinearMapRep) -> Result<Self> {
        let r = validate(&rep);
        if !r.cp {
            return Err(Error::NotChannel(format!(
                "Choi matrix has eigenvalue {:e}",
                r.min_eigenvalue
            )));
        }
        if !r.tp {
            return Err(Error::NotChannel(format!(
                "not trace preserving (deviation {:e})",
                r.tp_deviation
            )));
        }
        Ok(Self { rep })
    }

    /// Like [`Channel::new`] with an explicit slack for both the Choi
    /// eigenvalues and the trace condition; used for solver output.
    pub fn with_tolerance(rep: LinearMapRep, tol: f64) -> Result<Self> {
        let r = validate(&rep);
        if r.min_eigenvalue < -tol {
            return Err(Error::NotChannel(format!(
                "Choi matrix has eigenvalue {:e}",
                r.min_eigenvalue
            )));
        }
        if r.tp_deviation > tol {
            return Err(Error::NotChannel(format!(
                "not trace preserving (deviation {:e})",
                r.tp_deviation
            )));
        }
        Ok(Self { rep })
    }

    pub fn from_choi(choi: HermitianMatrix, d_in: usize, d_out: usize) -> Result<Self> {
        Self::new(LinearMapRep::new(choi, d_in, d_out)?)
    }

    pub fn rep(&self) -> &LinearMapRep {
        &self.rep
    }

    pub fn into_rep(self) -> LinearMapRep {
        self.rep
    }

    pub fn choi(&self) -> &HermitianMatrix {
        &self.rep.choi
    }

    pub fn d_in(&self) -> usize {
        self.rep.d_in()
    }

    pub fn d_out(&self) -> usize {
        self.rep.d_out()
    }

    pub fn output(&self) -> &TensorShape {
        self.rep.output()
    }

    pub fn apply(&self, x: &HermitianMatrix) -> Result<HermitianMatrix> {
        apply(&self.rep, x)
    }

    /// Declares a factorization of the output space, e.g. `[d1, d2]` for a
    /// compatibilizer.
    pub fn with_output_shape(&self, output: TensorShape) -> Result<Self> {
        Ok(Self {
            rep: self.rep.with_output_shape(output)?,
        })
    }

    /// Convex combination `λ·self + (1−λ)·other`.
    pub fn mix(&self, lambda: f64, other: &Channel) -> Result<Channel> {
        Channel::new(self.rep.combine(lambda, &other.rep, 1.0 - lambda)?)
    }
}

impl AsRef<LinearMapRep> for Channel {
    fn as_ref(&self) -> &LinearMapRep {
        &self.rep
    }
}

/// A POVM `{M_i}`: PSD effects summing to the identity.
#[derive(Clone, Debug, PartialEq)]
pub struct Povm {
    effects: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn new(effects: Vec<HermitianMatrix>) -> Result<Self> {
        let first = effects.first().ok_or_else(|| Error::NotPovm("no effects".into()))?;
        let d = first.side();
        let mut sum = CMatrix::zeros(d, d);
        for (i, e) in effects.iter().enumerate() {
            if e.side() != d {
                return Err(Error::NotPovm(format!("effect {i} has side {}", e.side())));
            }
            let lmin = e.min_eigenvalue()?;
            if lmin < -STATE_TOL {
                return Err(Error::NotPovm(format!("effect {i} has eigenvalue {lmin:e}")));
            }
            sum += e.matrix();
        }
        let dev = max_abs(&(sum - CMatrix::identity(d, d)));
        if dev > STATE_TOL {
            return Err(Error::NotPovm(format!("effects sum to I only within {dev:e}")));
        }
        Ok(Self { effects })
    }

    /// Projective measurement; additionally checks `Π_i Π_j = δ_ij Π_i`.
    pub fn projective(effects: Vec<HermitianMatrix>) -> Result<Self> {
        check_projective(&effects)?;
        Self::new(effects).map_err(|e| Error::NotProjective(e.to_string()))
    }

    /// Measurement in the computational basis.
    pub fn computational(d: usize) -> Self {
        let effects = (0..d)
            .map(|i| HermitianMatrix::from_matrix(unit(d, i, i)).unwrap())
            .collect();
        Self { effects }
    }

    pub fn effects(&self) -> &[HermitianMatrix] {
        &self.effects
    }

    pub fn len(&self) -> usize {
        self.effects.len()
    }

    pub fn is_empty(&self) -> bool {
        self.effects.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.effects[0].side()
    }
}

pub(crate) fn check_projective(effects: &[HermitianMatrix]) -> Result<()> {
    for (i, p) in effects.iter().enumerate() {
        for (j, q) in effects.iter().enumerate() {
            if p.side() != q.side() {
                return Err(Error::NotProjective("effects of different sizes".into()));
            }
            let prod = p.matrix() * q.matrix();
            let want = if i == j { p.matrix().clone() } else { CMatrix::zeros(p.side(), p.side()) };
            let dev = max_abs(&(prod - want));
            if dev > STATE_TOL.max(1e-9) {
                return Err(Error::NotProjective(format!(
                    "Π_{i}Π_{j} deviates by {dev:e}"
                )));
            }
        }
    }
    Ok(())
}

/// Checks the density-matrix invariants (PSD, unit trace).
pub fn check_density(rho: &HermitianMatrix) -> Result<()> {
    let t = rho.trace();
    if (t - 1.0).abs() > STATE_TOL {
        return Err(Error::NotDensity(format!("trace {t}")));
    }
    let lmin = rho.min_eigenvalue()?;
    if lmin < -STATE_TOL {
        return Err(Error::NotDensity(format!("eigenvalue {lmin:e}")));
    }
    Ok(())
}

/// Generating data of a measure-and-prepare channel
/// `Φ(X) = Σ_i ⟨M_i, X⟩ ρ_i`.
#[derive(Clone, Debug, PartialEq)]
pub struct MeasurePrepare {
    povm: Povm,
    preps: Vec<HermitianMatrix>,
}

impl MeasurePrepare {
    pub fn new(povm: Povm, preps: Vec<HermitianMatrix>) -> Result<Self> {
        if povm.len() != preps.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} effects but {} preparations",
                povm.len(),
                preps.len()
            )));
        }
        let dy = preps[0].side();
        for p in &preps {
            if p.side() != dy {
                return Err(Error::DimensionMismatch("preparations of different sizes".into()));
            }
            check_density(p)?;
        }
        Ok(Self { povm, preps })
    }

    pub fn povm(&self) -> &Povm {
        &self.povm
    }

    pub fn preps(&self) -> &[HermitianMatrix] {
        &self.preps
    }

    /// Recovers a generating decomposition from the Choi matrix of a qubit
    /// channel whose Choi matrix is PPT (hence separable).
    pub fn from_qubit_channel(ch: &Channel) -> Result<Self> {
        if ch.d_in() != 2 || ch.d_out() != 2 {
            return Err(Error::DimensionMismatch("separable decomposition needs a qubit channel".into()));
        }
        let products = separable_decomposition_2x2(ch.choi().matrix())?;
        let mut effects = Vec::new();
        let mut preps = Vec::new();
        for (a, b) in products {
            // J = Σ A_k ⊗ B_k with A_k = Mₖᵀ·Tr(B_k), ρ_k = B_k / Tr(B_k).
            let tb = b.trace().re;
            let m = a.transpose() * C64::new(tb, 0.0);
            effects.push(HermitianMatrix::from_matrix(hermitian_part(&m))?);
            preps.push(HermitianMatrix::from_matrix(hermitian_part(&(b / C64::new(tb, 0.0))))?);
        }
        Self::new(Povm::new(effects)?, preps)
    }
}

/// `J = Σ_i M_iᵀ ⊗ ρ_i`.
pub fn measure_prepare_channel(mp: &MeasurePrepare) -> Result<Channel> {
    let d_in = mp.povm.dim();
    let d_out = mp.preps[0].side();
    let mut j = CMatrix::zeros(d_in * d_out, d_in * d_out);
    for (m, r) in mp.povm.effects.iter().zip(&mp.preps) {
        j += m.matrix().transpose().kronecker(r.matrix());
    }
    Channel::from_choi(HermitianMatrix::from_matrix(j)?, d_in, d_out)
}

/// Named channels.
#[derive(Clone, Debug, PartialEq)]
pub enum StandardKind {
    Identity,
    Dephasing,
    Depolarizing,
    /// `Ω_q = q·Ω + (1−q)·I`.
    PartialDepolarizing(f64),
    /// `Ξ_{p,q} = (1−p−q)·I + p·Δ + q·Ω`.
    Xi { p: f64, q: f64 },
    Unitary(CMatrix),
    /// `X ↦ Tr(X)·ρ`.
    Constant(HermitianMatrix),
    /// `X ↦ Σ Π_i X Π_i`.
    Pinching(Vec<HermitianMatrix>),
    /// `X ↦ Σ ⟨M_i, X⟩ E_ii`.
    Measurement(Povm),
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) || !v.is_finite() {
        return Err(Error::ParameterOutOfRange(format!("{name} = {v} not in [0, 1]")));
    }
    Ok(())
}

pub fn standard_channel(kind: &StandardKind, d_in: usize) -> Result<Channel> {
    if d_in == 0 {
        return Err(Error::InvalidShape);
    }
    let d = d_in;
    let sq = |n| TensorShape::single(n);
    let dephase = |x: &CMatrix| CMatrix::from_fn(d, d, |i, j| if i == j { x[(i, i)] } else { C64::new(0.0, 0.0) });
    let depol = |x: &CMatrix| CMatrix::identity(d, d) * (x.trace() / d as f64);
    let rep = match kind {
        StandardKind::Identity => LinearMapRep::from_action(sq(d), sq(d), |x| x.clone())?,
        StandardKind::Dephasing => LinearMapRep::from_action(sq(d), sq(d), dephase)?,
        StandardKind::Depolarizing => LinearMapRep::from_action(sq(d), sq(d), depol)?,
        StandardKind::PartialDepolarizing(q) => {
            check_unit_interval("q", *q)?;
            let q = *q;
            LinearMapRep::from_action(sq(d), sq(d), |x| depol(x) * C64::new(q, 0.0) + x * C64::new(1.0 - q, 0.0))?
        }
        StandardKind::Xi { p, q } => {
            check_unit_interval("p", *p)?;
            check_unit_interval("q", *q)?;
            if p + q > 1.0 + 1e-12 {
                return Err(Error::ParameterOutOfRange(format!("p + q = {} > 1", p + q)));
            }
            let (p, q) = (*p, *q);
            let r = (1.0 - p - q).max(0.0);
            LinearMapRep::from_action(sq(d), sq(d), |x| {
                x * C64::new(r, 0.0) + dephase(x) * C64::new(p, 0.0) + depol(x) * C64::new(q, 0.0)
            })?
        }
        StandardKind::Unitary(u) => {
            if u.nrows() != d || u.ncols() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    found: u.nrows(),
                });
            }
            let deviation = max_abs(&(u.adjoint() * u - CMatrix::identity(d, d)));
            if deviation > 1e-10 {
                return Err(Error::NotUnitary { deviation });
            }
            LinearMapRep::from_action(sq(d), sq(d), |x| u * x * u.adjoint())?
        }
        StandardKind::Constant(rho) => {
            check_density(rho)?;
            let n = rho.side();
            LinearMapRep::from_action(sq(d), sq(n), |x| rho.matrix() * x.trace())?
        }
        StandardKind::Pinching(pvm) => {
            let pvm = Povm::projective(pvm.clone())?;
            if pvm.dim() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    found: pvm.dim(),
                });
            }
            LinearMapRep::from_action(sq(d), sq(d), |x| {
                pvm.effects
                    .iter()
                    .fold(CMatrix::zeros(d, d), |acc, p| acc + p.matrix() * x * p.matrix())
            })?
        }
        StandardKind::Measurement(povm) => {
            if povm.dim() != d {
                return Err(Error::ShapeMismatch {
                    expected: d,
                    found: povm.dim(),
                });
            }
            let m = povm.len();
            LinearMapRep::from_action(sq(d), sq(m), |x| {
                let mut y = CMatrix::zeros(m, m);
                for (i, e) in povm.effects.iter().enumerate() {
                    // ⟨M, X⟩ = Tr(M X) for Hermitian M, extended linearly.
                    y[(i, i)] = (e.matrix() * x).trace();
                }
                y
            })?
        }
    };
    Channel::new(rep)
}

/// `g ∘ f`.
pub fn compose(g: &LinearMapRep, f: &LinearMapRep) -> Result<LinearMapRep> {
    if g.d_in() != f.d_out() {
        return Err(Error::DimensionMismatch(format!(
            "cannot compose: inner dimensions {} and {}",
            f.d_out(),
            g.d_in()
        )));
    }
    LinearMapRep::from_action(f.input.clone(), g.output.clone(), |x| {
        let y = f.apply_raw(x).expect("checked");
        g.apply_raw(&y).expect("checked")
    })
}

/// `f ⊗ g: L(X₁⊗X₂) → L(Y₁⊗Y₂)`.
pub fn tensor(f: &LinearMapRep, g: &LinearMapRep) -> Result<LinearMapRep> {
    let j = linalg::kron_raw(f.choi.matrix(), g.choi.matrix());
    let dims = [f.d_in(), f.d_out(), g.d_in(), g.d_out()];
    let m = linalg::permute(&j, &dims, &[0, 2, 1, 3])?;
    let input = f.input.concat(&g.input);
    let output = f.output.concat(&g.output);
    let choi = HermitianMatrix::new(m, input.concat(&output))?;
    Ok(LinearMapRep {
        input,
        output,
        choi,
    })
}

/// Marginal of a channel into `Y₁⊗Y₂`: `keep = 1` traces out `Y₂`.
pub fn channel_marginal(phi: &Channel, keep: usize) -> Result<Channel> {
    let out = phi.output().factors();
    if out.len() != 2 {
        return Err(Error::DimensionMismatch(
            "marginal needs an output shape with two factors".into(),
        ));
    }
    let (traced, kept_dim) = match keep {
        1 => (2, out[0]),
        2 => (1, out[1]),
        _ => {
            return Err(Error::ParameterOutOfRange(format!("keep = {keep} must be 1 or 2")));
        }
    };
    let d_in = phi.d_in();
    let m = ptrace(phi.choi().matrix(), &[d_in, out[0], out[1]], &[traced])?;
    Channel::from_choi(HermitianMatrix::new(m, TensorShape::new(vec![d_in, kept_dim])?)?, d_in, kept_dim)
}

/// Checks that `comp` (output shape `[d1, d2]`) is a channel whose marginals
/// are `f` and `g` within `tol`. Returns the largest marginal deviation.
pub fn check_compatibilizer(f: &Channel, g: &Channel, comp: &Channel, tol: f64) -> Result<f64> {
    let (d1, d2) = (f.d_out(), g.d_out());
    if comp.d_in() != f.d_in() || comp.d_in() != g.d_in() || comp.d_out() != d1 * d2 {
        return Err(Error::DimensionMismatch("compatibilizer does not match the pair".into()));
    }
    let dims = [comp.d_in(), d1, d2];
    let j = comp.choi().matrix();
    let m1 = ptrace(j, &dims, &[2])?;
    let m2 = ptrace(j, &dims, &[1])?;
    let deviation = max_abs(&(m1 - f.choi().matrix())).max(max_abs(&(m2 - g.choi().matrix())));
    if deviation > tol {
        return Err(Error::MarginalMismatch { deviation });
    }
    let lmin = comp.choi().min_eigenvalue()?;
    if lmin < -tol {
        return Err(Error::NotCompatibilizer(format!("Choi eigenvalue {lmin:e}")));
    }
    Ok(deviation)
}

/// Real matrix of a Hermitian-preserving map on the real Hermitian bases.
fn real_matrix(f: &LinearMapRep) -> DMatrix<f64> {
    let (di, dout) = (f.d_in(), f.d_out());
    let mut m = DMatrix::zeros(dout * dout, di * di);
    let mut col = vec![0.0; dout * dout];
    for l in 0..di * di {
        let img = f.apply_raw(&herm_basis(di, l)).expect("shape fixed");
        herm_to_coords_into(&img, &mut col);
        for (k, v) in col.iter().enumerate() {
            m[(k, l)] = *v;
        }
    }
    m
}

/// Inverse of an invertible Hermitian-preserving map.
pub fn invert_map(f: &LinearMapRep) -> Result<LinearMapRep> {
    let (di, dout) = (f.d_in(), f.d_out());
    if di != dout {
        return Err(Error::DimensionMismatch(format!(
            "map {di} → {dout} cannot be invertible"
        )));
    }
    let m = real_matrix(f);
    let sv = m.clone().svd(false, false).singular_values;
    let smax = sv.max();
    let smin = sv.min();
    if smin <= 0.0 || smax / smin > MAX_CONDITION {
        return Err(Error::SingularMap {
            smallest_singular_value: smin,
        });
    }
    let inv = m
        .full_piv_lu()
        .try_inverse()
        .ok_or(Error::SingularMap {
            smallest_singular_value: smin,
        })?;
    let d = di;
    let apply_inv = |h: &CMatrix| {
        let mut c = vec![0.0; d * d];
        herm_to_coords_into(h, &mut c);
        let v = &inv * nalgebra::DVector::from_vec(c);
        coords_to_herm(v.as_slice(), d)
    };
    LinearMapRep::from_action(f.output.clone(), f.input.clone(), |x| {
        // Split into Hermitian parts X = H₁ + iH₂ and extend linearly.
        let h1 = hermitian_part(x);
        let h2 = (x - x.adjoint()) * C64::new(0.0, -0.5);
        apply_inv(&h1) + apply_inv(&h2) * C64::new(0.0, 1.0)
    })
}

/// Product-vector decomposition `J = Σ_k |a_k⟩⟨a_k| ⊗ |b_k⟩⟨b_k|` of a PPT
/// two-qubit operator, returned as the rank-one factors `(A_k, B_k)`.
///
/// Follows Wootters' construction: bring the eigen-decomposition into a
/// form where the spin-flip bilinear form is diagonal, then mix with phases
/// chosen so every resulting vector has zero preconcurrence.
pub fn separable_decomposition_2x2(j: &CMatrix) -> Result<Vec<(CMatrix, CMatrix)>> {
    if j.nrows() != 4 {
        return Err(Error::DimensionMismatch("expected a 4×4 operator".into()));
    }
    let (vals, vecs) = eigh(j)?;
    let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
    if vals[0] < -1e-10 * scale {
        return Err(Error::NotSeparable(format!("operator has eigenvalue {:e}", vals[0])));
    }
    // Columns v_k = √λ_k·e_k.
    let mut v = vecs.clone();
    for k in 0..4 {
        let s = vals[k].max(0.0).sqrt();
        for i in 0..4 {
            v[(i, k)] *= s;
        }
    }
    // σ_y ⊗ σ_y.
    let mut flip = CMatrix::zeros(4, 4);
    for (r, c, s) in [(0, 3, -1.0), (1, 2, 1.0), (2, 1, 1.0), (3, 0, -1.0)] {
        flip[(r, c)] = C64::new(s, 0.0);
    }
    let tau = v.transpose() * &flip * &v;
    let t = takagi_unitary(&tau)?;
    let x = &v * &t;
    let lam_c = (x.transpose() * &flip * &x).diagonal();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| lam_c[b].norm().total_cmp(&lam_c[a].norm()));
    let lam: Vec<f64> = order.iter().map(|&k| lam_c[k].norm()).collect();
    if lam[0] > lam[1] + lam[2] + lam[3] + 1e-9 * scale {
        return Err(Error::NotSeparable(format!(
            "concurrence {:e} > 0",
            (lam[0] - lam[1] - lam[2] - lam[3]) / scale
        )));
    }
    let phases = closing_phases(&lam);
    // Fold the residual phase of each diagonal entry into the new phases.
    let theta: Vec<f64> = (0..4)
        .map(|i| (phases[i] - lam_c[order[i]].arg()) / 2.0)
        .collect();
    let signs = [[1.0, 1.0, 1.0, 1.0], [1.0, 1.0, -1.0, -1.0], [1.0, -1.0, 1.0, -1.0], [1.0, -1.0, -1.0, 1.0]];
    let mut out = Vec::new();
    for s in signs.iter() {
        let mut z = nalgebra::DVector::<C64>::zeros(4);
        for i in 0..4 {
            z += x.column(order[i]) * (C64::from_polar(0.5 * s[i], theta[i]));
        }
        if z.norm() <= 1e-14 * scale.sqrt() {
            continue;
        }
        let (a, b) = rank_one_factors(&CMatrix::from_fn(2, 2, |a, b| z[2 * a + b]));
        out.push((&a * a.adjoint(), &b * b.adjoint()));
    }
    Ok(out)
}

/// `(a, b)` with `m ≈ a·bᵀ` for a (numerically) rank-one matrix, taken from
/// its largest column.
fn rank_one_factors(m: &CMatrix) -> (nalgebra::DVector<C64>, nalgebra::DVector<C64>) {
    let k = (0..m.ncols())
        .max_by(|&i, &j| m.column(i).norm().total_cmp(&m.column(j).norm()))
        .unwrap_or(0);
    let a: nalgebra::DVector<C64> = m.column(k).into_owned();
    let n2 = a.norm_squared();
    let b = nalgebra::DVector::from_fn(m.ncols(), |j, _| a.dotc(&m.column(j)) / n2);
    (a, b)
}

/// Unitary `T` with `Tᵀ·τ·T` diagonal for complex symmetric `τ`.
fn takagi_unitary(tau: &CMatrix) -> Result<CMatrix> {
    let n = tau.nrows();
    // Real symmetric form [[R, I], [I, −R]]: eigenvector (x; y) with
    // eigenvalue σ ≥ 0 gives τ·conj(u) = σ·u for u = x + iy.
    let big = DMatrix::<f64>::from_fn(2 * n, 2 * n, |r, c| {
        let (br, bc) = (r / n, c / n);
        let z = tau[(r % n, c % n)];
        match (br, bc) {
            (0, 0) => z.re,
            (1, 1) => -z.re,
            _ => z.im,
        }
    });
    let big = (&big + big.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::try_new(big, f64::EPSILON, 10_000).ok_or(Error::NoConvergence)?;
    let mut idx: Vec<usize> = (0..2 * n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut us: Vec<nalgebra::DVector<C64>> = Vec::with_capacity(n);
    for &k in &idx {
        if us.len() == n {
            break;
        }
        let col = eig.eigenvectors.column(k);
        let mut u = nalgebra::DVector::<C64>::from_fn(n, |i, _| C64::new(col[i], col[i + n]));
        for prev in &us {
            let c = prev.dotc(&u);
            u -= prev * c;
        }
        let norm = u.norm();
        if norm > 0.5 {
            us.push(u / C64::new(norm, 0.0));
        }
    }
    if us.len() != n {
        return Err(Error::NoConvergence);
    }
    let mut umat = CMatrix::zeros(n, n);
    for (k, u) in us.iter().enumerate() {
        umat.set_column(k, u);
    }
    // τ = U Σ Uᵀ ⇒ T = conj(U).
    Ok(umat.map(|z| z.conj()))
}

/// Phases `φ_k` (with `φ_0 = 0`) such that `Σ λ_k e^{iφ_k} = 0` for
/// descending `λ` satisfying the polygon inequality.
fn closing_phases(lam: &[f64]) -> [f64; 4] {
    let l = (lam[0] - lam[1]).clamp((lam[2] - lam[3]).abs(), lam[2] + lam[3]);
    // λ₁ e^{iφ₁} + L e^{iψ} = −λ₀.
    let target = C64::new(-lam[0], 0.0);
    let (p1, psi) = split_vector(lam[1], l, target);
    let (p2, p3) = split_vector(lam[2], lam[3], C64::from_polar(l, psi));
    [0.0, p1, p2, p3]
}

/// Angles `(α, β)` with `r1·e^{iα} + r2·e^{iβ} ≈ target`.
fn split_vector(r1: f64, r2: f64, target: C64) -> (f64, f64) {
    let t = target.norm();
    if r1 <= 0.0 {
        return (0.0, target.arg());
    }
    if t <= 1e-300 {
        return (0.0, std::f64::consts::PI);
    }
    let cos_a = ((t * t + r1 * r1 - r2 * r2) / (2.0 * t * r1)).clamp(-1.0, 1.0);
    let alpha = target.arg() + cos_a.acos();
    let rest = target - C64::from_polar(r1, alpha);
    let beta = if rest.norm() > 0.0 { rest.arg() } else { 0.0 };
    (alpha, beta)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::random::{random_channel, random_density, random_hermitian, rng};
    use approx::assert_abs_diff_eq;

    fn ch(kind: StandardKind, d: usize) -> Channel {
        standard_channel(&kind, d).unwrap()
    }

    fn h(m: CMatrix) -> HermitianMatrix {
        HermitianMatrix::from_matrix(m).unwrap()
    }

    #[test]
    fn identity_choi() {
        let j = ch(StandardKind::Identity, 2).choi().matrix().clone();
        for r in 0..4 {
            for c in 0..4 {
                let one = [(0, 0), (0, 3), (3, 0), (3, 3)].contains(&(r, c));
                assert_eq!(j[(r, c)].re, if one { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn depolarizing_choi_and_action() {
        let om = ch(StandardKind::Depolarizing, 2);
        assert!(max_abs(&(om.choi().matrix() - CMatrix::identity(4, 4) * C64::new(0.5, 0.0))) < 1e-15);
        let y = om.apply(&h(unit(2, 0, 0))).unwrap();
        assert!(max_abs(&(y.matrix() - CMatrix::identity(2, 2) * C64::new(0.5, 0.0))) < 1e-15);
    }

    #[test]
    fn xi_is_linear_combination() {
        let xi = ch(StandardKind::Xi { p: 0.0, q: 1.0 / 3.0 }, 2);
        let id = ch(StandardKind::Identity, 2);
        let want = id.choi().matrix() * C64::new(2.0 / 3.0, 0.0) + CMatrix::identity(4, 4) * C64::new(1.0 / 6.0, 0.0);
        assert!(max_abs(&(xi.choi().matrix() - want)) < 1e-15);
    }

    #[test]
    fn parameter_errors() {
        assert!(matches!(
            standard_channel(&StandardKind::Xi { p: 0.7, q: 0.7 }, 2),
            Err(Error::ParameterOutOfRange(_))
        ));
        assert!(standard_channel(&StandardKind::PartialDepolarizing(1.5), 2).is_err());
        let mut u = CMatrix::identity(2, 2);
        u[(0, 1)] = C64::new(1.0, 0.0);
        assert!(matches!(
            standard_channel(&StandardKind::Unitary(u), 2),
            Err(Error::NotUnitary { .. })
        ));
        let not_pvm = vec![h(CMatrix::identity(2, 2) * C64::new(0.5, 0.0)); 2];
        assert!(matches!(
            standard_channel(&StandardKind::Pinching(not_pvm), 2),
            Err(Error::NotProjective(_))
        ));
    }

    #[test]
    fn apply_cases() {
        let mut g = rng(11);
        let x = h(random_hermitian(&mut g, 3));
        let id = ch(StandardKind::Identity, 3);
        assert!(id.apply(&x).unwrap().max_abs_diff(&x) < 1e-14);
        let deph = ch(StandardKind::Dephasing, 3);
        let y = deph.apply(&x).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { x.matrix()[(i, i)] } else { C64::new(0.0, 0.0) };
                assert_abs_diff_eq!((y.matrix()[(i, j)] - want).norm(), 0.0, epsilon = 1e-15);
            }
        }
        assert!(id.apply(&h(CMatrix::identity(2, 2))).is_err());
    }

    #[test]
    fn random_channels_validate_and_preserve_trace() {
        let mut g = rng(12);
        for _ in 0..50 {
            let c = random_channel(&mut g, 2, 3, 2);
            let r = c.rep().validate();
            assert!(r.cp && r.tp);
            let x = h(random_hermitian(&mut g, 2));
            assert_abs_diff_eq!(c.apply(&x).unwrap().trace(), x.trace(), epsilon = 1e-10);
        }
    }

    #[test]
    fn adjoint_identity() {
        let mut g = rng(13);
        let c = random_channel(&mut g, 2, 3, 3);
        let x = random_hermitian(&mut g, 2);
        let y = random_hermitian(&mut g, 3);
        let lhs = linalg::inner(&c.rep().apply_raw(&x).unwrap(), &y);
        let rhs = linalg::inner(&x, &c.rep().adjoint_apply_raw(&y).unwrap());
        assert_abs_diff_eq!(lhs, rhs, epsilon = 1e-12);
        let adj = c.rep().adjoint();
        assert!(max_abs(&(adj.apply_raw(&y).unwrap() - c.rep().adjoint_apply_raw(&y).unwrap())) < 1e-13);
    }

    #[test]
    fn validate_identity() {
        let r = ch(StandardKind::Identity, 2).rep().validate();
        assert!(r.cp && r.tp && r.unital);
        assert_eq!(r.eb_2x2, Some(false));
        assert_eq!(ch(StandardKind::Identity, 3).rep().validate().eb_2x2, None);
    }

    #[test]
    fn measure_prepare_cases() {
        let comp = Povm::computational(2);
        let preps = comp.effects().to_vec();
        let mp = MeasurePrepare::new(comp, preps).unwrap();
        let c = measure_prepare_channel(&mp).unwrap();
        assert!(c.choi().max_abs_diff(ch(StandardKind::Dephasing, 2).choi()) < 1e-15);

        let mut g = rng(14);
        let rho = h(random_density(&mut g, 2, 2));
        let half = h(CMatrix::identity(2, 2) * C64::new(0.5, 0.0));
        let mp = MeasurePrepare::new(Povm::new(vec![half.clone(), half]).unwrap(), vec![rho.clone(), rho.clone()]).unwrap();
        let c = measure_prepare_channel(&mp).unwrap();
        assert!(c.choi().max_abs_diff(ch(StandardKind::Constant(rho), 2).choi()) < 1e-14);
    }

    #[test]
    fn separable_decomposition_round_trip() {
        let mut g = rng(15);
        let mut done = 0;
        for _ in 0..40 {
            let mp = crate::random::random_povm(&mut g, 2, 3);
            let preps: Vec<_> = (0..3).map(|_| h(random_density(&mut g, 2, 1 + done % 2))).collect();
            let c = measure_prepare_channel(&MeasurePrepare::new(mp, preps).unwrap()).unwrap();
            assert_eq!(c.rep().validate().eb_2x2, Some(true));
            let rec = MeasurePrepare::from_qubit_channel(&c).unwrap();
            let c2 = measure_prepare_channel(&rec).unwrap();
            assert!(c2.choi().max_abs_diff(c.choi()) < 1e-9);
            done += 1;
        }
        assert!(MeasurePrepare::from_qubit_channel(&ch(StandardKind::Identity, 2)).is_err());
        // Rank-deficient and degenerate cases.
        for c in [ch(StandardKind::Dephasing, 2), ch(StandardKind::Depolarizing, 2), ch(StandardKind::Xi { p: 0.0, q: 2.0 / 3.0 }, 2)] {
            let rec = MeasurePrepare::from_qubit_channel(&c).unwrap();
            assert!(measure_prepare_channel(&rec).unwrap().choi().max_abs_diff(c.choi()) < 1e-9);
        }
    }

    #[test]
    fn compose_tensor_marginal() {
        let mut g = rng(16);
        let f = random_channel(&mut g, 2, 2, 2);
        let id = ch(StandardKind::Identity, 2);
        assert!(compose(id.rep(), f.rep()).unwrap().choi().max_abs_diff(f.choi()) < 1e-14);

        let deph = ch(StandardKind::Dephasing, 2);
        let dd = tensor(deph.rep(), deph.rep()).unwrap();
        for k in 0..4 {
            for l in 0..4 {
                let x = herm_basis(2, k);
                let y = herm_basis(2, l);
                let out = dd.apply_raw(&x.kronecker(&y)).unwrap();
                let want = deph.rep().apply_raw(&x).unwrap().kronecker(&deph.rep().apply_raw(&y).unwrap());
                assert!(max_abs(&(out - want)) < 1e-14);
            }
        }

        assert!(channel_marginal(&f, 1).is_err());
        let comp = random_channel(&mut g, 2, 4, 3).with_output_shape(TensorShape::new(vec![2, 2]).unwrap()).unwrap();
        for keep in [1, 2] {
            assert!(channel_marginal(&comp, keep).is_ok());
        }
    }

    #[test]
    fn inversion() {
        let omega = ch(StandardKind::PartialDepolarizing(0.5), 2);
        let inv = invert_map(omega.rep()).unwrap();
        let id = ch(StandardKind::Identity, 2);
        let dep = ch(StandardKind::Depolarizing, 2);
        // (1/(1−q))(I − qΩ) at q = 1/2.
        let want = id.rep().combine(2.0, dep.rep(), -1.0).unwrap();
        assert!(inv.choi().max_abs_diff(want.choi()) < 1e-12);
        let back = invert_map(&inv).unwrap();
        assert!(back.choi().max_abs_diff(omega.choi()) < 1e-7);

        let deph = ch(StandardKind::Dephasing, 2);
        assert!(matches!(invert_map(deph.rep()), Err(Error::SingularMap { .. })));

        let mut g = rng(17);
        let u = ch(StandardKind::Unitary(crate::random::random_unitary(&mut g, 3)), 3);
        let ui = invert_map(u.rep()).unwrap();
        let c = compose(&ui, u.rep()).unwrap();
        assert!(c.choi().max_abs_diff(ch(StandardKind::Identity, 3).choi()) < 1e-10);
        assert!(validate(&ui).tp);
    }

    #[test]
    fn input_transpose_is_tp() {
        let mut g = rng(18);
        let f = random_channel(&mut g, 2, 2, 2);
        assert!(validate(&f.rep().input_transposed()).tp);
    }
}
