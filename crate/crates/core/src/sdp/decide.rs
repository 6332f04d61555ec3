//! Three-valued compatibility decisions with checked certificates.
//!
//! Every `Compatible` verdict carries a primal object that passed the
//! channel and marginal checks; every `Incompatible` verdict carries a
//! witness that passed verification in [`crate::witness`]. Anything else is
//! `Inconclusive`.

use crate::channels::{check_compatibilizer, Channel, LinearMapRep, Povm};
use crate::error::{Error, Result};
use crate::jordan::{gen_jordan, GenJordanOperator, SOLVER_TOL};
use crate::linalg::{ptrace, ptranspose, HermitianMatrix, TensorShape};
use crate::witness::{
    verify_extension_witness, verify_jordan_witness, verify_povm_witness, verify_witness, ExtensionWitness,
    JordanWitness, PovmWitness, Verification, Witness, WitnessMode,
};

use super::{
    build_compat, build_compat_chois, build_jordan_compat, build_k_extension, build_povm_compat, solve, SdpOutcome,
    SdpStatus, SolveOptions,
};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum DecideMode {
    Compat,
    Jordan,
    PptCompat,
}

impl std::str::FromStr for DecideMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "compat" => Ok(Self::Compat),
            "jordan" => Ok(Self::Jordan),
            "ppt-compat" | "ppt_compat" | "ppt" => Ok(Self::PptCompat),
            _ => Err(Error::Parse(format!("unknown mode {s:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verdict {
    Compatible,
    Incompatible,
    Inconclusive,
}

impl Verdict {
    pub fn exit_code(self) -> i32 {
        match self {
            Verdict::Compatible => 0,
            Verdict::Incompatible => 1,
            Verdict::Inconclusive => 2,
        }
    }

    /// `1`, `0` or `?`, as written to sweep CSVs.
    pub fn symbol(self) -> &'static str {
        match self {
            Verdict::Compatible => "1",
            Verdict::Incompatible => "0",
            Verdict::Inconclusive => "?",
        }
    }
}

#[derive(Clone, Debug)]
pub enum Certificate {
    /// A channel into `Y₁⊗Y₂` (output shape `[d₁, d₂]`).
    Compatibilizer { comp: Channel, deviation: f64 },
    /// Generalized Jordan operator and the compatibilizer it produces.
    Jordan { a: GenJordanOperator, comp: Channel },
    /// Joint Choi operator on `X⊗Y^{⊗k}`.
    Extension { x: HermitianMatrix },
    Witness(Witness),
    JordanWitness(JordanWitness),
    ExtensionWitness(ExtensionWitness),
}

#[derive(Clone, Debug)]
pub struct Decision {
    pub verdict: Verdict,
    pub certificate: Option<Certificate>,
    /// Primal optimum `α` (lower bound on the achievable shift).
    pub alpha: f64,
    /// Dual bound `β`, when available.
    pub beta: Option<f64>,
    /// Verification result of the attached witness, if any.
    pub verification: Option<Verification>,
    pub note: Option<String>,
}

impl Decision {
    fn inconclusive(out: &SdpOutcome, note: impl Into<String>) -> Self {
        let mut note = note.into();
        if let Some(n) = &out.note {
            note = format!("{note}; {n}");
        }
        Self {
            verdict: Verdict::Inconclusive,
            certificate: None,
            alpha: out.value,
            beta: out.dual_value,
            verification: None,
            note: Some(note),
        }
    }

    fn with(out: &SdpOutcome, verdict: Verdict, cert: Certificate, verification: Option<Verification>) -> Self {
        Self {
            verdict,
            certificate: Some(cert),
            alpha: out.value,
            beta: out.dual_value,
            verification,
            note: out.note.clone(),
        }
    }
}

/// Certificate tolerance for solver-produced primal objects.
const PRIMAL_TOL: f64 = 1e-7;

fn same_input(f: &Channel, g: &Channel) -> Result<()> {
    if f.d_in() != g.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "input dimensions {} and {}",
            f.d_in(),
            g.d_in()
        )));
    }
    Ok(())
}

fn compatibilizer_from(x: &HermitianMatrix, f: &Channel, g: &Channel) -> Result<(Channel, f64)> {
    let rep = LinearMapRep::with_shapes(
        x.clone(),
        TensorShape::single(f.d_in()),
        TensorShape::new(vec![f.d_out(), g.d_out()])?,
    )?;
    let comp = Channel::with_tolerance(rep, PRIMAL_TOL)?;
    let deviation = check_compatibilizer(f, g, &comp, PRIMAL_TOL)?;
    Ok((comp, deviation))
}

/// Shifts the witness so its adjoint sum is PSD, if it misses by a little.
fn polish_plain(w: &mut Witness, d: usize, d1: usize, d2: usize) -> Result<()> {
    let sum = HermitianMatrix::with_tolerance(
        w.adjoint_sum(d, d1, d2)?,
        TensorShape::new(vec![d, d1, d2])?,
        1e-9,
    )?;
    let lmin = sum.min_eigenvalue()?;
    if lmin < 0.0 {
        w.z1 = w.z1.shift(-lmin * (1.0 + 1e-6) + 1e-14);
    }
    Ok(())
}

fn plain_witness_from(out: &SdpOutcome, d: usize, d1: usize, d2: usize, mode: WitnessMode) -> Result<Option<Witness>> {
    let Some(dual) = &out.dual else { return Ok(None) };
    let mut w = Witness {
        z1: dual[0].scale(-1.0),
        z2: dual[1].scale(-1.0),
        mode,
    };
    polish_plain(&mut w, d, d1, d2)?;
    Ok(Some(w))
}

pub fn decide(f: &Channel, g: &Channel, mode: DecideMode, opts: &SolveOptions) -> Result<Decision> {
    same_input(f, g)?;
    match mode {
        DecideMode::Compat => decide_compat(f, g, opts),
        DecideMode::PptCompat => decide_ppt(f, g, opts),
        DecideMode::Jordan => decide_jordan(f, g, opts),
    }
}

fn decide_compat(f: &Channel, g: &Channel, opts: &SolveOptions) -> Result<Decision> {
    let (d, d1, d2) = (f.d_in(), f.d_out(), g.d_out());
    let out = solve(&build_compat(f, g, false)?, opts)?;
    match out.status {
        SdpStatus::Feasible => {
            let x = &out.primal.as_ref().expect("feasible outcome has a primal point")[0];
            match compatibilizer_from(x, f, g) {
                Ok((comp, deviation)) => Ok(Decision::with(
                    &out,
                    Verdict::Compatible,
                    Certificate::Compatibilizer { comp, deviation },
                    None,
                )),
                Err(e) => Ok(Decision::inconclusive(&out, format!("primal point rejected: {e}"))),
            }
        }
        SdpStatus::Infeasible => {
            let Some(w) = plain_witness_from(&out, d, d1, d2, WitnessMode::Plain)? else {
                return Ok(Decision::inconclusive(&out, "no dual multipliers"));
            };
            let v = verify_witness(&w, f, g)?;
            if v.valid {
                Ok(Decision::with(&out, Verdict::Incompatible, Certificate::Witness(w), Some(v)))
            } else {
                Ok(Decision::inconclusive(&out, format!("witness failed verification: {v:?}")))
            }
        }
        SdpStatus::Inconclusive => Ok(Decision::inconclusive(&out, "solver inconclusive")),
    }
}

fn decide_ppt(f: &Channel, g: &Channel, opts: &SolveOptions) -> Result<Decision> {
    let (d, d1, d2) = (f.d_in(), f.d_out(), g.d_out());
    let out = solve(&build_compat(f, g, true)?, opts)?;
    match out.status {
        SdpStatus::Feasible => {
            let x = &out.primal.as_ref().expect("feasible outcome has a primal point")[0];
            let pt = HermitianMatrix::with_tolerance(
                ptranspose(x.matrix(), &[d, d1, d2], 0)?,
                x.shape().clone(),
                1e-9,
            )?;
            let pt_min = pt.min_eigenvalue()?;
            match compatibilizer_from(x, f, g) {
                Ok((comp, deviation)) if pt_min >= -PRIMAL_TOL => Ok(Decision::with(
                    &out,
                    Verdict::Compatible,
                    Certificate::Compatibilizer { comp, deviation },
                    None,
                )),
                Ok(_) => Ok(Decision::inconclusive(
                    &out,
                    format!("partial transpose eigenvalue {pt_min:e}"),
                )),
                Err(e) => Ok(Decision::inconclusive(&out, format!("primal point rejected: {e}"))),
            }
        }
        SdpStatus::Infeasible => {
            // Certificates pair against the partially transposed Chois: solve
            // the plain problem for the transposed pair and use its dual.
            let j1 = HermitianMatrix::with_tolerance(
                ptranspose(f.choi().matrix(), &[d, d1], 0)?,
                f.choi().shape().clone(),
                1e-9,
            )?;
            let j2 = HermitianMatrix::with_tolerance(
                ptranspose(g.choi().matrix(), &[d, d2], 0)?,
                g.choi().shape().clone(),
                1e-9,
            )?;
            let tout = solve(&build_compat_chois(&j1, &j2, d, false)?, opts)?;
            if tout.status != SdpStatus::Infeasible {
                return Ok(Decision::inconclusive(
                    &out,
                    "PPT relaxation infeasible, but no witness of the transposed-pairing form exists",
                ));
            }
            let Some(w) = plain_witness_from(&tout, d, d1, d2, WitnessMode::Ppt)? else {
                return Ok(Decision::inconclusive(&out, "no dual multipliers"));
            };
            let v = verify_witness(&w, f, g)?;
            if v.valid {
                Ok(Decision::with(&out, Verdict::Incompatible, Certificate::Witness(w), Some(v)))
            } else {
                Ok(Decision::inconclusive(&out, format!("witness failed verification: {v:?}")))
            }
        }
        SdpStatus::Inconclusive => Ok(Decision::inconclusive(&out, "solver inconclusive")),
    }
}

fn decide_jordan(f: &Channel, g: &Channel, opts: &SolveOptions) -> Result<Decision> {
    let out = solve(&build_jordan_compat(f, g)?, opts)?;
    match out.status {
        SdpStatus::Feasible => {
            let a = out.primal.as_ref().expect("feasible outcome has a primal point")[1].clone();
            let attempt = (|| -> Result<(GenJordanOperator, Channel)> {
                let a = GenJordanOperator::new(a, SOLVER_TOL)?;
                let rep = gen_jordan(f.rep(), g.rep(), &a)?;
                let comp = Channel::with_tolerance(rep, PRIMAL_TOL)?;
                check_compatibilizer(f, g, &comp, PRIMAL_TOL)?;
                Ok((a, comp))
            })();
            match attempt {
                Ok((a, comp)) => Ok(Decision::with(&out, Verdict::Compatible, Certificate::Jordan { a, comp }, None)),
                Err(e) => Ok(Decision::inconclusive(&out, format!("Jordan operator rejected: {e}"))),
            }
        }
        SdpStatus::Infeasible => {
            let Some(dual) = &out.dual else {
                return Ok(Decision::inconclusive(&out, "no dual multipliers"));
            };
            // Constraint order: X = L(A), Tr_{X₁}A = J(I), Tr_{X₂}A = J(I).
            let mut w = JordanWitness {
                rho: dual[0].scale(-1.0),
                w2: dual[1].scale(-1.0),
                w1: dual[2].scale(-1.0),
            };
            let lmin = w.rho.min_eigenvalue()?;
            if lmin < 0.0 {
                // L*(εI) = εI for trace-preserving maps, matched by W₁ += εI.
                let eps = -lmin * (1.0 + 1e-6) + 1e-14;
                w.rho = w.rho.shift(eps);
                w.w1 = w.w1.shift(eps);
            }
            let v = verify_jordan_witness(&w, f, g)?;
            if v.valid {
                Ok(Decision::with(&out, Verdict::Incompatible, Certificate::JordanWitness(w), Some(v)))
            } else {
                Ok(Decision::inconclusive(&out, format!("Jordan witness failed verification: {v:?}")))
            }
        }
        SdpStatus::Inconclusive => Ok(Decision::inconclusive(&out, "solver inconclusive")),
    }
}

/// Whether `k` copies of `f` are compatible. `symmetric` restricts the
/// primal search to swap-invariant operators.
pub fn decide_self_compat(f: &Channel, k: usize, symmetric: bool, opts: &SolveOptions) -> Result<Decision> {
    let out = solve(&build_k_extension(f, k, symmetric)?, opts)?;
    let (d, dy) = (f.d_in(), f.d_out());
    match out.status {
        SdpStatus::Feasible => {
            let x = out.primal.as_ref().expect("feasible outcome has a primal point")[0].clone();
            let mut dims = vec![d];
            dims.extend(std::iter::repeat_n(dy, k));
            let mut dev: f64 = 0.0;
            for a in 1..=k {
                let traced: Vec<usize> = (1..=k).filter(|&b| b != a).collect();
                let m = ptrace(x.matrix(), &dims, &traced)?;
                dev = dev.max(crate::linalg::max_abs(&(m - f.choi().matrix())));
            }
            let lmin = x.min_eigenvalue()?;
            if dev <= PRIMAL_TOL && lmin >= -PRIMAL_TOL {
                Ok(Decision::with(&out, Verdict::Compatible, Certificate::Extension { x }, None))
            } else {
                Ok(Decision::inconclusive(
                    &out,
                    format!("extension rejected (marginal deviation {dev:e}, eigenvalue {lmin:e})"),
                ))
            }
        }
        SdpStatus::Infeasible if symmetric => {
            // Swap constraints change the dual; certify with the plain form.
            decide_self_compat(f, k, false, opts)
        }
        SdpStatus::Infeasible => {
            let Some(dual) = &out.dual else {
                return Ok(Decision::inconclusive(&out, "no dual multipliers"));
            };
            let mut w = ExtensionWitness {
                zs: dual.iter().take(k).map(|m| m.scale(-1.0)).collect(),
            };
            let sum = w.adjoint_sum(d, dy)?;
            let n = sum.nrows();
            let lmin = HermitianMatrix::with_tolerance(sum, TensorShape::single(n), 1e-9)?.min_eigenvalue()?;
            if lmin < 0.0 {
                w.zs[0] = w.zs[0].shift(-lmin * (1.0 + 1e-6) + 1e-14);
            }
            let v = verify_extension_witness(&w, f)?;
            if v.valid {
                Ok(Decision::with(&out, Verdict::Incompatible, Certificate::ExtensionWitness(w), Some(v)))
            } else {
                Ok(Decision::inconclusive(&out, format!("extension witness failed verification: {v:?}")))
            }
        }
        SdpStatus::Inconclusive => Ok(Decision::inconclusive(&out, "solver inconclusive")),
    }
}

#[derive(Clone, Debug)]
pub struct PovmDecision {
    pub verdict: Verdict,
    /// `P[i][j]` when compatible.
    pub joint: Option<Vec<Vec<HermitianMatrix>>>,
    pub witness: Option<PovmWitness>,
    pub alpha: f64,
    pub note: Option<String>,
}

/// Joint measurability of two POVMs.
pub fn decide_povm(m: &Povm, n: &Povm, opts: &SolveOptions) -> Result<PovmDecision> {
    let out = solve(&build_povm_compat(m, n)?, opts)?;
    let (a, b) = (m.len(), n.len());
    let mut dec = PovmDecision {
        verdict: Verdict::Inconclusive,
        joint: None,
        witness: None,
        alpha: out.value,
        note: out.note.clone(),
    };
    match out.status {
        SdpStatus::Feasible => {
            let primal = out.primal.as_ref().expect("feasible outcome has a primal point");
            let joint: Vec<Vec<HermitianMatrix>> =
                (0..a).map(|i| (0..b).map(|j| primal[i * b + j].clone()).collect()).collect();
            let mut dev: f64 = 0.0;
            let mut lmin = f64::INFINITY;
            for i in 0..a {
                let mut row = joint[i][0].clone();
                for p in &joint[i][1..] {
                    row = row.add(p)?;
                }
                dev = dev.max(row.max_abs_diff(&m.effects()[i]));
                for p in &joint[i] {
                    lmin = lmin.min(p.min_eigenvalue()?);
                }
            }
            for j in 0..b {
                let mut col = joint[0][j].clone();
                for row in &joint[1..] {
                    col = col.add(&row[j])?;
                }
                dev = dev.max(col.max_abs_diff(&n.effects()[j]));
            }
            if dev <= PRIMAL_TOL && lmin >= -PRIMAL_TOL {
                dec.verdict = Verdict::Compatible;
                dec.joint = Some(joint);
            } else {
                dec.note = Some(format!("joint POVM rejected (deviation {dev:e}, eigenvalue {lmin:e})"));
            }
        }
        SdpStatus::Infeasible => {
            if let Some(dual) = &out.dual {
                let mut w = PovmWitness {
                    a: dual[..a].iter().map(|x| x.scale(-1.0)).collect(),
                    b: dual[a..a + b].iter().map(|x| x.scale(-1.0)).collect(),
                };
                let mut lmin = f64::INFINITY;
                for x in &w.a {
                    for y in &w.b {
                        lmin = lmin.min(x.add(y)?.min_eigenvalue()?);
                    }
                }
                if lmin < 0.0 {
                    let eps = -lmin * (1.0 + 1e-6) + 1e-14;
                    w.b = w.b.iter().map(|y| y.shift(eps)).collect();
                }
                let v = verify_povm_witness(&w, m, n)?;
                if v.valid {
                    dec.verdict = Verdict::Incompatible;
                    dec.witness = Some(w);
                } else {
                    dec.note = Some(format!("POVM witness failed verification: {v:?}"));
                }
            }
        }
        SdpStatus::Inconclusive => {}
    }
    Ok(dec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{standard_channel, StandardKind};

    fn ch(kind: StandardKind) -> Channel {
        standard_channel(&kind, 2).unwrap()
    }

    #[test]
    fn identity_pair_has_verified_witness() {
        let id = ch(StandardKind::Identity);
        let dec = decide(&id, &id, DecideMode::Compat, &SolveOptions::default()).unwrap();
        assert_eq!(dec.verdict, Verdict::Incompatible);
        let Some(Certificate::Witness(w)) = &dec.certificate else { panic!() };
        assert!(verify_witness(w, &id, &id).unwrap().valid);
    }

    #[test]
    fn depolarizing_pair_at_point_six() {
        let o = ch(StandardKind::PartialDepolarizing(0.6));
        let dec = decide(&o, &o, DecideMode::Compat, &SolveOptions::default()).unwrap();
        assert_eq!(dec.verdict, Verdict::Compatible);
    }

    #[test]
    fn jordan_identity_pair_has_verified_witness() {
        let id = ch(StandardKind::Identity);
        let dec = decide(&id, &id, DecideMode::Jordan, &SolveOptions::default()).unwrap();
        assert_eq!(dec.verdict, Verdict::Incompatible, "{:?}", dec.note);
        assert!(matches!(dec.certificate, Some(Certificate::JordanWitness(_))));
    }

    #[test]
    fn jordan_xi_pair_produces_compatibilizer() {
        let xi = ch(StandardKind::Xi { p: 0.1, q: 0.5 });
        let dec = decide(&xi, &xi, DecideMode::Jordan, &SolveOptions::default()).unwrap();
        assert_eq!(dec.verdict, Verdict::Compatible, "{:?}", dec.note);
    }

    #[test]
    fn self_compat_verdicts() {
        let delta = ch(StandardKind::Dephasing);
        let d = decide_self_compat(&delta, 4, false, &SolveOptions::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Compatible);
        let id = ch(StandardKind::Identity);
        let d = decide_self_compat(&id, 3, true, &SolveOptions::default()).unwrap();
        assert_eq!(d.verdict, Verdict::Incompatible);
        assert!(matches!(d.certificate, Some(Certificate::ExtensionWitness(_))));
    }

    #[test]
    fn povm_pairs() {
        let z = Povm::computational(2);
        let dec = decide_povm(&z, &z, &SolveOptions::default()).unwrap();
        assert_eq!(dec.verdict, Verdict::Compatible);
        let plus = HermitianMatrix::from_real_rows(&[&[0.5, 0.5], &[0.5, 0.5]]).unwrap();
        let minus = HermitianMatrix::from_real_rows(&[&[0.5, -0.5], &[-0.5, 0.5]]).unwrap();
        let h = Povm::projective(vec![plus, minus]).unwrap();
        let dec = decide_povm(&z, &h, &SolveOptions::default()).unwrap();
        assert_eq!(dec.verdict, Verdict::Incompatible);
    }
}
