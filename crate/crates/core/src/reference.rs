//! Replays the published reference examples: the PPT counterexample pair
//! with its compatibilizer and witness, the no-broadcasting witness, and the
//! closed-form qubit criteria.

use std::path::Path;

use crate::analytic::{
    depol_pair_compatible, inverse_defect, jordan_product_cp, qubit_self_compatible, xi_inverse,
    xi_measure_prepare, xi_measure_prepare_threshold, xi_self_compatible, xi_self_threshold, XiParams,
};
use crate::channels::{standard_channel, Channel, LinearMapRep, StandardKind};
use crate::error::{Error, Result};
use crate::io::{channel_from_str, decode_matrix, matrix_from_str, CertificateJson};
use crate::linalg::{eigh, embed_identity, max_abs, ptrace, ptranspose, CMatrix, HermitianMatrix, TensorShape};
use crate::sdp::decide::{decide, decide_self_compat, DecideMode, Verdict};
use crate::sdp::SolveOptions;
use crate::witness::{no_broadcast_witness, verify_witness, Witness, WitnessMode};

/// Checked-in reference data; every file can be overridden from a directory
/// for negative controls.
#[derive(Clone, Debug)]
pub struct ReferenceFixtures {
    pub phi1: Channel,
    pub phi2: Channel,
    pub phi1_pt: CMatrix,
    pub phi2_pt: CMatrix,
    pub compatibilizer: Channel,
    pub witness: CertificateJson,
    pub adjoint_sum: CMatrix,
    pub no_broadcast: CertificateJson,
}

const FILES: [(&str, &str); 8] = [
    ("ppt_counterexample_phi1.json", include_str!("../fixtures/ppt_counterexample_phi1.json")),
    ("ppt_counterexample_phi2.json", include_str!("../fixtures/ppt_counterexample_phi2.json")),
    ("ppt_counterexample_phi1_pt.json", include_str!("../fixtures/ppt_counterexample_phi1_pt.json")),
    ("ppt_counterexample_phi2_pt.json", include_str!("../fixtures/ppt_counterexample_phi2_pt.json")),
    ("ppt_counterexample_compatibilizer.json", include_str!("../fixtures/ppt_counterexample_compatibilizer.json")),
    ("ppt_counterexample_witness.json", include_str!("../fixtures/ppt_counterexample_witness.json")),
    ("ppt_counterexample_adjoint_sum.json", include_str!("../fixtures/ppt_counterexample_adjoint_sum.json")),
    ("no_broadcast_witness_d2.json", include_str!("../fixtures/no_broadcast_witness_d2.json")),
];

impl ReferenceFixtures {
    pub fn embedded() -> Self {
        Self::build(|name| {
            Ok(FILES.iter().find(|(n, _)| *n == name).expect("known fixture").1.to_string())
        })
        .expect("embedded fixtures are valid")
    }

    /// Reads each fixture from `dir` when present there, else uses the
    /// embedded copy.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        Self::build(|name| {
            let path = dir.join(name);
            if path.exists() {
                std::fs::read_to_string(&path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
            } else {
                Ok(FILES.iter().find(|(n, _)| *n == name).expect("known fixture").1.to_string())
            }
        })
    }

    fn build(get: impl Fn(&str) -> Result<String>) -> Result<Self> {
        Ok(Self {
            phi1: channel_from_str(&get(FILES[0].0)?)?,
            phi2: channel_from_str(&get(FILES[1].0)?)?,
            phi1_pt: matrix_from_str(&get(FILES[2].0)?)?,
            phi2_pt: matrix_from_str(&get(FILES[3].0)?)?,
            compatibilizer: channel_from_str(&get(FILES[4].0)?)?,
            witness: CertificateJson::from_json(&get(FILES[5].0)?)?,
            adjoint_sum: matrix_from_str(&get(FILES[6].0)?)?,
            no_broadcast: CertificateJson::from_json(&get(FILES[7].0)?)?,
        })
    }
}

#[derive(Clone, Debug)]
pub struct CheckItem {
    pub name: &'static str,
    pub pass: bool,
    pub detail: String,
}

fn item(name: &'static str, run: impl FnOnce() -> Result<(bool, String)>) -> CheckItem {
    match run() {
        Ok((pass, detail)) => CheckItem { name, pass, detail },
        Err(e) => CheckItem {
            name,
            pass: false,
            detail: format!("error: {e}"),
        },
    }
}

fn omega(q: f64, d: usize) -> Result<Channel> {
    standard_channel(&StandardKind::PartialDepolarizing(q), d)
}

/// Eigenvalues grouped into clusters closer than `tol`, as (value, count).
fn clusters(vals: &[f64], tol: f64) -> Vec<(f64, usize)> {
    let mut out: Vec<(f64, usize)> = Vec::new();
    for &v in vals {
        match out.last_mut() {
            Some((c, n)) if (v - *c).abs() <= tol => *n += 1,
            _ => out.push((v, 1)),
        }
    }
    out
}

/// `(4 + s√3 + t√(10 + 4s√3))/16` over `s, t = ±1`, ascending.
pub fn counterexample_eigenvalues() -> Vec<f64> {
    let r3 = 3f64.sqrt();
    let mut v: Vec<f64> = [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)]
        .iter()
        .map(|(s, t)| (4.0 + s * r3 + t * (10.0 + 4.0 * s * r3).sqrt()) / 16.0)
        .collect();
    v.sort_by(f64::total_cmp);
    v
}

/// `⟨Z₁+Z₂, J(Ω_p)⟩` for the no-broadcasting witness in dimension `d`.
pub fn no_broadcast_pairing(d: usize, p: f64) -> Result<f64> {
    let w = no_broadcast_witness(d)?;
    let ch = omega(p, d)?;
    w.pairing(&ch, &ch)
}

/// Root of the (affine in `p`) no-broadcasting pairing.
pub fn no_broadcast_threshold(d: usize) -> Result<f64> {
    let a = no_broadcast_pairing(d, 0.0)?;
    let b = no_broadcast_pairing(d, 1.0)?;
    Ok(a / (a - b))
}

/// Runs every reference check; `opts` configures the solver-backed ones.
pub fn verify_reference(fx: &ReferenceFixtures, opts: &SolveOptions) -> Vec<CheckItem> {
    let j1 = fx.phi1.choi().matrix().clone();
    let j2 = fx.phi2.choi().matrix().clone();
    let jc = fx.compatibilizer.choi().matrix().clone();
    vec![
        item("counterexample Choi matrices and partial transposes are PSD", || {
            let pt1 = ptranspose(&j1, &[2, 2], 0)?;
            let pt2 = ptranspose(&j2, &[2, 2], 0)?;
            let mut lmin = f64::INFINITY;
            for m in [&j1, &j2, &pt1, &pt2] {
                lmin = lmin.min(eigh(m)?.0[0]);
            }
            let dev = max_abs(&(pt1 - &fx.phi1_pt)).max(max_abs(&(pt2 - &fx.phi2_pt)));
            Ok((lmin >= -1e-12 && dev == 0.0, format!("λmin {lmin:.3e}, printed transposes off by {dev:.1e}")))
        }),
        item("counterexample compatibilizer has the printed marginals exactly", || {
            let m1 = ptrace(&jc, &[2, 2, 2], &[2])?;
            let m2 = ptrace(&jc, &[2, 2, 2], &[1])?;
            let dev = max_abs(&(m1 - &j1)).max(max_abs(&(m2 - &j2)));
            Ok((dev == 0.0, format!("max deviation {dev:e}")))
        }),
        item("counterexample compatibilizer spectrum: four values, multiplicity 2, trace 2", || {
            let (vals, _) = eigh(&jc)?;
            let groups = clusters(&vals, 1e-10);
            let sum: f64 = vals.iter().sum();
            let closed = counterexample_eigenvalues();
            let off = groups
                .iter()
                .zip(&closed)
                .map(|((v, _), c)| (v - c).abs())
                .fold(0.0, f64::max);
            let pass = groups.len() == 4
                && groups.iter().all(|&(v, n)| n == 2 && v > 0.0)
                && (sum - 2.0).abs() <= 1e-10
                && off <= 1e-10;
            let shown: Vec<String> = groups.iter().map(|(v, n)| format!("{v:.6}×{n}")).collect();
            Ok((pass, format!("{}; closed form off by {off:.1e}", shown.join(", "))))
        }),
        item("counterexample pair is compatible (α > 0)", || {
            let dec = decide(&fx.phi1, &fx.phi2, DecideMode::Compat, opts)?;
            Ok((
                dec.verdict == Verdict::Compatible && dec.alpha > 0.0,
                format!("{:?}, α = {:.6}", dec.verdict, dec.alpha),
            ))
        }),
        item("counterexample pair has no PPT compatibilizer", || {
            let dec = decide(&fx.phi1, &fx.phi2, DecideMode::PptCompat, opts)?;
            Ok((dec.verdict == Verdict::Incompatible, format!("{:?}, α = {:.6}", dec.verdict, dec.alpha)))
        }),
        item("printed PPT witness verifies with margin −1/2", || {
            let v = fx.witness.verify(&fx.phi1, Some(&fx.phi2))?;
            let CertificateJson::Ppt { z1, z2, .. } = &fx.witness else {
                return Ok((false, format!("expected a ppt certificate, found {}", fx.witness.mode())));
            };
            let z1 = decode_matrix(z1)?;
            let z2 = decode_matrix(z2)?;
            let sum = embed_identity(&z1, &[2, 2, 2], &[2])? + embed_identity(&z2, &[2, 2, 2], &[1])?;
            let dev = max_abs(&(sum - &fx.adjoint_sum));
            let pass = v.valid && (v.margin + 0.5).abs() <= 1e-12 && v.min_eigenvalue >= -1e-12 && dev == 0.0;
            Ok((
                pass,
                format!(
                    "margin {:.12}, λmin {:.3e}, printed adjoint sum off by {dev:.1e}",
                    v.margin, v.min_eigenvalue
                ),
            ))
        }),
        item("no-broadcasting witness: pairings −4/3 at p = 0 and 0 at p = 1/3", || {
            let id = standard_channel(&StandardKind::Identity, 2)?;
            let v = fx.no_broadcast.verify(&id, Some(&id))?;
            let p0 = no_broadcast_pairing(2, 0.0)?;
            let p13 = no_broadcast_pairing(2, 1.0 / 3.0)?;
            let pass = v.valid && (v.margin + 4.0 / 3.0).abs() <= 1e-12 && (p0 + 4.0 / 3.0).abs() <= 1e-12 && p13.abs() <= 1e-12;
            Ok((pass, format!("fixture margin {:.12}, p=0: {p0:.12}, p=1/3: {p13:.1e}", v.margin)))
        }),
        item("no-broadcasting threshold p = d/(2(d+1)) for d = 2, 3", || {
            let mut worst: f64 = 0.0;
            for d in [2usize, 3] {
                let t = no_broadcast_threshold(d)?;
                worst = worst.max((t - d as f64 / (2.0 * (d as f64 + 1.0))).abs());
            }
            Ok((worst <= 1e-10, format!("max deviation {worst:.1e}")))
        }),
        item("identity pair is incompatible with a verified witness", || {
            let id = standard_channel(&StandardKind::Identity, 2)?;
            let dec = decide(&id, &id, DecideMode::Compat, opts)?;
            let valid = dec.verification.as_ref().is_some_and(|v| v.valid);
            Ok((dec.verdict == Verdict::Incompatible && valid, format!("{:?}", dec.verdict)))
        }),
        item("qubit criterion: Ω_{1/3} is self-compatible with equality, I is not", || {
            let ch = omega(1.0 / 3.0, 2)?;
            let j = ch.choi().matrix();
            let lhs = {
                let t = ptrace(j, &[2, 2], &[0])?;
                (&t * &t).trace().re
            };
            let (vals, _) = eigh(j)?;
            let rhs = (j * j).trace().re - 4.0 * vals.iter().product::<f64>().max(0.0).sqrt();
            let id = standard_channel(&StandardKind::Identity, 2)?;
            let pass = qubit_self_compatible(&ch)? && !qubit_self_compatible(&id)? && (lhs - rhs).abs() <= 1e-12;
            Ok((pass, format!("LHS {lhs:.12}, RHS {rhs:.12}")))
        }),
        item("Ξ thresholds at p = 0: self 1/3, measure-and-prepare 2/3", || {
            let a = xi_self_threshold(0.0);
            let b = xi_measure_prepare_threshold(0.0);
            let pass = (a - 1.0 / 3.0).abs() <= 1e-15
                && (b - 2.0 / 3.0).abs() <= 1e-15
                && xi_self_compatible(XiParams::new(0.0, 0.5)?)
                && !xi_measure_prepare(XiParams::new(0.0, 0.5)?);
            Ok((pass, format!("{a:.15}, {b:.15}")))
        }),
        item("Ω pair boundary point (1/3, 1/3) is compatible", || {
            let f = omega(1.0 / 3.0, 2)?;
            let dec = decide(&f, &f, DecideMode::Compat, opts)?;
            let pass = depol_pair_compatible(1.0 / 3.0, 1.0 / 3.0)? && dec.verdict == Verdict::Compatible;
            Ok((pass, format!("SDP {:?}, α = {:.2e}", dec.verdict, dec.alpha)))
        }),
        item("Ξ⁻¹ at p = 0 agrees with the Ω_q inverse", || {
            let q = 0.5;
            let inv = xi_inverse(XiParams::new(0.0, q)?)?;
            let id = standard_channel(&StandardKind::Identity, 2)?;
            let om = standard_channel(&StandardKind::Depolarizing, 2)?;
            let want: LinearMapRep = id.rep().combine(1.0 / (1.0 - q), om.rep(), -q / (1.0 - q))?;
            let dev = max_abs(&(inv.choi().matrix() - want.choi().matrix()));
            let round = inverse_defect(&inv, omega(q, 2)?.rep())?;
            Ok((dev <= 1e-12 && round <= 1e-12, format!("formula gap {dev:.1e}, round trip {round:.1e}")))
        }),
        item("self-compatibility: I fails at k = 2, Ξ(0, 1/2) passes", || {
            let id = standard_channel(&StandardKind::Identity, 2)?;
            let a = decide_self_compat(&id, 2, true, opts)?.verdict;
            let b = decide_self_compat(&XiParams::new(0.0, 0.5)?.channel(), 2, true, opts)?.verdict;
            Ok((a == Verdict::Incompatible && b == Verdict::Compatible, format!("{a:?}, {b:?}")))
        }),
        item("Ξ regions nest: measure-and-prepare ⊆ Jordan CP ⊆ self-compatible", || {
            let n = 21;
            let mut bad = Vec::new();
            for i in 0..n {
                for k in 0..n - i {
                    let (p, q) = (i as f64 / (n - 1) as f64, k as f64 / (n - 1) as f64);
                    let xp = XiParams::new(p, q.min(1.0 - p))?;
                    let ch = xp.channel();
                    let mp = xi_measure_prepare(xp);
                    let jcp = jordan_product_cp(&ch, &ch, 1e-9)?;
                    let sc = xi_self_compatible(xp);
                    if (mp && !jcp) || (jcp && !sc) {
                        bad.push((p, q));
                    }
                }
            }
            Ok((bad.is_empty(), format!("{} violations", bad.len())))
        }),
        item("printed witness fails the plain form (it is PPT-specific)", || {
            let CertificateJson::Ppt { z1, z2, .. } = &fx.witness else {
                return Ok((false, "expected a ppt certificate".into()));
            };
            let shape = TensorShape::new(vec![2, 2])?;
            let w = Witness {
                z1: HermitianMatrix::new(decode_matrix(z1)?, shape.clone())?,
                z2: HermitianMatrix::new(decode_matrix(z2)?, shape)?,
                mode: WitnessMode::Plain,
            };
            let v = verify_witness(&w, &fx.phi1, &fx.phi2)?;
            Ok((!v.valid, format!("plain margin {:.6}", v.margin)))
        }),
    ]
}
