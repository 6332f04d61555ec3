//! JSON encodings of channels and certificates.
//!
//! Matrices are row-major arrays of `[re, im]` pairs. Channels are
//! `{"d_in", "d_out", "choi"}` with an optional `"output_factors"` for
//! compatibilizers; certificates are tagged by `"mode"`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channels::{check_compatibilizer, Channel, LinearMapRep};
use crate::error::{Error, Result};
use crate::jordan::{gen_jordan, GenJordanOperator, SOLVER_TOL};
use crate::linalg::{max_abs, ptrace, CMatrix, HermitianMatrix, TensorShape, C64};
use crate::sdp::decide::{Certificate, Decision};
use crate::witness::{
    verify_extension_witness, verify_jordan_witness, verify_witness, ExtensionWitness, JordanWitness, Verification,
    Witness, WitnessMode,
};

/// Hermiticity slack accepted when parsing.
pub const PARSE_HERMITIAN_TOL: f64 = 1e-10;

pub type MatrixJson = Vec<Vec<[f64; 2]>>;

pub fn encode_matrix(m: &CMatrix) -> MatrixJson {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

pub fn decode_matrix(rows: &MatrixJson) -> Result<CMatrix> {
    let n = rows.len();
    if n == 0 || rows.iter().any(|r| r.len() != n) {
        return Err(Error::Parse("matrix must be a non-empty square array".into()));
    }
    let m = CMatrix::from_fn(n, n, |i, j| C64::new(rows[i][j][0], rows[i][j][1]));
    if m.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::Parse("matrix has non-finite entries".into()));
    }
    Ok(m)
}

fn decode_hermitian(rows: &MatrixJson, shape: TensorShape) -> Result<HermitianMatrix> {
    let m = decode_matrix(rows)?;
    if m.nrows() != shape.dim() {
        return Err(Error::ShapeMismatch {
            expected: shape.dim(),
            found: m.nrows(),
        });
    }
    HermitianMatrix::with_tolerance(m, shape, PARSE_HERMITIAN_TOL)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelJson {
    pub d_in: usize,
    pub d_out: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_factors: Option<Vec<usize>>,
    pub choi: MatrixJson,
}

impl ChannelJson {
    pub fn from_channel(ch: &Channel) -> Self {
        let f = ch.output().factors();
        Self {
            d_in: ch.d_in(),
            d_out: ch.d_out(),
            output_factors: (f.len() > 1).then(|| f.to_vec()),
            choi: encode_matrix(ch.choi().matrix()),
        }
    }

    fn shapes(&self) -> Result<(TensorShape, TensorShape)> {
        let input = TensorShape::new(vec![self.d_in]).map_err(|_| Error::Parse("d_in must be positive".into()))?;
        let output = match &self.output_factors {
            Some(f) => {
                let s = TensorShape::new(f.clone()).map_err(|_| Error::Parse("bad output_factors".into()))?;
                if s.dim() != self.d_out {
                    return Err(Error::Parse(format!("output_factors multiply to {} ≠ d_out", s.dim())));
                }
                s
            }
            None => TensorShape::new(vec![self.d_out]).map_err(|_| Error::Parse("d_out must be positive".into()))?,
        };
        Ok((input, output))
    }

    /// Parses without checking complete positivity or trace preservation.
    pub fn to_map(&self) -> Result<LinearMapRep> {
        let (input, output) = self.shapes()?;
        let choi = decode_hermitian(&self.choi, input.concat(&output))?;
        LinearMapRep::with_shapes(choi, input, output)
    }

    pub fn to_channel(&self) -> Result<Channel> {
        Channel::new(self.to_map()?)
    }
}

fn parse_json<T: for<'de> Deserialize<'de>>(text: &str) -> Result<T> {
    serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

pub fn channel_from_str(text: &str) -> Result<Channel> {
    parse_json::<ChannelJson>(text)?.to_channel()
}

pub fn channel_to_string(ch: &Channel) -> String {
    serde_json::to_string_pretty(&ChannelJson::from_channel(ch)).expect("plain data serializes")
}

pub fn load_channel(path: &Path) -> Result<Channel> {
    channel_from_str(&read(path)?)
}

pub fn save_channel(path: &Path, ch: &Channel) -> Result<()> {
    write(path, &channel_to_string(ch))
}

/// A bare matrix file `{"matrix": ...}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatrixFile {
    pub matrix: MatrixJson,
}

pub fn matrix_from_str(text: &str) -> Result<CMatrix> {
    decode_matrix(&parse_json::<MatrixFile>(text)?.matrix)
}

/// Serialized certificate; `dims` is `[d, d1, d2]` (`[d, dy]` for
/// extension certificates).
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum CertificateJson {
    Plain {
        dims: Vec<usize>,
        #[serde(rename = "Z1")]
        z1: MatrixJson,
        #[serde(rename = "Z2")]
        z2: MatrixJson,
        margin: f64,
    },
    Ppt {
        dims: Vec<usize>,
        #[serde(rename = "Z1")]
        z1: MatrixJson,
        #[serde(rename = "Z2")]
        z2: MatrixJson,
        margin: f64,
    },
    Jordan {
        dims: Vec<usize>,
        #[serde(rename = "W1")]
        w1: MatrixJson,
        #[serde(rename = "W2")]
        w2: MatrixJson,
        rho: MatrixJson,
        margin: f64,
    },
    Compatibilizer {
        dims: Vec<usize>,
        #[serde(rename = "J")]
        j: MatrixJson,
        deviation: f64,
    },
    JordanOperator {
        dims: Vec<usize>,
        #[serde(rename = "A")]
        a: MatrixJson,
        #[serde(rename = "J")]
        j: MatrixJson,
    },
    Extension {
        dims: Vec<usize>,
        k: usize,
        #[serde(rename = "X")]
        x: MatrixJson,
    },
    ExtensionWitness {
        dims: Vec<usize>,
        #[serde(rename = "Zs")]
        zs: Vec<MatrixJson>,
        margin: f64,
    },
}

impl CertificateJson {
    pub fn mode(&self) -> &'static str {
        match self {
            CertificateJson::Plain { .. } => "plain",
            CertificateJson::Ppt { .. } => "ppt",
            CertificateJson::Jordan { .. } => "jordan",
            CertificateJson::Compatibilizer { .. } => "compatibilizer",
            CertificateJson::JordanOperator { .. } => "jordan-operator",
            CertificateJson::Extension { .. } => "extension",
            CertificateJson::ExtensionWitness { .. } => "extension-witness",
        }
    }

    /// Whether the certificate proves compatibility (as opposed to
    /// incompatibility).
    pub fn is_primal(&self) -> bool {
        matches!(
            self,
            CertificateJson::Compatibilizer { .. } | CertificateJson::JordanOperator { .. } | CertificateJson::Extension { .. }
        )
    }

    pub fn witness(w: &Witness, margin: f64) -> Self {
        let dims = vec![w.z1.shape().factors()[0], w.z1.shape().factors()[1], w.z2.shape().factors()[1]];
        let (z1, z2) = (encode_matrix(w.z1.matrix()), encode_matrix(w.z2.matrix()));
        match w.mode {
            WitnessMode::Plain => CertificateJson::Plain { dims, z1, z2, margin },
            WitnessMode::Ppt => CertificateJson::Ppt { dims, z1, z2, margin },
        }
    }

    /// Encodes the certificate attached to a decision about `(f, g)`.
    pub fn from_decision(dec: &Decision, f: &Channel, g: Option<&Channel>) -> Option<Self> {
        let d = f.d_in();
        let d1 = f.d_out();
        let d2 = g.map_or(d1, Channel::d_out);
        let margin = dec.verification.as_ref().map_or(f64::NAN, |v| v.margin);
        Some(match dec.certificate.as_ref()? {
            Certificate::Compatibilizer { comp, deviation } => CertificateJson::Compatibilizer {
                dims: vec![d, d1, d2],
                j: encode_matrix(comp.choi().matrix()),
                deviation: *deviation,
            },
            Certificate::Jordan { a, comp } => CertificateJson::JordanOperator {
                dims: vec![d, d1, d2],
                a: encode_matrix(a.matrix().matrix()),
                j: encode_matrix(comp.choi().matrix()),
            },
            Certificate::Extension { x } => CertificateJson::Extension {
                dims: vec![d, d1],
                k: x.shape().len() - 1,
                x: encode_matrix(x.matrix()),
            },
            Certificate::Witness(w) => Self::witness(w, margin),
            Certificate::JordanWitness(w) => CertificateJson::Jordan {
                dims: vec![d, d1, d2],
                w1: encode_matrix(w.w1.matrix()),
                w2: encode_matrix(w.w2.matrix()),
                rho: encode_matrix(w.rho.matrix()),
                margin,
            },
            Certificate::ExtensionWitness(w) => CertificateJson::ExtensionWitness {
                dims: vec![d, d1],
                zs: w.zs.iter().map(|z| encode_matrix(z.matrix())).collect(),
                margin,
            },
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        parse_json(text)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&read(path)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write(path, &self.to_json())
    }

    fn dims3(&self) -> Result<[usize; 3]> {
        let dims = match self {
            CertificateJson::Plain { dims, .. }
            | CertificateJson::Ppt { dims, .. }
            | CertificateJson::Jordan { dims, .. }
            | CertificateJson::Compatibilizer { dims, .. }
            | CertificateJson::JordanOperator { dims, .. } => dims,
            _ => return Err(Error::Parse("certificate has no pair dimensions".into())),
        };
        match dims.as_slice() {
            &[d, d1, d2] if d > 0 && d1 > 0 && d2 > 0 => Ok([d, d1, d2]),
            _ => Err(Error::Parse(format!("dims must be [d, d1, d2], found {dims:?}"))),
        }
    }

    /// Re-checks the certificate against the channels it claims to decide.
    /// Extension certificates only use `f`.
    pub fn verify(&self, f: &Channel, g: Option<&Channel>) -> Result<Verification> {
        if let CertificateJson::Extension { .. } | CertificateJson::ExtensionWitness { .. } = self {
            return self.verify_extension(f);
        }
        let g = g.ok_or_else(|| Error::DimensionMismatch(format!("{} certificate needs two channels", self.mode())))?;
        let [d, d1, d2] = self.dims3()?;
        if f.d_in() != d || g.d_in() != d || f.d_out() != d1 || g.d_out() != d2 {
            return Err(Error::DimensionMismatch(format!(
                "certificate dims [{d}, {d1}, {d2}] do not match the channels"
            )));
        }
        let sh = |v: Vec<usize>| TensorShape::new(v).map_err(|_| Error::Parse("bad dims".into()));
        match self {
            CertificateJson::Plain { z1, z2, .. } | CertificateJson::Ppt { z1, z2, .. } => {
                let w = Witness {
                    z1: decode_hermitian(z1, sh(vec![d, d1])?)?,
                    z2: decode_hermitian(z2, sh(vec![d, d2])?)?,
                    mode: if self.mode() == "ppt" { WitnessMode::Ppt } else { WitnessMode::Plain },
                };
                verify_witness(&w, f, g)
            }
            CertificateJson::Jordan { w1, w2, rho, .. } => {
                let w = JordanWitness {
                    w1: decode_hermitian(w1, sh(vec![d, d])?)?,
                    w2: decode_hermitian(w2, sh(vec![d, d])?)?,
                    rho: decode_hermitian(rho, sh(vec![d, d1, d2])?)?,
                };
                verify_jordan_witness(&w, f, g)
            }
            CertificateJson::Compatibilizer { j, .. } => {
                let comp = compatibilizer_channel(j, d, d1, d2)?;
                Ok(primal_verification(check_compatibilizer(f, g, &comp, SOLVER_TOL), &comp))
            }
            CertificateJson::JordanOperator { a, j, .. } => {
                let a = GenJordanOperator::new(decode_hermitian(a, sh(vec![d, d, d])?)?, SOLVER_TOL)?;
                let comp = compatibilizer_channel(j, d, d1, d2)?;
                let rebuilt = gen_jordan(f.rep(), g.rep(), &a)?;
                let gap = max_abs(&(rebuilt.choi().matrix() - comp.choi().matrix()));
                let check = check_compatibilizer(f, g, &comp, SOLVER_TOL).and_then(|dev| {
                    if gap > SOLVER_TOL {
                        Err(Error::NotCompatibilizer(format!("Jordan product differs by {gap:e}")))
                    } else {
                        Ok(dev.max(gap))
                    }
                });
                Ok(primal_verification(check, &comp))
            }
            _ => unreachable!("extension certificates handled above"),
        }
    }

    fn verify_extension(&self, f: &Channel) -> Result<Verification> {
        let (dims, d, dy) = match self {
            CertificateJson::Extension { dims, .. } | CertificateJson::ExtensionWitness { dims, .. } => match dims.as_slice() {
                &[d, dy] => (dims, d, dy),
                _ => return Err(Error::Parse(format!("dims must be [d, dy], found {dims:?}"))),
            },
            _ => unreachable!(),
        };
        if f.d_in() != d || f.d_out() != dy {
            return Err(Error::DimensionMismatch(format!("certificate dims {dims:?} do not match the channel")));
        }
        match self {
            CertificateJson::Extension { k, x, .. } => {
                let mut factors = vec![d];
                factors.extend(std::iter::repeat_n(dy, *k));
                let x = decode_hermitian(x, TensorShape::new(factors.clone()).map_err(|_| Error::Parse("bad k".into()))?)?;
                let mut dev: f64 = 0.0;
                for a in 1..=*k {
                    let traced: Vec<usize> = (1..=*k).filter(|&b| b != a).collect();
                    let m = ptrace(x.matrix(), &factors, &traced)?;
                    dev = dev.max(max_abs(&(m - f.choi().matrix())));
                }
                let lmin = x.min_eigenvalue()?;
                Ok(Verification {
                    valid: dev <= SOLVER_TOL && lmin >= -SOLVER_TOL,
                    margin: 0.0,
                    min_eigenvalue: lmin,
                    residual: dev,
                })
            }
            CertificateJson::ExtensionWitness { zs, .. } => {
                let sh = TensorShape::new(vec![d, dy]).map_err(|_| Error::Parse("bad dims".into()))?;
                let zs = zs.iter().map(|z| decode_hermitian(z, sh.clone())).collect::<Result<Vec<_>>>()?;
                verify_extension_witness(&ExtensionWitness { zs }, f)
            }
            _ => unreachable!(),
        }
    }
}

fn compatibilizer_channel(j: &MatrixJson, d: usize, d1: usize, d2: usize) -> Result<Channel> {
    let input = TensorShape::single(d);
    let output = TensorShape::new(vec![d1, d2])?;
    let choi = decode_hermitian(j, input.concat(&output))?;
    Channel::with_tolerance(LinearMapRep::with_shapes(choi, input, output)?, SOLVER_TOL)
}

fn primal_verification(check: Result<f64>, comp: &Channel) -> Verification {
    let lmin = comp.choi().min_eigenvalue().unwrap_or(f64::NAN);
    match check {
        Ok(dev) => Verification {
            valid: true,
            margin: 0.0,
            min_eigenvalue: lmin,
            residual: dev,
        },
        Err(Error::MarginalMismatch { deviation }) => Verification {
            valid: false,
            margin: 0.0,
            min_eigenvalue: lmin,
            residual: deviation,
        },
        Err(_) => Verification {
            valid: false,
            margin: 0.0,
            min_eigenvalue: lmin,
            residual: f64::NAN,
        },
    }
}
