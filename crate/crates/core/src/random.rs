//! Seeded random matrices, states, measurements and channels.
//!
//! Everything takes an explicit RNG so that tests and sweeps are
//! reproducible.

use nalgebra::DVector;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::channels::{Channel, LinearMapRep, Povm};
use crate::linalg::{eigh, hermitian_part, spectral_map, CMatrix, HermitianMatrix, TensorShape, C64};

pub type QccRng = ChaCha8Rng;

pub fn rng(seed: u64) -> QccRng {
    use rand::SeedableRng;
    ChaCha8Rng::seed_from_u64(seed)
}

fn normal<R: Rng + ?Sized>(r: &mut R) -> f64 {
    r.sample(StandardNormal)
}

/// Complex Ginibre matrix with standard normal real and imaginary parts.
pub fn ginibre<R: Rng + ?Sized>(r: &mut R, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| C64::new(normal(r), normal(r)))
}

pub fn random_hermitian<R: Rng + ?Sized>(r: &mut R, n: usize) -> CMatrix {
    hermitian_part(&ginibre(r, n, n))
}

/// Random PSD matrix of the given rank.
pub fn random_psd<R: Rng + ?Sized>(r: &mut R, n: usize, rank: usize) -> CMatrix {
    let g = ginibre(r, n, rank);
    hermitian_part(&(&g * g.adjoint()))
}

/// Random density matrix (trace one) of the given rank.
pub fn random_density<R: Rng + ?Sized>(r: &mut R, n: usize, rank: usize) -> CMatrix {
    let m = random_psd(r, n, rank);
    let t = m.trace();
    m / t
}

/// Haar-random unitary via QR of a Ginibre matrix with phase correction.
pub fn random_unitary<R: Rng + ?Sized>(r: &mut R, n: usize) -> CMatrix {
    let qr = ginibre(r, n, n).qr();
    let (mut q, rr) = (qr.q(), qr.r());
    for k in 0..n {
        let d = rr[(k, k)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { C64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, k)] *= phase;
        }
    }
    q
}

/// Random isometry `C^d_in → C^d_out ⊗ C^env`, returned as Kraus operators.
pub fn random_kraus<R: Rng + ?Sized>(r: &mut R, d_in: usize, d_out: usize, env: usize) -> Vec<CMatrix> {
    let big = d_out * env;
    let u = if big >= d_in {
        let qr = ginibre(r, big, d_in).qr();
        qr.q()
    } else {
        panic!("environment too small for an isometry");
    };
    // Row index of the isometry is a·env + e; Kraus K_e[a, i] = V[a·env + e, i].
    (0..env)
        .map(|e| CMatrix::from_fn(d_out, d_in, |a, i| u[(a * env + e, i)]))
        .collect()
}

/// Channel from Kraus operators `Φ(X) = Σ K X K†`.
pub fn kraus_channel(kraus: &[CMatrix]) -> Channel {
    let d_out = kraus[0].nrows();
    let d_in = kraus[0].ncols();
    let rep = LinearMapRep::from_action(
        TensorShape::single(d_in),
        TensorShape::single(d_out),
        |x| {
            let mut y = CMatrix::zeros(d_out, d_out);
            for k in kraus {
                y += k * x * k.adjoint();
            }
            y
        },
    )
    .expect("Kraus maps are Hermitian preserving");
    Channel::new(rep).expect("Kraus maps with an isometry are channels")
}

/// Random channel from a Haar-random Stinespring isometry; `env` is the
/// Kraus rank (at least `ceil(d_in / d_out)`).
pub fn random_channel<R: Rng + ?Sized>(r: &mut R, d_in: usize, d_out: usize, env: usize) -> Channel {
    let env = env.max(d_in.div_ceil(d_out));
    kraus_channel(&random_kraus(r, d_in, d_out, env))
}

/// Random POVM with `m` full-rank effects.
pub fn random_povm<R: Rng + ?Sized>(r: &mut R, d: usize, m: usize) -> Povm {
    let gs: Vec<CMatrix> = (0..m).map(|_| random_psd(r, d, d)).collect();
    let total = gs.iter().fold(CMatrix::zeros(d, d), |a, g| a + g);
    let (vals, vecs) = eigh(&total).expect("finite matrix");
    let s = spectral_map(&vals, &vecs, |l| 1.0 / l.sqrt());
    let effects = gs
        .iter()
        .map(|g| HermitianMatrix::from_matrix(hermitian_part(&(&s * g * &s))).unwrap())
        .collect();
    Povm::new(effects).expect("normalized effects form a POVM")
}

/// Random PVM: a Haar basis grouped into blocks of the given ranks.
pub fn random_pvm<R: Rng + ?Sized>(r: &mut R, ranks: &[usize]) -> Vec<HermitianMatrix> {
    let d: usize = ranks.iter().sum();
    let u = random_unitary(r, d);
    let mut out = Vec::with_capacity(ranks.len());
    let mut start = 0;
    for &k in ranks {
        let cols = u.columns(start, k);
        let p = cols * cols.adjoint();
        out.push(HermitianMatrix::from_matrix(hermitian_part(&p)).unwrap());
        start += k;
    }
    out
}

/// Uniform sample in `[lo, hi)`.
pub fn uniform<R: Rng + ?Sized>(r: &mut R, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.random::<f64>()
}

/// Random unit vector in `C^n`.
pub fn random_unit_vector<R: Rng + ?Sized>(r: &mut R, n: usize) -> DVector<C64> {
    let v = DVector::from_fn(n, |_, _| C64::new(normal(r), normal(r)));
    let norm = v.norm();
    v / C64::new(norm, 0.0)
}
