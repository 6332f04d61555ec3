//! Seeded property checks shared by the proptest suites and the acceptance
//! run. Each check draws one random instance from `seed` and returns a
//! description of the first violated identity.

#![allow(dead_code)]
// `!(x < tol)` rejects NaN, unlike `x >= tol`.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use qcc_core::channels::{
    channel_marginal, check_compatibilizer, compose, measure_prepare_channel, standard_channel, Channel,
    LinearMapRep, MeasurePrepare, Povm, StandardKind,
};
use qcc_core::jordan::{a_jp, gen_jordan, jordan_channel, post_compose_pair, GenJordanOperator};
use qcc_core::linalg::{
    embed_identity, hermitian_part, inner, kron_raw, max_abs, permute, ptrace, sqrt_psd, support_projection_absorbs,
    CMatrix, HermitianMatrix, TensorShape, C64,
};
use qcc_core::marginal::{
    compatibilizer_from_joint_state, extract_povm_compatibilizer, joint_marginals, joint_state_from_compatibilizer,
    lift_povm_compatibilizer, states_to_channels, StatePair,
};
use qcc_core::random::{
    random_channel, random_density, random_hermitian, random_povm, random_psd, random_pvm, random_unitary, rng,
    uniform, QccRng,
};
use qcc_core::sdp::decide::{decide, DecideMode, Verdict};
use qcc_core::sdp::{build_state_compat, solve, SdpStatus, SolveOptions};
use rand::Rng;

pub type Check = Result<(), String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn lib<T>(r: qcc_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn any_channel(r: &mut QccRng, d_in: usize, d_out: usize) -> Channel {
    let env = r.random_range(1..=4);
    random_channel(r, d_in, d_out, env)
}

fn choi_gap(a: &LinearMapRep, b: &LinearMapRep) -> f64 {
    max_abs(&(a.choi().matrix() - b.choi().matrix()))
}

fn herm(m: CMatrix, dims: &[usize]) -> HermitianMatrix {
    HermitianMatrix::new(hermitian_part(&m), TensorShape::new(dims.to_vec()).unwrap()).unwrap()
}

fn constant(r: &mut QccRng, d_in: usize, d_out: usize) -> Channel {
    let rho = herm(random_density(r, d_out, d_out), &[d_out]);
    standard_channel(&StandardKind::Constant(rho), d_in).unwrap()
}

fn verdict(f: &Channel, g: &Channel, mode: DecideMode) -> Result<Verdict, String> {
    lib(decide(f, g, mode, &SolveOptions::default())).map(|d| d.verdict)
}

/// The two marginals of `f ⊙ g` are `f` and `g`, and the product of
/// trace-preserving maps is trace preserving.
pub fn jordan_marginals(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let (d1, d2) = (r.random_range(1..=3), r.random_range(1..=3));
    let f = any_channel(&mut r, d, d1);
    let g = any_channel(&mut r, d, d2);
    let h = lib(jordan_channel(f.rep(), g.rep()))?;
    let j = h.choi().matrix();
    let dims = [d, d1, d2];
    let m1 = lib(ptrace(j, &dims, &[2]))?;
    let m2 = lib(ptrace(j, &dims, &[1]))?;
    let gap = max_abs(&(m1 - f.choi().matrix())).max(max_abs(&(m2 - g.choi().matrix())));
    ensure!(gap < 1e-10, "marginal gap {gap:e}");
    let tp = max_abs(&(lib(ptrace(j, &dims, &[1, 2]))? - CMatrix::identity(d, d)));
    ensure!(tp < 1e-10, "trace-preservation gap {tp:e}");
    Ok(())
}

/// Bilinearity, factor exchange and composition covariance of `⊙`.
pub fn jordan_algebra(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let (d1, d2) = (r.random_range(1..=3), r.random_range(1..=3));
    let f = any_channel(&mut r, d, d1);
    let f2 = any_channel(&mut r, d, d1);
    let g = any_channel(&mut r, d, d2);
    let g2 = any_channel(&mut r, d, d2);
    let (a, b) = (uniform(&mut r, -2.0, 2.0), uniform(&mut r, -2.0, 2.0));
    let jp = |x: &LinearMapRep, y: &LinearMapRep| lib(jordan_channel(x, y));

    let left = jp(&lib(f.rep().combine(a, f2.rep(), b))?, g.rep())?;
    let want = lib(jp(f.rep(), g.rep())?.combine(a, &jp(f2.rep(), g.rep())?, b))?;
    ensure!(choi_gap(&left, &want) < 1e-10, "left bilinearity gap {:e}", choi_gap(&left, &want));
    let right = jp(f.rep(), &lib(g.rep().combine(a, g2.rep(), b))?)?;
    let want = lib(jp(f.rep(), g.rep())?.combine(a, &jp(f.rep(), g2.rep())?, b))?;
    ensure!(choi_gap(&right, &want) < 1e-10, "right bilinearity gap {:e}", choi_gap(&right, &want));

    let fg = jp(f.rep(), g.rep())?;
    let gf = jp(g.rep(), f.rep())?;
    let swapped = lib(permute(gf.choi().matrix(), &[d, d2, d1], &[0, 2, 1]))?;
    let gap = max_abs(&(swapped - fg.choi().matrix()));
    ensure!(gap < 1e-12, "factor-exchange gap {gap:e}");

    let (e1, e2) = (r.random_range(1..=3), r.random_range(1..=3));
    let psi1 = any_channel(&mut r, d1, e1);
    let psi2 = any_channel(&mut r, d2, e2);
    let outer = lib(post_compose_pair(psi1.rep(), psi2.rep(), &fg))?;
    let inner_ = jp(&lib(compose(psi1.rep(), f.rep()))?, &lib(compose(psi2.rep(), g.rep()))?)?;
    let gap = choi_gap(&outer, &inner_);
    ensure!(gap < 1e-9, "composition covariance gap {gap:e}");
    Ok(())
}

/// `J(Φ₁⊙Φ₂) = Σ_ij (M_i⊙N_j)ᵀ⊗ρ_i⊗σ_j` for measure-and-prepare channels.
pub fn measure_prepare_formula(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let (d1, d2) = (r.random_range(1..=3), r.random_range(1..=3));
    let (a, b) = (r.random_range(1..=3), r.random_range(1..=3));
    let m = random_povm(&mut r, d, a);
    let n = random_povm(&mut r, d, b);
    let rhos: Vec<HermitianMatrix> = (0..a).map(|_| herm(random_density(&mut r, d1, 1 + d1 / 2), &[d1])).collect();
    let sigmas: Vec<HermitianMatrix> = (0..b).map(|_| herm(random_density(&mut r, d2, d2), &[d2])).collect();
    let f = lib(measure_prepare_channel(&lib(MeasurePrepare::new(m.clone(), rhos.clone()))?))?;
    let g = lib(measure_prepare_channel(&lib(MeasurePrepare::new(n.clone(), sigmas.clone()))?))?;
    let h = lib(jordan_channel(f.rep(), g.rep()))?;
    let mut want = CMatrix::zeros(d * d1 * d2, d * d1 * d2);
    for (mi, rho) in m.effects().iter().zip(&rhos) {
        for (nj, sigma) in n.effects().iter().zip(&sigmas) {
            let (x, y) = (mi.matrix(), nj.matrix());
            let p = (x * y + y * x) * C64::new(0.5, 0.0);
            want += kron_raw(&p.transpose(), &kron_raw(rho.matrix(), sigma.matrix()));
        }
    }
    let gap = max_abs(&(want - h.choi().matrix()));
    ensure!(gap < 1e-10, "formula gap {gap:e}");
    Ok(())
}

/// A unitary channel has a completely positive Jordan product only with
/// constant channels.
pub fn unitary_jordan_not_cp(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let u = standard_channel(&StandardKind::Unitary(random_unitary(&mut r, d)), d).unwrap();
    let dy = r.random_range(2..=3);
    let psi = any_channel(&mut r, d, dy);
    let lmin = lib(lib(jordan_channel(u.rep(), psi.rep()))?.choi().min_eigenvalue())?;
    ensure!(lmin < -1e-9, "unitary ⊙ non-constant has λmin {lmin:e}");
    let c = constant(&mut r, d, dy);
    let lmin = lib(lib(jordan_channel(u.rep(), c.rep()))?.choi().min_eigenvalue())?;
    ensure!(lmin > -1e-12, "unitary ⊙ constant has λmin {lmin:e}");
    Ok(())
}

/// For a PVM `Π`: `Φ⊙Δ_Π` is CP ⇔ `Φ` and `Δ_Π` are compatible ⇔ `Φ = Φ∘Ξ_Π`.
/// Half the instances are made pinching-invariant, so both sides occur.
pub fn pvm_three_way(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let ranks: Vec<usize> = match (d, r.random_range(0..2)) {
        (2, _) => vec![1, 1],
        (_, 0) => vec![1, 2],
        _ => vec![1, 1, 1],
    };
    let pvm = random_pvm(&mut r, &ranks);
    let pinch = lib(standard_channel(&StandardKind::Pinching(pvm.clone()), d))?;
    let delta = lib(standard_channel(&StandardKind::Measurement(lib(Povm::projective(pvm))?), d))?;
    let dy = r.random_range(2..=3);
    let mut phi = any_channel(&mut r, d, dy);
    let invariant_by_construction = r.random_bool(0.5);
    if invariant_by_construction {
        phi = lib(Channel::new(lib(compose(phi.rep(), pinch.rep()))?))?;
    }
    let cp = lib(lib(jordan_channel(phi.rep(), delta.rep()))?.choi().min_eigenvalue())? >= -1e-7;
    let compatible = match verdict(&phi, &delta, DecideMode::Compat)? {
        Verdict::Compatible => true,
        Verdict::Incompatible => false,
        Verdict::Inconclusive => return Err("compatibility solve inconclusive".into()),
    };
    let gap = choi_gap(phi.rep(), &lib(compose(phi.rep(), pinch.rep()))?);
    let invariant = gap < 1e-7;
    ensure!(
        cp == compatible && compatible == invariant && invariant == invariant_by_construction,
        "CP {cp}, compatible {compatible}, invariant {invariant} (gap {gap:e}), constructed {invariant_by_construction}"
    );
    Ok(())
}

fn projector(r: &mut QccRng, d: usize, rank: usize) -> CMatrix {
    let u = random_unitary(r, d);
    let cols = u.columns(0, rank);
    hermitian_part(&(cols * cols.adjoint()))
}

/// Joint state on `X⊗Y₁⊗Y₂`; with `deficient` its `X` marginal has rank
/// `d − 1`.
fn joint_state(r: &mut QccRng, d: usize, d1: usize, d2: usize, deficient: bool) -> CMatrix {
    let n = d * d1 * d2;
    let rank = r.random_range(1..=n);
    let rho = random_density(r, n, rank.max(d));
    if !deficient {
        return rho;
    }
    let p = kron_raw(&projector(r, d, d - 1), &CMatrix::identity(d1 * d2, d1 * d2));
    let m = &p * rho * &p;
    let t = m.trace().re;
    hermitian_part(&(m / C64::new(t, 0.0)))
}

/// State ↔ channel reduction: the compatibilizer built from a joint state
/// has the channels of its marginals as marginals, and mapping back
/// recovers the joint state.
pub fn state_channel_round_trip(seed: u64, deficient: bool) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let (d1, d2) = (r.random_range(1..=2), r.random_range(1..=3));
    let rho = herm(joint_state(&mut r, d, d1, d2, deficient), &[d, d1, d2]);
    let sigma = herm(lib(ptrace(rho.matrix(), &[d, d1, d2], &[1, 2]))?, &[d]);
    let rho1 = herm(lib(ptrace(rho.matrix(), &[d, d1, d2], &[2]))?, &[d, d1]);
    let rho2 = herm(lib(ptrace(rho.matrix(), &[d, d1, d2], &[1]))?, &[d, d2]);
    let sp = lib(StatePair::new(rho1, rho2, sigma.clone(), d1, d2))?;
    let (f, g) = lib(states_to_channels(&sp))?;
    let comp = lib(compatibilizer_from_joint_state(&rho, &sigma, d1, d2))?;
    let dev = lib(check_compatibilizer(&f, &g, &comp, 1e-8))?;
    ensure!(dev < 1e-8, "compatibilizer marginal deviation {dev:e}");
    let back = lib(joint_state_from_compatibilizer(&comp, &sigma))?;
    let gap = back.max_abs_diff(&rho);
    let tol = if deficient { 1e-7 } else { 1e-8 };
    ensure!(gap < tol, "joint state round trip off by {gap:e}");
    Ok(())
}

/// Both directions of the reduction: the state pair is compatible exactly
/// when the channel pair built from it is.
pub fn state_channel_equivalence(seed: u64, deficient: bool) -> Check {
    let mut r = rng(seed);
    let d = 2;
    let sigma_m = if deficient {
        projector(&mut r, d, 1)
    } else {
        random_density(&mut r, d, d)
    };
    let sigma = herm(sigma_m, &[d]);
    let s = lib(sqrt_psd(&sigma))?;
    let envs = [1, 2, 4];
    let mut rhos = Vec::new();
    for _ in 0..2 {
        let env = envs[r.random_range(0..3)];
        let ch = random_channel(&mut r, d, 2, env);
        let k = kron_raw(s.matrix(), &CMatrix::identity(2, 2));
        rhos.push(herm(&k * ch.choi().matrix() * &k, &[d, 2]));
    }
    let state = lib(solve(&lib(build_state_compat(&rhos[0], &rhos[1], d))?, &SolveOptions::default()))?;
    let sp = lib(StatePair::new(rhos[0].clone(), rhos[1].clone(), sigma, 2, 2))?;
    let (f, g) = lib(states_to_channels(&sp))?;
    let dec = lib(decide(&f, &g, DecideMode::Compat, &SolveOptions::default()))?;
    if dec.alpha.abs() < 1e-6 || state.value.abs() < 1e-6 {
        // Boundary instance: both verdicts are within solver tolerance.
        return Ok(());
    }
    let states_ok = match state.status {
        SdpStatus::Feasible => true,
        SdpStatus::Infeasible => false,
        SdpStatus::Inconclusive => return Err("state solve inconclusive".into()),
    };
    let channels_ok = match dec.verdict {
        Verdict::Compatible => true,
        Verdict::Incompatible => false,
        Verdict::Inconclusive => return Err("channel solve inconclusive".into()),
    };
    ensure!(states_ok == channels_ok, "states {states_ok} vs channels {channels_ok}");
    Ok(())
}

/// `A = (Π⊗I)A(Π⊗I)` for PSD `A` with first-factor marginal support `Π`.
pub fn absorption(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=4);
    let dy = r.random_range(1..=3);
    let rank = r.random_range(1..d);
    let p = kron_raw(&projector(&mut r, d, rank), &CMatrix::identity(dy, dy));
    let rank_b = r.random_range(1..=d * dy);
    let b = random_psd(&mut r, d * dy, rank_b);
    let a = herm(&p * b * &p, &[d, dy]);
    let dev = lib(support_projection_absorbs(&a))?;
    ensure!(dev < 1e-9, "absorption deviation {dev:e}");
    Ok(())
}

/// `λ_min(X̄) ≤ α_C = β_C ≤ 1/dim(Y₁⊗Y₂)` with `X̄` the explicit feasible
/// point built from the two Choi matrices.
pub fn compat_sandwich(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = 2;
    let (d1, d2) = (r.random_range(1..=2), r.random_range(2..=3));
    let f = any_channel(&mut r, d, d1);
    let g = any_channel(&mut r, d, d2);
    let dims = [d, d1, d2];
    let n = d * d1 * d2;
    let xbar = lib(embed_identity(f.choi().matrix(), &dims, &[2]))? * C64::new(1.0 / d2 as f64, 0.0)
        + lib(embed_identity(g.choi().matrix(), &dims, &[1]))? * C64::new(1.0 / d1 as f64, 0.0)
        - CMatrix::identity(n, n) * C64::new(1.0 / (d1 * d2) as f64, 0.0);
    let lower = lib(herm(xbar, &dims).min_eigenvalue())?;
    let dec = lib(decide(&f, &g, DecideMode::Compat, &SolveOptions::default()))?;
    let beta = dec.beta.ok_or("no dual bound")?;
    let upper = 1.0 / (d1 * d2) as f64;
    ensure!(lower <= dec.alpha + 1e-6, "λmin(X̄) = {lower} above α = {}", dec.alpha);
    ensure!((dec.alpha - beta).abs() <= 1e-6, "α = {} vs β = {beta}", dec.alpha);
    ensure!(beta <= upper + 1e-6, "β = {beta} above {upper}");
    Ok(())
}

/// `λ_min(J(f⊙g)) ≤ α_J = β_J ≤ 1/dim(X)²`.
pub fn jordan_sandwich(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = 2;
    let f = any_channel(&mut r, d, d);
    let g = any_channel(&mut r, d, d);
    let lower = lib(lib(jordan_channel(f.rep(), g.rep()))?.choi().min_eigenvalue())?;
    let dec = lib(decide(&f, &g, DecideMode::Jordan, &SolveOptions::default()))?;
    let beta = dec.beta.ok_or("no dual bound")?;
    let upper = 1.0 / (d * d) as f64;
    ensure!(lower <= dec.alpha + 1e-6, "λmin(f⊙g) = {lower} above α = {}", dec.alpha);
    ensure!((dec.alpha - beta).abs() <= 1e-6, "α = {} vs β = {beta}", dec.alpha);
    ensure!(beta <= upper + 1e-6, "β = {beta} above {upper}");
    Ok(())
}

/// `⟨Z₁,J(f)⟩+⟨Z₂,J(g)⟩ = ⟨J(f⊙_A g), Tr*_{Y₂}Z₁+Tr*_{Y₁}Z₂⟩` for any valid `A`.
pub fn pairing_identity(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let (d1, d2) = (r.random_range(1..=3), r.random_range(1..=3));
    let f = any_channel(&mut r, d, d1);
    let g = any_channel(&mut r, d, d2);
    let a = if r.random_bool(0.5) {
        a_jp(d)
    } else {
        let mut x = random_hermitian(&mut r, d);
        let t = x.trace() / C64::new(d as f64, 0.0);
        for i in 0..d {
            x[(i, i)] -= t;
        }
        lib(GenJordanOperator::anchored(d, &herm(x, &[d])))?
    };
    let dims = [d, d1, d2];
    let z1 = random_hermitian(&mut r, d * d1);
    let mut z2 = random_hermitian(&mut r, d * d2);
    // Shift into the dual-feasible cone.
    let sum = lib(embed_identity(&z1, &dims, &[2]))? + lib(embed_identity(&z2, &dims, &[1]))?;
    let lmin = lib(herm(sum, &dims).min_eigenvalue())?;
    for i in 0..d * d2 {
        z2[(i, i)] += C64::new((-lmin).max(0.0), 0.0);
    }
    let lhs = inner(&z1, f.choi().matrix()) + inner(&z2, g.choi().matrix());
    let prod = lib(gen_jordan(f.rep(), g.rep(), &a))?;
    let sum = lib(embed_identity(&z1, &dims, &[2]))? + lib(embed_identity(&z2, &dims, &[1]))?;
    let rhs = inner(prod.choi().matrix(), &sum);
    let scale = 1.0 + lhs.abs();
    ensure!((lhs - rhs).abs() < 1e-8 * scale, "pairing {lhs} vs {rhs}");
    Ok(())
}

fn compatible_pair(r: &mut QccRng, d: usize, d1: usize, d2: usize) -> (Channel, Channel) {
    let env = r.random_range(1..=4);
    let c = random_channel(r, d, d1 * d2, env)
        .with_output_shape(TensorShape::new(vec![d1, d2]).unwrap())
        .unwrap();
    (channel_marginal(&c, 1).unwrap(), channel_marginal(&c, 2).unwrap())
}

/// Mixtures of compatible pairs are compatible; mixing any pair half-way
/// with constant channels makes it compatible; and CP of `·⊙g` is convex in
/// the first argument.
pub fn convexity(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = 2;
    let (d1, d2) = (r.random_range(1..=2), r.random_range(1..=2));
    let (f, g) = compatible_pair(&mut r, d, d1, d2);
    let (f2, g2) = compatible_pair(&mut r, d, d1, d2);
    let lambda = [0.25, 0.5, 0.75][r.random_range(0..3)];
    let fm = lib(f.mix(lambda, &f2))?;
    let gm = lib(g.mix(lambda, &g2))?;
    let v = verdict(&fm, &gm, DecideMode::Compat)?;
    ensure!(v == Verdict::Compatible, "mixture at λ = {lambda} gave {v:?}");

    let f = any_channel(&mut r, d, d1);
    let g = any_channel(&mut r, d, d2);
    let fh = lib(f.mix(0.5, &constant(&mut r, d, d1)))?;
    let gh = lib(g.mix(0.5, &constant(&mut r, d, d2)))?;
    let v = verdict(&fh, &gh, DecideMode::Compat)?;
    ensure!(v == Verdict::Compatible, "half-mixed pair gave {v:?}");

    // Nearly constant g keeps f⊙g CP for most f.
    let g = lib(any_channel(&mut r, d, d2).mix(0.2, &constant(&mut r, d, d2)))?;
    let f = lib(any_channel(&mut r, d, d1).mix(0.5, &constant(&mut r, d, d1)))?;
    let f2 = lib(any_channel(&mut r, d, d1).mix(0.5, &constant(&mut r, d, d1)))?;
    let cp = |x: &Channel| -> Result<f64, String> { lib(lib(jordan_channel(x.rep(), g.rep()))?.choi().min_eigenvalue()) };
    if cp(&f)? >= 0.0 && cp(&f2)? >= 0.0 {
        let l = uniform(&mut r, 0.0, 1.0);
        let lmin = cp(&lib(f.mix(l, &f2))?)?;
        ensure!(lmin >= -1e-12, "Jordan mixture at λ = {l} has λmin {lmin:e}");
    }
    Ok(())
}

/// A joint POVM lifted with distinguishable preparations is recovered by
/// extraction with the matching projectors.
pub fn povm_lift_extract(seed: u64) -> Check {
    let mut r = rng(seed);
    let d = r.random_range(2..=3);
    let (a, b) = (r.random_range(1..=3), r.random_range(1..=3));
    let flat = random_povm(&mut r, d, a * b);
    let p: Vec<Vec<HermitianMatrix>> = (0..a).map(|i| flat.effects()[i * b..(i + 1) * b].to_vec()).collect();
    let basis = |n: usize, k: usize| {
        let mut m = CMatrix::zeros(n, n);
        m[(k, k)] = C64::new(1.0, 0.0);
        herm(m, &[n])
    };
    let preps1: Vec<HermitianMatrix> = (0..a).map(|i| basis(a, i)).collect();
    let preps2: Vec<HermitianMatrix> = (0..b).map(|j| basis(b, j)).collect();
    let comp = lib(lift_povm_compatibilizer(&p, &preps1, &preps2, 1e-9))?;
    let back = lib(extract_povm_compatibilizer(&comp, &preps1, &preps2))?;
    let (rows, cols) = lib(joint_marginals(&p))?;
    let (rows2, cols2) = lib(joint_marginals(&back))?;
    let mut gap: f64 = 0.0;
    for (x, y) in rows.iter().zip(&rows2).chain(cols.iter().zip(&cols2)) {
        gap = gap.max(max_abs(&(x - y)));
    }
    ensure!(gap < 1e-10, "recovered marginals off by {gap:e}");
    Ok(())
}

/// Runs `check` on seeds `0..n` and reports the failures.
pub fn run_many(n: u64, check: impl Fn(u64) -> Check) -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    for seed in 0..n {
        if let Err(e) = check(seed) {
            failures.push(format!("seed {seed}: {e}"));
        }
    }
    (n as usize - failures.len(), failures)
}
