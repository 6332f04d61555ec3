//! Acceptance run: one PASS/FAIL line per criterion, with the runtime
//! budget checked alongside the numerical tolerances. Runs without the
//! libtest harness so the report is always printed.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use qcc_core::analytic::{in_convex_polygon, xi_measure_prepare_threshold, xi_self_threshold, DEPOL_HULL};
use qcc_core::channels::{invert_map, standard_channel, Channel, StandardKind};
use qcc_core::linalg::{eigh, max_abs, ptrace, ptranspose, CMatrix};
use qcc_core::random::{random_channel, rng, uniform, QccRng};
use qcc_core::reference::{no_broadcast_pairing, no_broadcast_threshold, ReferenceFixtures};
use qcc_core::sdp::decide::{decide, DecideMode, Verdict};
use qcc_core::sdp::SolveOptions;
use qcc_core::sweep::{run_sweep, Family, SweepSpec, SweepTable};
use rand::Rng;

type Outcome = Result<(bool, String), String>;
type Suite = (&'static str, fn(u64) -> common::Check);

fn lib<T>(r: qcc_core::Result<T>) -> Result<T, String> {
    r.map_err(|e| e.to_string())
}

fn jobs() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn min_eig(m: &CMatrix) -> Result<f64, String> {
    Ok(lib(eigh(m))?.0[0])
}

fn replay_counterexample() -> Outcome {
    let fx = ReferenceFixtures::embedded();
    let opts = SolveOptions::default();
    let (f, g) = (&fx.phi1, &fx.phi2);
    let mut notes = Vec::new();

    // (a) Choi matrices and their partial transposes are PSD.
    let mut lmin = f64::INFINITY;
    let mut printed_gap: f64 = 0.0;
    for (ch, printed) in [(f, &fx.phi1_pt), (g, &fx.phi2_pt)] {
        let pt = lib(ptranspose(ch.choi().matrix(), &[ch.d_in(), ch.d_out()], 0))?;
        printed_gap = printed_gap.max(max_abs(&(&pt - printed)));
        lmin = lmin.min(min_eig(ch.choi().matrix())?).min(min_eig(&pt)?);
    }
    let a = lmin >= -1e-12 && printed_gap == 0.0;
    notes.push(format!("(a) λmin {lmin:.1e}"));

    // (b) Exact marginals of the printed compatibilizer.
    let j = fx.compatibilizer.choi().matrix();
    let m1 = lib(ptrace(j, &[2, 2, 2], &[2]))?;
    let m2 = lib(ptrace(j, &[2, 2, 2], &[1]))?;
    let dev = max_abs(&(m1 - f.choi().matrix())).max(max_abs(&(m2 - g.choi().matrix())));
    let b = dev == 0.0;
    notes.push(format!("(b) marginal deviation {dev:e}"));

    // (c) Four distinct positive eigenvalues, each twice, summing to 2.
    let (vals, _) = lib(eigh(j))?;
    let mut groups: Vec<(f64, usize)> = Vec::new();
    for &v in &vals {
        match groups.last_mut() {
            Some((c, n)) if (v - *c).abs() <= 1e-10 => *n += 1,
            _ => groups.push((v, 1)),
        }
    }
    let total: f64 = vals.iter().sum();
    let c = groups.len() == 4 && groups.iter().all(|&(v, n)| v > 0.0 && n == 2) && (total - 2.0).abs() <= 1e-10;
    notes.push(format!("(c) {} clusters, trace {total:.12}", groups.len()));

    // (d) and (e): plain compatible, PPT incompatible.
    let plain = lib(decide(f, g, DecideMode::Compat, &opts))?;
    let d = plain.verdict == Verdict::Compatible && plain.alpha > 0.0;
    notes.push(format!("(d) α = {:.6}", plain.alpha));
    let ppt = lib(decide(f, g, DecideMode::PptCompat, &opts))?;
    let e = ppt.verdict == Verdict::Incompatible;
    notes.push(format!("(e) {:?}", ppt.verdict));

    // (f) The printed witness in ppt mode.
    let v = lib(fx.witness.verify(f, Some(g)))?;
    let w = v.valid && (v.margin + 0.5).abs() <= 1e-12 && v.min_eigenvalue >= -1e-12;
    notes.push(format!("(f) margin {:.12}", v.margin));

    Ok((a && b && c && d && e && w, notes.join(", ")))
}

fn no_broadcasting() -> Outcome {
    let id = lib(standard_channel(&StandardKind::Identity, 2))?;
    let dec = lib(decide(&id, &id, DecideMode::Compat, &SolveOptions::default()))?;
    let witnessed = dec.verdict == Verdict::Incompatible && dec.verification.as_ref().is_some_and(|v| v.valid);
    let p0 = lib(no_broadcast_pairing(2, 0.0))?;
    let p3 = lib(no_broadcast_pairing(2, 1.0 / 3.0))?;
    let pairings = (p0 + 4.0 / 3.0).abs() <= 1e-12 && p3.abs() <= 1e-12;
    let mut worst: f64 = 0.0;
    for d in [2usize, 3] {
        let t = lib(no_broadcast_threshold(d))?;
        worst = worst.max((t - d as f64 / (2.0 * (d as f64 + 1.0))).abs());
    }
    Ok((
        witnessed && pairings && worst <= 1e-10,
        format!("decide(I, I) = {:?}, pairing {p0:.12} at 0 and {p3:.1e} at 1/3, crossing off by {worst:.1e}", dec.verdict),
    ))
}

fn depol_table() -> Result<SweepTable, String> {
    let spec = lib(SweepSpec::new(Family::DepolPair, 41, None))?;
    lib(run_sweep(&spec, &SolveOptions::default(), jobs()))
}

fn depol_boundary(table: &SweepTable) -> Outcome {
    let mut checked = 0;
    let mut wrong = Vec::new();
    for row in &table.rows {
        let (q0, q1): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let s = q0 + (q0 * q1).sqrt() + q1 - 1.0;
        if s.abs() <= 0.005 {
            continue;
        }
        checked += 1;
        let want = if s > 0.0 { "1" } else { "0" };
        if row[2] != want {
            wrong.push(format!("({q0}, {q1}) gave {}", row[2]));
        }
    }
    Ok((
        wrong.is_empty() && checked > 0,
        format!("{checked} points outside the band, {} disagreements {:?}", wrong.len(), wrong.iter().take(3).collect::<Vec<_>>()),
    ))
}

fn xi_boundary() -> Outcome {
    let spec = lib(SweepSpec::new(Family::XiSelfK, 41, Some(2)))?;
    let table = lib(run_sweep(&spec, &SolveOptions::default(), jobs()))?;
    let step = 0.025;
    let mut worst: f64 = 0.0;
    let mut bad = Vec::new();
    for b in &table.boundary {
        let p: f64 = b[0].parse().unwrap();
        let thr = xi_self_threshold(p);
        let Ok(q) = b[1].parse::<f64>() else {
            bad.push(format!("p = {p}: no compatible q"));
            continue;
        };
        worst = worst.max(q - thr);
        if q < thr - 1e-9 || q > thr + step + 1e-9 {
            bad.push(format!("p = {p}: flip at {q}, threshold {thr:.4}"));
        }
        // Above the flip every point must stay compatible.
        let above_ok = table
            .rows
            .iter()
            .filter(|r| r[0] == b[0] && r[1].parse::<f64>().unwrap() >= q)
            .all(|r| r[2] == "1");
        if !above_ok {
            bad.push(format!("p = {p}: incompatible point above the flip"));
        }
    }
    Ok((
        bad.is_empty(),
        format!("{} p values, largest flip lag {worst:.4} (step {step}) {bad:?}", table.boundary.len()),
    ))
}

fn k_nesting() -> Outcome {
    let mut regions = Vec::new();
    for k in [2usize, 3, 4] {
        let spec = lib(SweepSpec::new(Family::XiSelfK, 21, Some(k)))?;
        let table = lib(run_sweep(&spec, &SolveOptions::default(), jobs()))?;
        regions.push(table);
    }
    let n = regions[0].rows.len();
    let mut inconclusive = 0;
    let mut nesting = 0;
    let mut mp_missing = 0;
    for i in 0..n {
        let v: Vec<&str> = regions.iter().map(|t| t.rows[i][2].as_str()).collect();
        inconclusive += v.iter().filter(|s| **s == "?").count();
        // region(k+1) ⊆ region(k)
        for w in v.windows(2) {
            if w[1] == "1" && w[0] == "0" {
                nesting += 1;
            }
        }
        let (p, q): (f64, f64) = (regions[0].rows[i][0].parse().unwrap(), regions[0].rows[i][1].parse().unwrap());
        if q >= xi_measure_prepare_threshold(p) - 1e-12 && v.iter().any(|s| *s != "1") {
            mp_missing += 1;
        }
    }
    let sizes: Vec<usize> = regions.iter().map(|t| t.rows.iter().filter(|r| r[2] == "1").count()).collect();
    Ok((
        nesting == 0 && mp_missing == 0 && inconclusive == 0,
        format!(
            "{n} points, region sizes k=2,3,4: {sizes:?}, nesting violations {nesting}, measure-and-prepare misses {mp_missing}, inconclusive {inconclusive}"
        ),
    ))
}

fn jordan_equivalence() -> Outcome {
    let mut r = rng(2024);
    let opts = SolveOptions::default();
    let omega = lib(standard_channel(&StandardKind::Depolarizing, 2))?;
    let sample = |r: &mut QccRng| -> Result<Channel, String> {
        loop {
            let env = r.random_range(1..=4);
            let lambda = uniform(r, 0.3, 1.0);
            let ch = lib(random_channel(r, 2, 2, env).mix(lambda, &omega))?;
            if invert_map(ch.rep()).is_ok() {
                return Ok(ch);
            }
        }
    };
    let (mut agree, mut inconclusive, mut compatible) = (0, 0, 0);
    let mut disagree = Vec::new();
    for i in 0..100 {
        let f = sample(&mut r)?;
        let g = sample(&mut r)?;
        let a = lib(decide(&f, &g, DecideMode::Compat, &opts))?.verdict;
        let b = lib(decide(&f, &g, DecideMode::Jordan, &opts))?.verdict;
        if a == Verdict::Inconclusive || b == Verdict::Inconclusive {
            inconclusive += 1;
        } else if a == b {
            agree += 1;
            compatible += usize::from(a == Verdict::Compatible);
        } else {
            disagree.push(format!("pair {i}: {a:?} vs {b:?}"));
        }
    }
    Ok((
        disagree.is_empty() && inconclusive <= 2,
        format!("{agree} agree ({compatible} compatible), {inconclusive} inconclusive, disagreements {disagree:?}"),
    ))
}

fn property_suites() -> Outcome {
    let suites: [Suite; 15] = [
        ("Jordan marginals", common::jordan_marginals),
        ("bilinearity/swap/composition", common::jordan_algebra),
        ("measure-and-prepare formula", common::measure_prepare_formula),
        ("unitary products", common::unitary_jordan_not_cp),
        ("PVM three-way equivalence", common::pvm_three_way),
        ("state round trip, full rank", |s| common::state_channel_round_trip(s, false)),
        ("state round trip, rank-deficient", |s| common::state_channel_round_trip(s, true)),
        ("state/channel verdicts, full rank", |s| common::state_channel_equivalence(s, false)),
        ("state/channel verdicts, rank-deficient", |s| common::state_channel_equivalence(s, true)),
        ("absorption", common::absorption),
        ("compat sandwich", common::compat_sandwich),
        ("Jordan sandwich", common::jordan_sandwich),
        ("pairing identity", common::pairing_identity),
        ("convexity and half-mixing", common::convexity),
        ("POVM lift/extract", common::povm_lift_extract),
    ];
    let mut failed = Vec::new();
    let mut total = 0;
    for (name, check) in suites {
        let (ok, failures) = common::run_many(100, check);
        total += ok + failures.len();
        if !failures.is_empty() {
            failed.push(format!("{name}: {}", failures[0]));
        }
    }
    Ok((failed.is_empty(), format!("{total} instances over {} suites; failures {failed:?}", suites.len())))
}

fn jordan_hull(table: &SweepTable) -> Outcome {
    let (mut outside, mut missed) = (0, 0);
    for row in &table.rows {
        let (q0, q1): (f64, f64) = (row[0].parse().unwrap(), row[1].parse().unwrap());
        let cp = row[3] == "1";
        let hull = in_convex_polygon((q0, q1), &DEPOL_HULL, 1e-12);
        outside += usize::from(cp && !hull);
        missed += usize::from(!cp && hull);
    }
    Ok((
        outside >= 1 && missed >= 1,
        format!("{outside} Jordan-CP points outside the hull, {missed} hull points not Jordan-CP"),
    ))
}

fn report(n: usize, name: &str, budget: Duration, run: impl FnOnce() -> Outcome) -> bool {
    let start = Instant::now();
    let outcome = run();
    let elapsed = start.elapsed();
    let (pass, detail) = match outcome {
        Ok((ok, detail)) => (ok && elapsed <= budget, detail),
        Err(e) => (false, format!("error: {e}")),
    };
    println!(
        "criterion {n} {} {name} [{:.1}s of {}s]: {detail}",
        if pass { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs()
    );
    pass
}

fn main() -> ExitCode {
    let min = |m: u64| Duration::from_secs(60 * m);
    let mut results = Vec::new();
    results.push(report(1, "counterexample replay", Duration::from_secs(5), replay_counterexample));
    results.push(report(2, "no-broadcasting", Duration::from_secs(5), no_broadcasting));
    let mut table = None;
    results.push(report(3, "depolarizing-pair boundary, 41×41", min(10), || {
        let t = depol_table()?;
        let out = depol_boundary(&t);
        table = Some(t);
        out
    }));
    results.push(report(4, "Ξ self-compatibility boundary, 41 p values", min(10), xi_boundary));
    results.push(report(5, "k-region nesting, 21×21, k = 2, 3, 4", min(30), k_nesting));
    results.push(report(6, "compat/Jordan agreement, 100 invertible pairs", min(15), jordan_equivalence));
    results.push(report(7, "property suites, 100 instances each", min(10), property_suites));
    results.push(report(8, "Jordan-CP region vs hull, 41×41", min(10), || match &table {
        Some(t) => jordan_hull(t),
        None => Err("depolarizing sweep unavailable".into()),
    }));
    let passed = results.iter().filter(|&&p| p).count();
    println!("acceptance: {passed} of {} criteria passed", results.len());
    if passed == results.len() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
