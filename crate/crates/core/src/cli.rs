//! The `qcc` command-line interface.
//!
//! Exit codes: 0 compatible / valid, 1 incompatible / invalid,
//! 2 inconclusive, 64 unreadable input or usage error, 65 dimension
//! mismatch, 70 solver or internal failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::Error;
use crate::io::{load_channel, CertificateJson};
use crate::reference::{verify_reference, ReferenceFixtures};
use crate::sdp::decide::{decide, decide_self_compat, DecideMode, Decision, Verdict};
use crate::sdp::SolveOptions;
use crate::sweep::{run_sweep, Family, SweepSpec};

pub const EXIT_USAGE: i32 = 64;
pub const EXIT_DATA: i32 = 65;
pub const EXIT_SOFTWARE: i32 = 70;

#[derive(Parser, Debug)]
#[command(name = "qcc", version, about = "Decide compatibility of quantum channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum SolverArg {
    Ipm,
    Projection,
}

#[derive(Args, Debug, Clone)]
pub struct SolverFlags {
    /// Decision tolerance on the optimal shift.
    #[arg(long)]
    pub tol: Option<f64>,
    #[arg(long, value_enum, default_value = "ipm")]
    pub solver: SolverArg,
}

impl SolverFlags {
    pub fn options(&self) -> SolveOptions {
        let mut o = match self.solver {
            SolverArg::Ipm => SolveOptions::default(),
            SolverArg::Projection => SolveOptions::projection(),
        };
        if let Some(t) = self.tol {
            o.decision_tol = t;
        }
        o
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Decide whether two channels are compatible.
    Check {
        a: PathBuf,
        b: PathBuf,
        /// compat, jordan or ppt-compat.
        #[arg(long, default_value = "compat")]
        mode: String,
        /// Where to write the certificate.
        #[arg(long)]
        cert: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Decide whether k copies of a channel are compatible.
    SelfCompat {
        a: PathBuf,
        #[arg(long, default_value_t = 2)]
        k: usize,
        /// Restrict the search to swap-invariant extensions.
        #[arg(long)]
        symmetric: bool,
        #[arg(long)]
        cert: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Sweep a qubit channel family over a parameter grid and write CSV.
    Sweep {
        /// xi_self_k, xi_jordan_vs_self or depol_pair.
        family: String,
        #[arg(long, default_value_t = 21)]
        grid: usize,
        #[arg(long)]
        k: Option<usize>,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Concurrent solves.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Restrict extension searches to swap-invariant operators.
        #[arg(long)]
        symmetric: bool,
        #[command(flatten)]
        solver: SolverFlags,
    },
    /// Certificate utilities.
    Witness {
        #[command(subcommand)]
        action: WitnessAction,
    },
    /// Replay the reference examples and report pass/fail per item.
    VerifyPaper {
        /// Directory with replacement fixture files.
        #[arg(long)]
        fixtures: Option<PathBuf>,
        #[command(flatten)]
        solver: SolverFlags,
    },
}

#[derive(Subcommand, Debug)]
pub enum WitnessAction {
    /// Re-check a certificate against the channels it refers to.
    Verify {
        cert: PathBuf,
        a: PathBuf,
        b: Option<PathBuf>,
    },
}

/// Exit code for a library error.
pub fn error_code(e: &Error) -> i32 {
    match e {
        Error::Parse(_)
        | Error::NotHermitian { .. }
        | Error::NotChannel(_)
        | Error::NotPsd { .. }
        | Error::InvalidShape
        | Error::ParameterOutOfRange(_) => EXIT_USAGE,
        Error::DimensionMismatch(_) | Error::ShapeMismatch { .. } => EXIT_DATA,
        _ => EXIT_SOFTWARE,
    }
}

fn fail(e: Error) -> i32 {
    eprintln!("qcc: {e}");
    error_code(&e)
}

macro_rules! tryx {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail(e),
        }
    };
}

fn print_decision(dec: &Decision) {
    let verdict = match dec.verdict {
        Verdict::Compatible => "compatible",
        Verdict::Incompatible => "incompatible",
        Verdict::Inconclusive => "inconclusive",
    };
    println!("verdict: {verdict}");
    println!("alpha: {:.12e}", dec.alpha);
    if let Some(b) = dec.beta {
        println!("beta: {b:.12e}");
    }
    if let Some(v) = &dec.verification {
        println!("witness margin: {:.12e} (min eigenvalue {:.3e})", v.margin, v.min_eigenvalue);
    }
    if let Some(n) = &dec.note {
        println!("note: {n}");
    }
}

/// Serializes the certificate, reads it back, re-verifies it and only then
/// writes it. A certificate that fails re-verification downgrades the
/// verdict to inconclusive.
fn emit_certificate(dec: &Decision, f: &crate::channels::Channel, g: Option<&crate::channels::Channel>, path: Option<&Path>) -> Result<Verdict, Error> {
    let Some(cert) = CertificateJson::from_decision(dec, f, g) else {
        return Ok(dec.verdict);
    };
    let text = cert.to_json();
    let back = CertificateJson::from_json(&text)?;
    let v = back.verify(f, g)?;
    if !v.valid {
        eprintln!("qcc: {} certificate failed re-verification: {v:?}", back.mode());
        return Ok(Verdict::Inconclusive);
    }
    if let Some(p) = path {
        std::fs::write(p, text).map_err(|e| Error::Parse(format!("{}: {e}", p.display())))?;
        println!("certificate: {} ({})", p.display(), back.mode());
    }
    Ok(dec.verdict)
}

pub fn run(cli: Cli) -> i32 {
    match cli.command {
        Command::Check {
            a,
            b,
            mode,
            cert,
            solver,
        } => {
            let mode: DecideMode = tryx!(mode.parse());
            let f = tryx!(load_channel(&a));
            let g = tryx!(load_channel(&b));
            let dec = tryx!(decide(&f, &g, mode, &solver.options()));
            print_decision(&dec);
            tryx!(emit_certificate(&dec, &f, Some(&g), cert.as_deref())).exit_code()
        }
        Command::SelfCompat {
            a,
            k,
            symmetric,
            cert,
            solver,
        } => {
            if k < 2 {
                return fail(Error::ParameterOutOfRange(format!("k = {k} must be at least 2")));
            }
            let f = tryx!(load_channel(&a));
            let dec = tryx!(decide_self_compat(&f, k, symmetric, &solver.options()));
            print_decision(&dec);
            tryx!(emit_certificate(&dec, &f, None, cert.as_deref())).exit_code()
        }
        Command::Sweep {
            family,
            grid,
            k,
            out,
            jobs,
            symmetric,
            solver,
        } => {
            let family: Family = tryx!(family.parse());
            let mut spec = tryx!(SweepSpec::new(family, grid, k));
            spec.symmetric = symmetric;
            let table = tryx!(run_sweep(&spec, &solver.options(), jobs));
            match out {
                Some(p) => {
                    let file = tryx!(std::fs::File::create(&p).map_err(|e| Error::Parse(format!("{}: {e}", p.display()))));
                    tryx!(table.write_csv(std::io::BufWriter::new(file)));
                }
                None => tryx!(table.write_csv(std::io::stdout().lock())),
            }
            0
        }
        Command::Witness {
            action: WitnessAction::Verify { cert, a, b },
        } => {
            let c = tryx!(CertificateJson::load(&cert));
            let f = tryx!(load_channel(&a));
            let g = match b {
                Some(p) => Some(tryx!(load_channel(&p))),
                None => None,
            };
            let v = tryx!(c.verify(&f, g.as_ref()));
            println!(
                "{} certificate: {} (margin {:.12e}, min eigenvalue {:.3e}, residual {:.3e})",
                c.mode(),
                if v.valid { "valid" } else { "INVALID" },
                v.margin,
                v.min_eigenvalue,
                v.residual
            );
            if v.valid {
                0
            } else {
                1
            }
        }
        Command::VerifyPaper { fixtures, solver } => {
            let fx = match fixtures {
                Some(dir) => tryx!(ReferenceFixtures::from_dir(&dir)),
                None => ReferenceFixtures::embedded(),
            };
            let items = verify_reference(&fx, &solver.options());
            let mut failed = 0;
            for it in &items {
                println!("[{}] {} — {}", if it.pass { "PASS" } else { "FAIL" }, it.name, it.detail);
                failed += usize::from(!it.pass);
            }
            println!("{} of {} checks passed", items.len() - failed, items.len());
            i32::from(failed > 0)
        }
    }
}

/// Parses `args` (including the program name) and runs; usage errors exit
/// with 64.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            code
        }
    }
}
