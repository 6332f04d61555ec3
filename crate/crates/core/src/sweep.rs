//! Parameter sweeps over the qubit channel families, producing CSV tables
//! of verdicts plus the extracted boundary per column.

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::analytic::{in_convex_polygon, jordan_product_cp, XiParams, DEPOL_HULL};
use crate::channels::{standard_channel, StandardKind};
use crate::error::{Error, Result};
use crate::sdp::decide::{decide, decide_self_compat, DecideMode, Verdict};
use crate::sdp::SolveOptions;

/// Eigenvalue slack for the standard Jordan product CP test.
pub const JORDAN_CP_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// k-self-compatibility of `Ξ_{p,q}`.
    XiSelfK,
    /// Self-compatibility, standard Jordan CP and measure-and-prepare
    /// regions of `Ξ_{p,q}`.
    XiJordanVsSelf,
    /// Compatibility and standard Jordan CP of `(Ω_{q₀}, Ω_{q₁})`.
    DepolPair,
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "xi_self_k" => Ok(Family::XiSelfK),
            "xi_jordan_vs_self" => Ok(Family::XiJordanVsSelf),
            "depol_pair" => Ok(Family::DepolPair),
            _ => Err(Error::Parse(format!(
                "unknown sweep family {s:?} (xi_self_k, xi_jordan_vs_self, depol_pair)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepSpec {
    pub family: Family,
    /// Points per axis, including both endpoints.
    pub grid: usize,
    pub k: Option<usize>,
    /// Restrict extension searches to swap-invariant operators.
    pub symmetric: bool,
}

impl SweepSpec {
    pub fn new(family: Family, grid: usize, k: Option<usize>) -> Result<Self> {
        if grid < 2 {
            return Err(Error::ParameterOutOfRange(format!("grid = {grid} must be at least 2")));
        }
        if family == Family::XiSelfK && k.is_some_and(|k| k < 2) {
            return Err(Error::ParameterOutOfRange("k must be at least 2".into()));
        }
        Ok(Self {
            family,
            grid,
            k,
            symmetric: false,
        })
    }

    fn k(&self) -> usize {
        self.k.unwrap_or(2)
    }
}

/// Verdict table in row-major grid order plus the boundary section.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub boundary_header: Vec<String>,
    pub boundary: Vec<Vec<String>>,
}

impl SweepTable {
    /// Column `col` of every row.
    pub fn column(&self, col: usize) -> Vec<&str> {
        self.rows.iter().map(|r| r[col].as_str()).collect()
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let csv_err = |e: csv::Error| Error::Parse(e.to_string());
        let io_err = |e: std::io::Error| Error::Parse(e.to_string());
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.header).map_err(csv_err)?;
        for r in &self.rows {
            w.write_record(r).map_err(csv_err)?;
        }
        let mut out = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        out.write_all(b"\n# boundary\n").map_err(io_err)?;
        let mut w = csv::Writer::from_writer(out);
        w.write_record(&self.boundary_header).map_err(csv_err)?;
        for r in &self.boundary {
            w.write_record(r).map_err(csv_err)?;
        }
        w.flush().map_err(io_err)
    }
}

fn axis(grid: usize) -> Vec<f64> {
    (0..grid).map(|i| i as f64 / (grid - 1) as f64).collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn flag(b: bool) -> &'static str {
    if b {
        "1"
    } else {
        "0"
    }
}

/// First grid value in a column whose verdict is `"1"`; empty when none.
fn first_compatible(values: &[f64], verdicts: &[&str]) -> String {
    values
        .iter()
        .zip(verdicts)
        .find(|(_, v)| **v == "1")
        .map_or_else(String::new, |(x, _)| fmt(*x))
}

fn run_points<T, F>(points: &[T], jobs: usize, f: F) -> Result<Vec<Vec<String>>>
where
    T: Sync,
    F: Fn(&T) -> Result<Vec<String>> + Sync + Send,
{
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::Parse(e.to_string()))?;
    pool.install(|| points.par_iter().map(&f).collect())
}

fn verdict_str(v: Verdict) -> String {
    v.symbol().to_string()
}

/// Runs the sweep with at most `jobs` concurrent solves; output order does
/// not depend on `jobs`.
pub fn run_sweep(spec: &SweepSpec, opts: &SolveOptions, jobs: usize) -> Result<SweepTable> {
    let xs = axis(spec.grid);
    match spec.family {
        Family::XiSelfK | Family::XiJordanVsSelf => {
            let points: Vec<(f64, f64)> = xs
                .iter()
                .flat_map(|&p| xs.iter().map(move |&q| (p, q)))
                .filter(|(p, q)| p + q <= 1.0 + 1e-12)
                .map(|(p, q)| (p, q.min(1.0 - p)))
                .collect();
            let k = spec.k();
            let xi_family = spec.family == Family::XiSelfK;
            let rows = run_points(&points, jobs, |&(p, q)| {
                let xp = XiParams::new(p, q)?;
                let ch = xp.channel();
                let v = decide_self_compat(&ch, if xi_family { k } else { 2 }, spec.symmetric, opts)?.verdict;
                let mut row = vec![fmt(p), fmt(q), verdict_str(v)];
                if xi_family {
                    row.push(k.to_string());
                } else {
                    row.push(flag(jordan_product_cp(&ch, &ch, JORDAN_CP_TOL)?).into());
                    row.push(flag(ch.rep().validate().eb_2x2 == Some(true)).into());
                }
                Ok(row)
            })?;
            let n_cols = if xi_family { 1 } else { 3 };
            let mut boundary = Vec::new();
            for &p in &xs {
                let col: Vec<&Vec<String>> = rows.iter().filter(|r| r[0] == fmt(p)).collect();
                let qs: Vec<f64> = col.iter().map(|r| r[1].parse().expect("formatted float")).collect();
                let mut b = vec![fmt(p)];
                for c in 0..n_cols {
                    let vs: Vec<&str> = col.iter().map(|r| r[2 + c].as_str()).collect();
                    b.push(first_compatible(&qs, &vs));
                }
                boundary.push(b);
            }
            let (header, boundary_header) = if xi_family {
                (vec!["p", "q", "verdict", "k"], vec!["p", "q_boundary"])
            } else {
                (
                    vec!["p", "q", "verdict_self", "verdict_jordan_std", "verdict_mp"],
                    vec!["p", "q_self", "q_jordan_std", "q_mp"],
                )
            };
            Ok(SweepTable {
                header: header.into_iter().map(String::from).collect(),
                rows,
                boundary_header: boundary_header.into_iter().map(String::from).collect(),
                boundary,
            })
        }
        Family::DepolPair => {
            let points: Vec<(f64, f64)> = xs.iter().flat_map(|&a| xs.iter().map(move |&b| (a, b))).collect();
            let rows = run_points(&points, jobs, |&(q0, q1)| {
                let f = standard_channel(&StandardKind::PartialDepolarizing(q0), 2)?;
                let g = standard_channel(&StandardKind::PartialDepolarizing(q1), 2)?;
                let v = decide(&f, &g, DecideMode::Compat, opts)?.verdict;
                Ok(vec![
                    fmt(q0),
                    fmt(q1),
                    verdict_str(v),
                    flag(jordan_product_cp(&f, &g, JORDAN_CP_TOL)?).into(),
                    flag(in_convex_polygon((q0, q1), &DEPOL_HULL, 1e-12)).into(),
                ])
            })?;
            let boundary = xs
                .iter()
                .enumerate()
                .map(|(i, &q0)| {
                    let col = &rows[i * xs.len()..(i + 1) * xs.len()];
                    let mut b = vec![fmt(q0)];
                    for c in 2..5 {
                        let vs: Vec<&str> = col.iter().map(|r| r[c].as_str()).collect();
                        b.push(first_compatible(&xs, &vs));
                    }
                    b
                })
                .collect();
            Ok(SweepTable {
                header: ["q0", "q1", "verdict_compat", "verdict_jordan_std", "in_hull"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
                rows,
                boundary_header: ["q0", "q1_compat", "q1_jordan_std", "q1_hull"]
                    .into_iter()
                    .map(String::from)
                    .collect(),
                boundary,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_depol_sweep_is_deterministic() {
        let spec = SweepSpec::new(Family::DepolPair, 3, None).unwrap();
        let a = run_sweep(&spec, &SolveOptions::default(), 1).unwrap();
        let b = run_sweep(&spec, &SolveOptions::default(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.rows.len(), 9);
        // (0, 0) is the identity pair; (0, 1) pairs with the constant channel.
        assert_eq!(a.rows[0][2], "0");
        assert_eq!(a.rows[2][2], "1");
        let mut buf = Vec::new();
        a.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("q0,q1,verdict_compat,verdict_jordan_std,in_hull\n"));
        assert!(text.contains("\n# boundary\nq0,q1_compat,q1_jordan_std,q1_hull\n"));
    }

    #[test]
    fn spec_validation() {
        assert!(SweepSpec::new(Family::XiSelfK, 1, None).is_err());
        assert!(SweepSpec::new(Family::XiSelfK, 5, Some(1)).is_err());
        assert!("nope".parse::<Family>().is_err());
    }
}
