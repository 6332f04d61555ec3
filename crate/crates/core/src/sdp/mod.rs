//! Small dense SDP engine and the compatibility problems built on it.
//!
//! Problems are stated over complex Hermitian variables with structured
//! linear constraints ([`LinOp`]). [`solve`] vectorizes them in the real
//! orthonormal Hermitian basis, eliminates free variables and redundant
//! rows, and runs either the interior-point method ([`ipm`]) on the real
//! embedding or Dykstra projections ([`projection`]).
//!
//! With [`Objective::MaxShift`] every PSD variable `X_v` is constrained by
//! `X_v ⪰ t·I` and `t` is maximized; the optimum is `α` and the dual bound
//! is `β`.

pub mod decide;
pub mod ipm;
pub mod projection;
mod qr;

use nalgebra::{DMatrix, DVector};

use crate::channels::{Channel, LinearMapRep, Povm};
use crate::error::{Error, Result};
use crate::jordan::apply_pair;
use qr::{pivoted_qr, PivotedQr};

use crate::linalg::{
    coords_to_herm, embed_identity, herm_basis, herm_dim, herm_to_coords, herm_to_coords_into,
    max_abs, permute, ptrace, ptranspose, CMatrix, HermitianMatrix, TensorShape, C64,
};

pub use decide::{
    decide, decide_povm, decide_self_compat, Certificate, Decision, DecideMode, PovmDecision, Verdict,
};
pub use ipm::{IpmSettings, IpmStatus};

/// Compatible iff `α ≥ −DECISION_TOL`; incompatible iff `β ≤ −DECISION_TOL`.
pub const DECISION_TOL: f64 = 1e-7;
/// Relative singular-value cutoff for rank decisions during reduction.
pub const REDUNDANCY_TOL: f64 = 1e-10;
/// Largest real-embedded size for the interior-point method.
pub const IPM_SIZE_CAP: usize = 512;
/// Largest real-embedded size for projection mode.
pub const PROJECTION_SIZE_CAP: usize = 2048;

/// `(I⊗f⊗g)` on operators over `X⊗X₁⊗X₂`, with its adjoint.
#[derive(Clone, Debug)]
pub struct PairMap {
    f: LinearMapRep,
    g: LinearMapRep,
    f_adj: LinearMapRep,
    g_adj: LinearMapRep,
    d: usize,
}

impl PairMap {
    pub fn new(f: &LinearMapRep, g: &LinearMapRep) -> Result<Self> {
        if f.d_in() != g.d_in() {
            return Err(Error::DimensionMismatch(format!(
                "maps with inputs {} and {}",
                f.d_in(),
                g.d_in()
            )));
        }
        Ok(Self {
            f: f.clone(),
            g: g.clone(),
            f_adj: f.adjoint(),
            g_adj: g.adjoint(),
            d: f.d_in(),
        })
    }
}

/// Structured linear operator between Hermitian operator spaces.
#[derive(Clone, Debug)]
pub enum LinOp {
    Identity,
    Scaled(f64, Box<LinOp>),
    /// Partial trace over `traced` factors of `dims`.
    PartialTrace { dims: Vec<usize>, traced: Vec<usize> },
    PartialTranspose { dims: Vec<usize>, factor: usize },
    /// Tensor-factor permutation `X ↦ P X P†`.
    Permute { dims: Vec<usize>, perm: Vec<usize> },
    /// `(I⊗f⊗g)`.
    Pair(Box<PairMap>),
}

impl LinOp {
    pub fn partial_trace(dims: &[usize], traced: &[usize]) -> Self {
        LinOp::PartialTrace {
            dims: dims.to_vec(),
            traced: traced.to_vec(),
        }
    }

    pub fn negated(self) -> Self {
        LinOp::Scaled(-1.0, Box::new(self))
    }

    pub fn apply(&self, x: &CMatrix) -> Result<CMatrix> {
        match self {
            LinOp::Identity => Ok(x.clone()),
            LinOp::Scaled(s, op) => Ok(op.apply(x)? * C64::new(*s, 0.0)),
            LinOp::PartialTrace { dims, traced } => ptrace(x, dims, traced),
            LinOp::PartialTranspose { dims, factor } => ptranspose(x, dims, *factor),
            LinOp::Permute { dims, perm } => permute(x, dims, perm),
            LinOp::Pair(p) => apply_pair(&p.f, &p.g, x, p.d),
        }
    }

    pub fn adjoint(&self, y: &CMatrix) -> Result<CMatrix> {
        match self {
            LinOp::Identity => Ok(y.clone()),
            LinOp::Scaled(s, op) => Ok(op.adjoint(y)? * C64::new(*s, 0.0)),
            LinOp::PartialTrace { dims, traced } => embed_identity(y, dims, traced),
            LinOp::PartialTranspose { dims, factor } => ptranspose(y, dims, *factor),
            LinOp::Permute { dims, perm } => {
                // Result factor k is input factor perm[k]; undo on permuted dims.
                let pdims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
                let mut inv = vec![0; perm.len()];
                for (k, &p) in perm.iter().enumerate() {
                    inv[p] = k;
                }
                permute(y, &pdims, &inv)
            }
            LinOp::Pair(p) => {
                let step = crate::linalg::apply_on_factor(
                    y,
                    &[p.d, p.f.d_out(), p.g.d_out()],
                    1,
                    p.d,
                    |b| p.f_adj.apply_raw(b).unwrap(),
                )?;
                crate::linalg::apply_on_factor(&step, &[p.d, p.d, p.g.d_out()], 2, p.d, |b| {
                    p.g_adj.apply_raw(b).unwrap()
                })
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum VarKind {
    Psd,
    Free,
}

#[derive(Clone, Debug)]
pub struct Variable {
    pub name: String,
    pub shape: TensorShape,
    pub kind: VarKind,
}

/// `Σ_(v, op) op(X_v) = rhs`.
#[derive(Clone, Debug)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(usize, LinOp)>,
    pub rhs: HermitianMatrix,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Objective {
    /// Maximize `t` subject to `X_v ⪰ t·I` on every PSD variable.
    MaxShift,
    Feasibility,
}

#[derive(Clone, Debug)]
pub struct SdpProblem {
    pub label: String,
    pub vars: Vec<Variable>,
    pub constraints: Vec<Constraint>,
    pub objective: Objective,
}

impl SdpProblem {
    pub fn new(label: impl Into<String>, objective: Objective) -> Self {
        Self {
            label: label.into(),
            vars: Vec::new(),
            constraints: Vec::new(),
            objective,
        }
    }

    pub fn add_var(&mut self, name: &str, shape: TensorShape, kind: VarKind) -> usize {
        self.vars.push(Variable {
            name: name.into(),
            shape,
            kind,
        });
        self.vars.len() - 1
    }

    /// Adds a constraint after checking every term maps into the rhs space.
    pub fn add_constraint(&mut self, name: &str, terms: Vec<(usize, LinOp)>, rhs: HermitianMatrix) -> Result<()> {
        for (v, op) in &terms {
            let var = self
                .vars
                .get(*v)
                .ok_or_else(|| Error::IllPosed(format!("constraint {name} uses unknown variable {v}")))?;
            let n = var.shape.dim();
            let img = op.apply(&CMatrix::identity(n, n))?;
            if img.nrows() != rhs.side() {
                return Err(Error::ShapeMismatch {
                    expected: rhs.side(),
                    found: img.nrows(),
                });
            }
        }
        self.constraints.push(Constraint {
            name: name.into(),
            terms,
            rhs,
        });
        Ok(())
    }

    /// Total side of the PSD variables after real embedding.
    pub fn embedded_size(&self) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Psd)
            .map(|v| 2 * v.shape.dim())
            .sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SolverMode {
    InteriorPoint,
    Projection,
}

#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub mode: SolverMode,
    pub decision_tol: f64,
    pub ipm: IpmSettings,
    pub projection_max_iter: usize,
    pub projection_tol: f64,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            mode: SolverMode::InteriorPoint,
            decision_tol: DECISION_TOL,
            ipm: IpmSettings::default(),
            projection_max_iter: 50_000,
            projection_tol: 1e-10,
        }
    }
}

impl SolveOptions {
    pub fn projection() -> Self {
        Self {
            mode: SolverMode::Projection,
            ..Self::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Feasible,
    Infeasible,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct Residuals {
    /// Largest entry of `Σ op(X_v) − rhs` over all constraints.
    pub primal: f64,
    /// Relative dual residual reported by the solver.
    pub dual: f64,
    /// Relative duality gap reported by the solver.
    pub gap: f64,
}

#[derive(Clone, Debug)]
pub struct SdpOutcome {
    pub status: SdpStatus,
    /// `α` estimate (the optimal shift; smallest eigenvalue for feasibility
    /// problems).
    pub value: f64,
    /// `β`, the dual bound, when the interior-point method produced one.
    pub dual_value: Option<f64>,
    /// One matrix per variable (PSD variables include the shift).
    pub primal: Option<Vec<HermitianMatrix>>,
    /// Multipliers `y_c`, one per constraint: the dual slack of PSD variable
    /// `v` is `−Σ_c op*_{c,v}(y_c)`.
    pub dual: Option<Vec<HermitianMatrix>>,
    pub residuals: Residuals,
    pub iterations: usize,
    /// Constraint rows removed as redundant (plus rows absorbed by free
    /// variables).
    pub removed_rows: usize,
    pub note: Option<String>,
}

/// Column layout of the vectorized problem.
struct Layout {
    /// (variable, offset, side) for PSD variables, offsets into `s`.
    psd: Vec<(usize, usize, usize)>,
    /// (variable, offset, side) for free variables, offsets into `f`.
    free: Vec<(usize, usize, usize)>,
    n_s: usize,
    n_f: usize,
    /// Column of the shift `t` in `f`.
    t_col: Option<usize>,
    /// (constraint, row offset, side).
    rows: Vec<(usize, usize, usize)>,
    m: usize,
}

impl Layout {
    fn new(p: &SdpProblem, with_shift: bool) -> Self {
        let mut psd = Vec::new();
        let mut free = Vec::new();
        let (mut n_s, mut n_f) = (0, 0);
        for (v, var) in p.vars.iter().enumerate() {
            let n = var.shape.dim();
            match var.kind {
                VarKind::Psd => {
                    psd.push((v, n_s, n));
                    n_s += herm_dim(n);
                }
                VarKind::Free => {
                    free.push((v, n_f, n));
                    n_f += herm_dim(n);
                }
            }
        }
        let t_col = if with_shift {
            n_f += 1;
            Some(n_f - 1)
        } else {
            None
        };
        let mut rows = Vec::new();
        let mut m = 0;
        for (c, con) in p.constraints.iter().enumerate() {
            let r = con.rhs.side();
            rows.push((c, m, r));
            m += herm_dim(r);
        }
        Self {
            psd,
            free,
            n_s,
            n_f,
            t_col,
            rows,
            m,
        }
    }

    fn column_of(&self, v: usize) -> (bool, usize, usize) {
        if let Some(&(_, off, n)) = self.psd.iter().find(|e| e.0 == v) {
            return (true, off, n);
        }
        let &(_, off, n) = self.free.iter().find(|e| e.0 == v).expect("variable in layout");
        (false, off, n)
    }
}

/// Dense raw system `A_s s + A_f f = b`.
fn assemble(p: &SdpProblem, lay: &Layout) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    let mut a_s = DMatrix::zeros(lay.m, lay.n_s);
    let mut a_f = DMatrix::zeros(lay.m, lay.n_f);
    let mut b = DVector::zeros(lay.m);
    let mut buf = Vec::new();
    for &(c, off, r) in &lay.rows {
        let con = &p.constraints[c];
        let rhs = herm_to_coords(con.rhs.matrix());
        b.rows_mut(off, rhs.len()).copy_from(&rhs);
        for k in 0..herm_dim(r) {
            let basis = herm_basis(r, k);
            for (v, op) in &con.terms {
                let (is_psd, col, n) = lay.column_of(*v);
                let adj = op.adjoint(&basis)?;
                buf.resize(herm_dim(n), 0.0);
                herm_to_coords_into(&adj, &mut buf);
                let target = if is_psd { &mut a_s } else { &mut a_f };
                for (j, val) in buf.iter().enumerate() {
                    target[(off + k, col + j)] += val;
                }
            }
        }
        if let Some(tc) = lay.t_col {
            // t·Σ op(I) over PSD terms.
            let mut img = CMatrix::zeros(r, r);
            for (v, op) in &con.terms {
                if p.vars[*v].kind == VarKind::Psd {
                    let n = p.vars[*v].shape.dim();
                    img += op.apply(&CMatrix::identity(n, n))?;
                }
            }
            let coords = herm_to_coords(&img);
            for (k, val) in coords.iter().enumerate() {
                a_f[(off + k, tc)] += val;
            }
        }
    }
    Ok((a_s, a_f, b))
}

/// Result of free-variable elimination and redundancy removal:
/// `rows · s = rhs` with orthonormal rows, cost `c_eff · s + c0`.
struct Reduction {
    a_s: DMatrix<f64>,
    b: DVector<f64>,
    rows: DMatrix<f64>,
    rhs: DVector<f64>,
    c_eff: DVector<f64>,
    c0: f64,
    /// Raw multipliers: `λ = w + lift · y`.
    w: DVector<f64>,
    lift: DMatrix<f64>,
    /// Pivoted QR of `A_f`, for primal recovery.
    free: PivotedQr,
    removed: usize,
}

/// `x − Q(Qᵀx)` column by column.
fn project_out(q: &DMatrix<f64>, x: &DMatrix<f64>) -> DMatrix<f64> {
    x - q * (q.transpose() * x)
}

fn reduce(a_s: DMatrix<f64>, a_f: &DMatrix<f64>, b: DVector<f64>, c_f: &DVector<f64>) -> Result<Reduction> {
    let m = b.len();
    let free = pivoted_qr(a_f, REDUNDANCY_TOL);
    let r = free.rank;
    // The objective must lie in the row space of A_f: c_f = A_fᵀ w.
    let cp = free.permute(c_f);
    let z = free
        .r11()
        .tr_solve_upper_triangular(&cp.rows(0, r).into_owned())
        .unwrap_or_else(|| DVector::zeros(r));
    let miss = (free.r.columns(r, a_f.ncols() - r).transpose() * &z - cp.rows(r, cp.len() - r)).norm();
    if miss > 1e-9 * (1.0 + c_f.norm()) {
        return Err(Error::IllPosed("objective unbounded along free variables".into()));
    }
    let w = &free.q * z;
    let c0 = w.dot(&b);
    let qa = project_out(&free.q, &a_s);
    let qb = &b - &free.q * (free.q.transpose() * &b);
    let c_eff = -(a_s.transpose() * &w);

    // QAᵀ·P = Q₂R₂, so the rows of QA in pivot order are R₂ᵀQ₂ᵀ.
    let red = pivoted_qr(&qa.transpose(), REDUNDANCY_TOL);
    let r2 = red.rank;
    let r11 = red.r11();
    let qbp = DVector::from_fn(m, |k, _| qb[red.perm[k]]);
    let rhs = r11
        .tr_solve_upper_triangular(&qbp.rows(0, r2).into_owned())
        .unwrap_or_else(|| DVector::zeros(r2));
    let inconsistency = (red.r.columns(r2, m - r2).transpose() * &rhs - qbp.rows(r2, m - r2)).norm();
    if inconsistency > 1e-8 * (1.0 + b.norm()) {
        return Err(Error::IllPosed(format!(
            "constraints are inconsistent (residual {inconsistency:e})"
        )));
    }
    // lift = Qproj·P·[R₁₁⁻¹; 0] so that A_sᵀ·lift = Q₂ and A_fᵀ·lift = 0.
    let r11_inv = r11
        .clone()
        .try_inverse()
        .unwrap_or_else(|| DMatrix::zeros(r2, r2));
    let mut scattered = DMatrix::zeros(m, r2);
    for (k, &p) in red.perm.iter().take(r2).enumerate() {
        scattered.set_row(p, &r11_inv.row(k));
    }
    let lift = project_out(&free.q, &scattered);
    let rows = red.q.transpose();
    Ok(Reduction {
        a_s,
        b,
        rows,
        rhs,
        c_eff,
        c0,
        w,
        lift,
        free,
        removed: m - r2,
    })
}

impl Reduction {
    fn recover_free(&self, s: &DVector<f64>) -> DVector<f64> {
        let resid = &self.b - &self.a_s * s;
        let r = self.free.rank;
        let head = self
            .free
            .r11()
            .solve_upper_triangular(&(self.free.q.transpose() * resid))
            .unwrap_or_else(|| DVector::zeros(r));
        let mut fp = DVector::zeros(self.free.perm.len());
        fp.rows_mut(0, r).copy_from(&head);
        self.free.unpermute(&fp)
    }

    fn multipliers(&self, y: &DVector<f64>) -> DVector<f64> {
        &self.w + &self.lift * y
    }
}

/// Real embedding `A + iB ↦ [[A, −B], [B, A]]`.
pub fn embed_real(h: &CMatrix) -> DMatrix<f64> {
    let n = h.nrows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let (bi, ii) = (i / n, i % n);
        let (bj, jj) = (j / n, j % n);
        let z = h[(ii, jj)];
        match (bi, bj) {
            (0, 0) | (1, 1) => z.re,
            (0, 1) => -z.im,
            _ => z.im,
        }
    })
}

/// Inverse of [`embed_real`], averaging the redundant blocks.
pub fn unembed_real(m: &DMatrix<f64>) -> CMatrix {
    let n = m.nrows() / 2;
    CMatrix::from_fn(n, n, |i, j| {
        let re = 0.5 * (m[(i, j)] + m[(n + i, n + j)]);
        let im = 0.5 * (m[(n + i, j)] - m[(i, n + j)]);
        C64::new(re, im)
    })
}

fn split_psd(lay: &Layout, s: &DVector<f64>) -> Vec<CMatrix> {
    lay.psd
        .iter()
        .map(|&(_, off, n)| coords_to_herm(&s.as_slice()[off..off + herm_dim(n)], n))
        .collect()
}

/// Assembles per-variable matrices and the largest original constraint
/// residual.
fn primal_matrices(
    p: &SdpProblem,
    lay: &Layout,
    s: &DVector<f64>,
    f: &DVector<f64>,
) -> Result<(Vec<HermitianMatrix>, f64)> {
    let t = lay.t_col.map_or(0.0, |c| f[c]);
    let psd = split_psd(lay, s);
    let mut mats: Vec<Option<CMatrix>> = vec![None; p.vars.len()];
    for (k, &(v, _, n)) in lay.psd.iter().enumerate() {
        mats[v] = Some(&psd[k] + CMatrix::identity(n, n) * C64::new(t, 0.0));
    }
    for &(v, off, n) in &lay.free {
        mats[v] = Some(coords_to_herm(&f.as_slice()[off..off + herm_dim(n)], n));
    }
    let mut out = Vec::with_capacity(p.vars.len());
    for (v, m) in mats.into_iter().enumerate() {
        let m = m.expect("every variable is laid out");
        out.push(HermitianMatrix::with_tolerance(m, p.vars[v].shape.clone(), 1e-9)?);
    }
    let mut res: f64 = 0.0;
    for con in &p.constraints {
        let r = con.rhs.side();
        let mut acc = -con.rhs.matrix().clone();
        for (v, op) in &con.terms {
            acc += op.apply(out[*v].matrix())?;
        }
        debug_assert_eq!(acc.nrows(), r);
        res = res.max(max_abs(&acc));
    }
    Ok((out, res))
}

fn multiplier_matrices(p: &SdpProblem, lay: &Layout, lambda: &DVector<f64>) -> Result<Vec<HermitianMatrix>> {
    lay.rows
        .iter()
        .map(|&(c, off, r)| {
            let m = coords_to_herm(&lambda.as_slice()[off..off + herm_dim(r)], r);
            HermitianMatrix::with_tolerance(m, p.constraints[c].rhs.shape().clone(), 1e-9)
        })
        .collect()
}

fn min_eig(m: &HermitianMatrix) -> f64 {
    m.min_eigenvalue().unwrap_or(f64::NEG_INFINITY)
}

pub fn solve(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpOutcome> {
    if p.vars.iter().all(|v| v.kind != VarKind::Psd) {
        return Err(Error::IllPosed("problem has no PSD variable".into()));
    }
    let size = p.embedded_size();
    let cap = match opts.mode {
        SolverMode::InteriorPoint => IPM_SIZE_CAP,
        SolverMode::Projection => PROJECTION_SIZE_CAP,
    };
    if size > cap {
        return Err(Error::SizeCap(format!(
            "real-embedded size {size} exceeds {cap} for {:?}",
            opts.mode
        )));
    }
    match opts.mode {
        SolverMode::InteriorPoint => solve_ipm(p, opts),
        SolverMode::Projection => solve_projection(p, opts),
    }
}

fn solve_ipm(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpOutcome> {
    let shift = p.objective == Objective::MaxShift;
    let lay = Layout::new(p, shift);
    let (a_s, a_f, b) = assemble(p, &lay)?;
    let mut c_f = DVector::zeros(lay.n_f);
    if let Some(tc) = lay.t_col {
        c_f[tc] = -1.0;
    }
    let red = reduce(a_s, &a_f, b, &c_f)?;

    let nb = lay.psd.len();
    let sides: Vec<usize> = lay.psd.iter().map(|e| 2 * e.2).collect();
    let block_of = |vec: &[f64], k: usize| -> DMatrix<f64> {
        let (_, off, n) = lay.psd[k];
        embed_real(&coords_to_herm(&vec[off..off + herm_dim(n)], n)) * 0.5
    };
    let mut a = Vec::with_capacity(red.rows.nrows());
    for i in 0..red.rows.nrows() {
        let row: Vec<f64> = red.rows.row(i).iter().cloned().collect();
        let blocks = (0..nb)
            .map(|k| {
                let (_, off, n) = lay.psd[k];
                let seg = &row[off..off + herm_dim(n)];
                if seg.iter().all(|v| v.abs() < 1e-15) {
                    None
                } else {
                    Some(block_of(&row, k))
                }
            })
            .collect();
        a.push(blocks);
    }
    let c: Vec<DMatrix<f64>> = (0..nb).map(|k| block_of(red.c_eff.as_slice(), k)).collect();
    let bp = ipm::BlockProblem {
        sides,
        a,
        b: red.rhs.clone(),
        c,
    };
    let sol = ipm::solve(&bp, &opts.ipm);

    let mut s = DVector::zeros(lay.n_s);
    for (k, &(_, off, n)) in lay.psd.iter().enumerate() {
        let h = unembed_real(&sol.x[k]);
        herm_to_coords_into(&h, &mut s.as_mut_slice()[off..off + herm_dim(n)]);
    }
    let f = red.recover_free(&s);
    let (primal, primal_res) = primal_matrices(p, &lay, &s, &f)?;
    let lambda = red.multipliers(&sol.y);
    let dual = multiplier_matrices(p, &lay, &lambda)?;

    let value = match lay.t_col {
        Some(tc) => f[tc],
        None => lay.psd.iter().map(|e| min_eig(&primal[e.0])).fold(f64::INFINITY, f64::min),
    };
    let dual_value = shift.then(|| -(sol.dobj + red.c0));
    let tol = opts.decision_tol;
    let usable = sol.status != IpmStatus::Failed;
    let status = if usable && value >= -tol && primal_res <= 1e-7 {
        SdpStatus::Feasible
    } else if usable && dual_value.is_some_and(|b| b <= -tol) {
        SdpStatus::Infeasible
    } else {
        SdpStatus::Inconclusive
    };
    let note = match sol.status {
        IpmStatus::Converged => None,
        IpmStatus::ReducedAccuracy => Some(format!(
            "reduced accuracy after {} iterations (primal {:.1e}, dual {:.1e}, gap {:.1e})",
            sol.iterations, sol.rel_primal, sol.rel_dual, sol.rel_gap
        )),
        IpmStatus::Failed => Some(format!(
            "no convergence after {} iterations (primal {:.1e}, dual {:.1e}, gap {:.1e})",
            sol.iterations, sol.rel_primal, sol.rel_dual, sol.rel_gap
        )),
    };
    let note = match (note, status) {
        (None, SdpStatus::Inconclusive) => Some(format!(
            "optimum within the ±{tol:e} band (α = {value:e})"
        )),
        (n, _) => n,
    };
    Ok(SdpOutcome {
        status,
        value,
        dual_value,
        primal: Some(primal),
        dual: usable.then_some(dual),
        residuals: Residuals {
            primal: primal_res,
            dual: sol.rel_dual,
            gap: sol.rel_gap,
        },
        iterations: sol.iterations,
        removed_rows: red.removed,
        note,
    })
}

fn solve_projection(p: &SdpProblem, opts: &SolveOptions) -> Result<SdpOutcome> {
    let lay = Layout::new(p, false);
    let (a_s, a_f, b) = assemble(p, &lay)?;
    let red = reduce(a_s, &a_f, b, &DVector::zeros(lay.n_f))?;
    let blocks: Vec<(usize, usize)> = lay.psd.iter().map(|e| (e.1, e.2)).collect();
    let run = projection::dykstra(
        &red.rows,
        &red.rhs,
        &blocks,
        opts.projection_max_iter,
        opts.projection_tol,
    );
    let f = red.recover_free(&run.point);
    let (primal, primal_res) = primal_matrices(p, &lay, &run.point, &f)?;
    let value = lay
        .psd
        .iter()
        .map(|e| min_eig(&primal[e.0]))
        .fold(f64::INFINITY, f64::min);
    let feasible = run.converged && primal_res <= 1e-7 && value >= -opts.decision_tol;
    Ok(SdpOutcome {
        status: if feasible {
            SdpStatus::Feasible
        } else {
            SdpStatus::Inconclusive
        },
        value,
        dual_value: None,
        primal: Some(primal),
        dual: None,
        residuals: Residuals {
            primal: primal_res,
            dual: f64::NAN,
            gap: f64::NAN,
        },
        iterations: run.iterations,
        removed_rows: red.removed,
        note: (!feasible).then(|| {
            format!(
                "projection stopped after {} iterations (affine residual {:.1e})",
                run.iterations, run.residual
            )
        }),
    })
}

fn shape3(a: usize, b: usize, c: usize) -> Result<TensorShape> {
    TensorShape::new(vec![a, b, c])
}

/// Compatibility problem for two maps given by Choi matrices on `X⊗Y₁`
/// and `X⊗Y₂`. Used directly for partially transposed pairs.
pub fn build_compat_chois(j1: &HermitianMatrix, j2: &HermitianMatrix, d: usize, ppt: bool) -> Result<SdpProblem> {
    if !j1.side().is_multiple_of(d) || !j2.side().is_multiple_of(d) {
        return Err(Error::DimensionMismatch("Choi sides not divisible by the input dimension".into()));
    }
    let (d1, d2) = (j1.side() / d, j2.side() / d);
    let dims = [d, d1, d2];
    let mut p = SdpProblem::new(if ppt { "ppt-compat" } else { "compat" }, Objective::MaxShift);
    let x = p.add_var("X", shape3(d, d1, d2)?, VarKind::Psd);
    let j1 = j1.reshaped(TensorShape::new(vec![d, d1])?)?;
    let j2 = j2.reshaped(TensorShape::new(vec![d, d2])?)?;
    p.add_constraint("Tr_Y2 X = J1", vec![(x, LinOp::partial_trace(&dims, &[2]))], j1)?;
    p.add_constraint("Tr_Y1 X = J2", vec![(x, LinOp::partial_trace(&dims, &[1]))], j2)?;
    if ppt {
        let y = p.add_var("X^TX", shape3(d, d1, d2)?, VarKind::Psd);
        p.add_constraint(
            "Y = X^TX",
            vec![
                (y, LinOp::Identity),
                (
                    x,
                    LinOp::PartialTranspose {
                        dims: dims.to_vec(),
                        factor: 0,
                    }
                    .negated(),
                ),
            ],
            HermitianMatrix::zeros(shape3(d, d1, d2)?),
        )?;
    }
    Ok(p)
}

pub fn build_compat(f: &Channel, g: &Channel, ppt: bool) -> Result<SdpProblem> {
    if f.d_in() != g.d_in() {
        return Err(Error::DimensionMismatch(format!(
            "input dimensions {} and {}",
            f.d_in(),
            g.d_in()
        )));
    }
    build_compat_chois(f.choi(), g.choi(), f.d_in(), ppt)
}

/// Jordan compatibility: free `A` on `X⊗X₁⊗X₂` with both middle marginals
/// `J(I)`, PSD variable `X = (I⊗f⊗g)(A)`.
pub fn build_jordan_compat(f: &Channel, g: &Channel) -> Result<SdpProblem> {
    let d = f.d_in();
    if g.d_in() != d {
        return Err(Error::DimensionMismatch(format!("input dimensions {d} and {}", g.d_in())));
    }
    let (d1, d2) = (f.d_out(), g.d_out());
    let mut p = SdpProblem::new("jordan", Objective::MaxShift);
    let x = p.add_var("X", shape3(d, d1, d2)?, VarKind::Psd);
    let a = p.add_var("A", shape3(d, d, d)?, VarKind::Free);
    let pair = PairMap::new(f.rep(), g.rep())?;
    p.add_constraint(
        "X = (I⊗f⊗g)(A)",
        vec![(x, LinOp::Identity), (a, LinOp::Pair(Box::new(pair)).negated())],
        HermitianMatrix::zeros(shape3(d, d1, d2)?),
    )?;
    let ji = identity_choi(d)?;
    let dims = [d, d, d];
    p.add_constraint("Tr_X1 A = J(I)", vec![(a, LinOp::partial_trace(&dims, &[1]))], ji.clone())?;
    p.add_constraint("Tr_X2 A = J(I)", vec![(a, LinOp::partial_trace(&dims, &[2]))], ji)?;
    Ok(p)
}

fn identity_choi(d: usize) -> Result<HermitianMatrix> {
    let mut m = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            m[(i * d + i, j * d + j)] = C64::new(1.0, 0.0);
        }
    }
    HermitianMatrix::new(m, TensorShape::new(vec![d, d])?)
}

/// Largest complex side accepted by [`build_k_extension`].
pub const K_EXTENSION_MAX_SIDE: usize = PROJECTION_SIZE_CAP / 2;

/// `k` copies of `f`: variable on `X⊗Y^{⊗k}` whose every single-copy
/// marginal is `J(f)`. With `symmetric`, the variable is additionally
/// restricted to be invariant under swapping neighbouring copies.
pub fn build_k_extension(f: &Channel, k: usize, symmetric: bool) -> Result<SdpProblem> {
    if k < 2 {
        return Err(Error::ParameterOutOfRange(format!("k = {k} (need k ≥ 2)")));
    }
    let (d, dy) = (f.d_in(), f.d_out());
    let side = (0..k).try_fold(d, |acc, _| acc.checked_mul(dy));
    match side {
        Some(s) if s <= K_EXTENSION_MAX_SIDE => {}
        _ => {
            return Err(Error::SizeCap(format!(
                "{k} copies of a {d}→{dy} channel exceed side {K_EXTENSION_MAX_SIDE}"
            )))
        }
    }
    let mut dims = vec![d];
    dims.extend(std::iter::repeat_n(dy, k));
    let mut p = SdpProblem::new(format!("{k}-extension"), Objective::MaxShift);
    let x = p.add_var("X", TensorShape::new(dims.clone())?, VarKind::Psd);
    let j = f.choi().reshaped(TensorShape::new(vec![d, dy])?)?;
    for a in 1..=k {
        let traced: Vec<usize> = (1..=k).filter(|&b| b != a).collect();
        p.add_constraint(&format!("copy {a}"), vec![(x, LinOp::partial_trace(&dims, &traced))], j.clone())?;
    }
    if symmetric {
        for a in 1..k {
            let mut perm: Vec<usize> = (0..=k).collect();
            perm.swap(a, a + 1);
            p.add_constraint(
                &format!("swap {a},{}", a + 1),
                vec![
                    (x, LinOp::Identity),
                    (
                        x,
                        LinOp::Permute {
                            dims: dims.clone(),
                            perm,
                        }
                        .negated(),
                    ),
                ],
                HermitianMatrix::zeros(TensorShape::new(dims.clone())?),
            )?;
        }
    }
    Ok(p)
}

/// Joint measurability: PSD `P_ij` with `Σ_j P_ij = M_i`, `Σ_i P_ij = N_j`.
pub fn build_povm_compat(m: &Povm, n: &Povm) -> Result<SdpProblem> {
    let d = m.dim();
    if n.dim() != d {
        return Err(Error::DimensionMismatch(format!("POVMs on {d} and {} dimensions", n.dim())));
    }
    let mut p = SdpProblem::new("povm-compat", Objective::MaxShift);
    let mut vars = vec![vec![0; n.len()]; m.len()];
    for (i, row) in vars.iter_mut().enumerate() {
        for (j, v) in row.iter_mut().enumerate() {
            *v = p.add_var(&format!("P{i}{j}"), TensorShape::single(d), VarKind::Psd);
        }
    }
    for (i, mi) in m.effects().iter().enumerate() {
        let terms = (0..n.len()).map(|j| (vars[i][j], LinOp::Identity)).collect();
        p.add_constraint(&format!("row {i}"), terms, mi.reshaped(TensorShape::single(d))?)?;
    }
    for (j, nj) in n.effects().iter().enumerate() {
        let terms = (0..m.len()).map(|i| (vars[i][j], LinOp::Identity)).collect();
        p.add_constraint(&format!("column {j}"), terms, nj.reshaped(TensorShape::single(d))?)?;
    }
    Ok(p)
}

/// State marginal problem: `ρ` on `X⊗Y₁⊗Y₂` with `Tr_{Y₂}ρ = ρ₁` and
/// `Tr_{Y₁}ρ = ρ₂`.
pub fn build_state_compat(rho1: &HermitianMatrix, rho2: &HermitianMatrix, d: usize) -> Result<SdpProblem> {
    let mut p = build_compat_chois(rho1, rho2, d, false)?;
    p.label = "state-compat".into();
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{standard_channel, StandardKind};
    use crate::linalg::inner;
    use crate::random::{random_hermitian, rng};

    fn ch(kind: StandardKind) -> Channel {
        standard_channel(&kind, 2).unwrap()
    }

    #[test]
    fn embedding_round_trip_and_inner_product() {
        let mut r = rng(3);
        let a = random_hermitian(&mut r, 3);
        let b = random_hermitian(&mut r, 3);
        assert!(max_abs(&(unembed_real(&embed_real(&a)) - &a)) < 1e-15);
        let lhs = (embed_real(&a) * 0.5).component_mul(&embed_real(&b)).sum();
        assert!((lhs - inner(&a, &b)).abs() < 1e-12);
    }

    #[test]
    fn adjoints_match_inner_products() {
        let mut r = rng(11);
        let f = crate::random::random_channel(&mut r, 2, 2, 2);
        let g = crate::random::random_channel(&mut r, 2, 3, 2);
        let ops = vec![
            (LinOp::partial_trace(&[2, 3, 2], &[1]), 12),
            (LinOp::partial_trace(&[2, 3, 2], &[0, 2]), 12),
            (LinOp::PartialTranspose { dims: vec![2, 3, 2], factor: 1 }, 12),
            (LinOp::Permute { dims: vec![2, 3, 2], perm: vec![1, 2, 0] }, 12),
            (LinOp::Pair(Box::new(PairMap::new(f.rep(), g.rep()).unwrap())).negated(), 8),
        ];
        for (op, n) in ops {
            let x = random_hermitian(&mut r, n);
            let ax = op.apply(&x).unwrap();
            let y = random_hermitian(&mut r, ax.nrows());
            let aty = op.adjoint(&y).unwrap();
            assert!((inner(&ax, &y) - inner(&x, &aty)).abs() < 1e-10, "{op:?}");
        }
    }

    #[test]
    fn constant_pair_is_feasible() {
        let omega = ch(StandardKind::Depolarizing);
        let out = solve(&build_compat(&omega, &omega, false).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SdpStatus::Feasible);
        assert!(out.value > 0.0);
        let beta = out.dual_value.unwrap();
        assert!((out.value - beta).abs() <= 1e-7 * (1.0 + out.value.abs()));
        // Four redundant trace rows plus the one absorbed by the shift column.
        assert_eq!(out.removed_rows, 5);
    }

    #[test]
    fn identity_pair_is_infeasible() {
        let id = ch(StandardKind::Identity);
        let out = solve(&build_compat(&id, &id, false).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SdpStatus::Infeasible);
        assert!(out.value < 0.0);
        assert!(out.dual_value.unwrap() < -1e-3);
    }

    #[test]
    fn dephasing_pair_feasible_in_both_modes() {
        let delta = ch(StandardKind::Dephasing);
        let p = build_compat(&delta, &delta, false).unwrap();
        assert_eq!(solve(&p, &SolveOptions::default()).unwrap().status, SdpStatus::Feasible);
        let proj = solve(&p, &SolveOptions::projection()).unwrap();
        assert_eq!(proj.status, SdpStatus::Feasible, "{:?}", proj.note);
        assert!(proj.residuals.primal <= 1e-7);
    }

    #[test]
    fn depolarizing_boundary_is_feasible() {
        let o = ch(StandardKind::PartialDepolarizing(1.0 / 3.0));
        let out = solve(&build_compat(&o, &o, false).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SdpStatus::Feasible, "{out:?}");
        assert!(out.value.abs() < 1e-7);
    }

    #[test]
    fn jordan_problem_decides_known_pairs() {
        let id = ch(StandardKind::Identity);
        let omega = ch(StandardKind::Depolarizing);
        let yes = solve(&build_jordan_compat(&id, &omega).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(yes.status, SdpStatus::Feasible);
        let no = solve(&build_jordan_compat(&id, &id).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(no.status, SdpStatus::Infeasible);
    }

    #[test]
    fn k_extension_of_identity_is_infeasible_and_k2_matches_compat() {
        let id = ch(StandardKind::Identity);
        let out = solve(&build_k_extension(&id, 3, false).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(out.status, SdpStatus::Infeasible);
        let xi = ch(StandardKind::Xi { p: 0.2, q: 0.4 });
        let a = solve(&build_k_extension(&xi, 2, false).unwrap(), &SolveOptions::default()).unwrap();
        let b = solve(&build_compat(&xi, &xi, false).unwrap(), &SolveOptions::default()).unwrap();
        assert!((a.value - b.value).abs() < 1e-7);
    }

    #[test]
    fn symmetric_extension_agrees() {
        let xi = ch(StandardKind::Xi { p: 0.3, q: 0.5 });
        let a = solve(&build_k_extension(&xi, 3, false).unwrap(), &SolveOptions::default()).unwrap();
        let b = solve(&build_k_extension(&xi, 3, true).unwrap(), &SolveOptions::default()).unwrap();
        assert_eq!(a.status, b.status);
        assert!((a.value - b.value).abs() < 1e-6);
    }

    #[test]
    fn size_cap_is_enforced() {
        let id = crate::channels::standard_channel(&StandardKind::Identity, 4).unwrap();
        assert!(matches!(build_k_extension(&id, 5, false), Err(Error::SizeCap(_))));
        let p = build_k_extension(&id, 4, false).unwrap();
        assert!(matches!(solve(&p, &SolveOptions::default()), Err(Error::SizeCap(_))));
    }
}
