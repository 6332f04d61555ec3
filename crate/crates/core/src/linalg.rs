//! Dense complex linear algebra over tensor-product spaces.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. Tensor factors are addressed
//! by position, first factor most significant: for dims `[a, b]` the basis
//! vector `e_i ⊗ e_j` has index `i·b + j`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;

/// Deviation from Hermiticity tolerated (relative to the largest entry) by
/// [`HermitianMatrix::new`].
pub const HERMITIAN_TOL: f64 = 1e-12;
/// Relative eigenvalue cutoff used for every support projector and
/// pseudo-inverse in the crate.
pub const RANK_CUTOFF: f64 = 1e-10;
/// Most negative eigenvalue accepted as "PSD" by [`pinv_sqrt`].
pub const PSD_TOL: f64 = 1e-8;

const ZERO: C64 = C64::new(0.0, 0.0);
const ONE: C64 = C64::new(1.0, 0.0);

/// Ordered list of tensor-factor dimensions.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct TensorShape(Vec<usize>);

impl TensorShape {
    pub fn new(factors: Vec<usize>) -> Result<Self> {
        if factors.is_empty() || factors.contains(&0) {
            return Err(Error::InvalidShape);
        }
        Ok(Self(factors))
    }

    /// A single factor of dimension `n`.
    pub fn single(n: usize) -> Self {
        Self(vec![n.max(1)])
    }

    pub fn factors(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Side length of the matrices this shape describes.
    pub fn dim(&self) -> usize {
        self.0.iter().product()
    }

    pub fn concat(&self, other: &TensorShape) -> TensorShape {
        let mut f = self.0.clone();
        f.extend_from_slice(&other.0);
        TensorShape(f)
    }

    /// Shape left after removing the given factor positions; a scalar shape
    /// `[1]` if nothing remains.
    pub fn without(&self, removed: &[usize]) -> TensorShape {
        let f: Vec<usize> = self
            .0
            .iter()
            .enumerate()
            .filter(|(i, _)| !removed.contains(i))
            .map(|(_, &d)| d)
            .collect();
        if f.is_empty() {
            TensorShape(vec![1])
        } else {
            TensorShape(f)
        }
    }

    fn check_index(&self, index: usize) -> Result<()> {
        if index >= self.0.len() {
            return Err(Error::FactorOutOfRange {
                index,
                factors: self.0.len(),
            });
        }
        Ok(())
    }
}

/// A Hermitian matrix tagged with a tensor shape.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianMatrix {
    data: CMatrix,
    shape: TensorShape,
}

impl HermitianMatrix {
    /// Symmetrizes `data` if it is Hermitian within [`HERMITIAN_TOL`]
    /// (relative to its largest entry); rejects it otherwise.
    pub fn new(data: CMatrix, shape: TensorShape) -> Result<Self> {
        Self::with_tolerance(data, shape, HERMITIAN_TOL)
    }

    pub fn with_tolerance(data: CMatrix, shape: TensorShape, tol: f64) -> Result<Self> {
        if data.nrows() != data.ncols() {
            return Err(Error::ShapeMismatch {
                expected: data.nrows(),
                found: data.ncols(),
            });
        }
        if data.nrows() != shape.dim() {
            return Err(Error::ShapeMismatch {
                expected: shape.dim(),
                found: data.nrows(),
            });
        }
        let deviation = hermitian_deviation(&data);
        if deviation > tol * max_abs(&data).max(1.0) {
            return Err(Error::NotHermitian { deviation });
        }
        Ok(Self {
            data: hermitian_part(&data),
            shape,
        })
    }

    /// Single-factor matrix.
    pub fn from_matrix(data: CMatrix) -> Result<Self> {
        let n = data.nrows();
        Self::new(data, TensorShape::single(n))
    }

    /// Builds from a real symmetric array of rows (test and fixture helper).
    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let n = rows.len();
        let data = CMatrix::from_fn(n, n, |i, j| C64::new(rows[i].get(j).copied().unwrap_or(0.0), 0.0));
        Self::from_matrix(data)
    }

    pub fn identity(shape: TensorShape) -> Self {
        let n = shape.dim();
        Self {
            data: CMatrix::identity(n, n),
            shape,
        }
    }

    pub fn zeros(shape: TensorShape) -> Self {
        let n = shape.dim();
        Self {
            data: CMatrix::zeros(n, n),
            shape,
        }
    }

    /// Wraps a matrix known to be exactly Hermitian by construction.
    pub(crate) fn from_parts_unchecked(data: CMatrix, shape: TensorShape) -> Self {
        debug_assert_eq!(data.nrows(), shape.dim());
        Self {
            data: hermitian_part(&data),
            shape,
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.data
    }

    pub fn into_matrix(self) -> CMatrix {
        self.data
    }

    pub fn shape(&self) -> &TensorShape {
        &self.shape
    }

    pub fn side(&self) -> usize {
        self.data.nrows()
    }

    /// Same entries, different factorization of the side length.
    pub fn reshaped(&self, shape: TensorShape) -> Result<Self> {
        if shape.dim() != self.side() {
            return Err(Error::ShapeMismatch {
                expected: self.side(),
                found: shape.dim(),
            });
        }
        Ok(Self {
            data: self.data.clone(),
            shape,
        })
    }

    pub fn trace(&self) -> f64 {
        self.data.trace().re
    }

    /// Hilbert–Schmidt inner product `Tr(A·B)` (real for Hermitian operands).
    pub fn inner(&self, other: &HermitianMatrix) -> f64 {
        inner(&self.data, &other.data)
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            data: self.data.map(|z| z * s),
            shape: self.shape.clone(),
        }
    }

    pub fn add(&self, other: &HermitianMatrix) -> Result<Self> {
        self.check_side(other)?;
        Ok(Self {
            data: &self.data + &other.data,
            shape: self.shape.clone(),
        })
    }

    pub fn sub(&self, other: &HermitianMatrix) -> Result<Self> {
        self.check_side(other)?;
        Ok(Self {
            data: &self.data - &other.data,
            shape: self.shape.clone(),
        })
    }

    /// Adds `s·I`.
    pub fn shift(&self, s: f64) -> Self {
        let mut data = self.data.clone();
        for i in 0..data.nrows() {
            data[(i, i)] += s;
        }
        Self {
            data,
            shape: self.shape.clone(),
        }
    }

    /// Largest entry-wise deviation `‖A − B‖_max`.
    pub fn max_abs_diff(&self, other: &HermitianMatrix) -> f64 {
        if self.side() != other.side() {
            return f64::INFINITY;
        }
        max_abs(&(&self.data - &other.data))
    }

    pub fn min_eigenvalue(&self) -> Result<f64> {
        let (vals, _) = eigh(&self.data)?;
        Ok(vals.first().copied().unwrap_or(0.0))
    }

    pub fn is_psd(&self, tol: f64) -> Result<bool> {
        Ok(self.min_eigenvalue()? >= -tol)
    }

    fn check_side(&self, other: &HermitianMatrix) -> Result<()> {
        if self.side() != other.side() {
            return Err(Error::ShapeMismatch {
                expected: self.side(),
                found: other.side(),
            });
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Raw helpers on complex matrices.

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

pub fn hermitian_deviation(m: &CMatrix) -> f64 {
    max_abs(&(m - m.adjoint()))
}

pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// `Re Tr(A·B)`; equals `⟨A, B⟩` when `A` is Hermitian.
pub fn inner(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut s = 0.0;
    for i in 0..n {
        for k in 0..n {
            let x = a[(i, k)];
            let y = b[(k, i)];
            s += x.re * y.re - x.im * y.im;
        }
    }
    s
}

/// `E_ij` of side `n`.
pub fn unit(n: usize, i: usize, j: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    m[(i, j)] = ONE;
    m
}

pub fn kron_raw(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Full-index offsets contributed by the listed factors, enumerated in
/// row-major order over those factors.
fn offsets(dims: &[usize], subset: &[usize]) -> Vec<usize> {
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let mut out = vec![0usize];
    for &f in subset {
        let mut next = Vec::with_capacity(out.len() * dims[f]);
        for &base in &out {
            for a in 0..dims[f] {
                next.push(base + a * strides[f]);
            }
        }
        out = next;
    }
    out
}

fn check_factors(dims: &[usize], idx: &[usize]) -> Result<()> {
    for &i in idx {
        if i >= dims.len() {
            return Err(Error::FactorOutOfRange {
                index: i,
                factors: dims.len(),
            });
        }
    }
    Ok(())
}

fn complement(n: usize, idx: &[usize]) -> Vec<usize> {
    (0..n).filter(|i| !idx.contains(i)).collect()
}

/// Partial trace of a (not necessarily Hermitian) matrix over `traced`.
pub fn ptrace(m: &CMatrix, dims: &[usize], traced: &[usize]) -> Result<CMatrix> {
    check_factors(dims, traced)?;
    let kept = complement(dims.len(), traced);
    let ok = offsets(dims, &kept);
    let ot = offsets(dims, traced);
    let n = ok.len();
    Ok(CMatrix::from_fn(n, n, |r, c| {
        let (br, bc) = (ok[r], ok[c]);
        ot.iter().map(|&t| m[(br + t, bc + t)]).sum()
    }))
}

/// Adjoint of [`ptrace`]: inserts identities at the traced positions.
/// `dims` is the full (output) shape; `z` acts on the remaining factors.
pub fn embed_identity(z: &CMatrix, dims: &[usize], traced: &[usize]) -> Result<CMatrix> {
    check_factors(dims, traced)?;
    let kept = complement(dims.len(), traced);
    let ok = offsets(dims, &kept);
    let ot = offsets(dims, traced);
    if z.nrows() != ok.len() {
        return Err(Error::ShapeMismatch {
            expected: ok.len(),
            found: z.nrows(),
        });
    }
    let n: usize = dims.iter().product();
    let mut out = CMatrix::zeros(n, n);
    for r in 0..ok.len() {
        for c in 0..ok.len() {
            let v = z[(r, c)];
            if v == ZERO {
                continue;
            }
            for &t in &ot {
                out[(ok[r] + t, ok[c] + t)] = v;
            }
        }
    }
    Ok(out)
}

/// Partial transpose on one factor.
pub fn ptranspose(m: &CMatrix, dims: &[usize], factor: usize) -> Result<CMatrix> {
    check_factors(dims, &[factor])?;
    let rest = complement(dims.len(), &[factor]);
    let orest = offsets(dims, &rest);
    let of = offsets(dims, &[factor]);
    let mut out = m.clone();
    for &r in &orest {
        for &c in &orest {
            for &a in &of {
                for &b in &of {
                    out[(r + a, c + b)] = m[(r + b, c + a)];
                }
            }
        }
    }
    Ok(out)
}

/// Reorders tensor factors: factor `k` of the result is factor `perm[k]` of
/// the input.
pub fn permute(m: &CMatrix, dims: &[usize], perm: &[usize]) -> Result<CMatrix> {
    let mut seen = vec![false; dims.len()];
    if perm.len() != dims.len() {
        return Err(Error::DimensionMismatch(format!(
            "permutation of length {} for {} factors",
            perm.len(),
            dims.len()
        )));
    }
    for &p in perm {
        if p >= dims.len() || seen[p] {
            return Err(Error::DimensionMismatch("invalid factor permutation".into()));
        }
        seen[p] = true;
    }
    // Enumerating the input offsets in the permuted order yields, for each
    // output index, the matching input index.
    let table = offsets(dims, perm);
    let n = table.len();
    Ok(CMatrix::from_fn(n, n, |i, j| m[(table[i], table[j])]))
}

/// Applies `f` (acting on `d_in × d_in` matrices, returning `d_out × d_out`)
/// to one tensor factor of `m`.
pub fn apply_on_factor<F>(
    m: &CMatrix,
    dims: &[usize],
    factor: usize,
    d_out: usize,
    f: F,
) -> Result<CMatrix>
where
    F: Fn(&CMatrix) -> CMatrix,
{
    check_factors(dims, &[factor])?;
    let d_in = dims[factor];
    // Move the factor last, apply block-wise, move it back.
    let mut perm: Vec<usize> = complement(dims.len(), &[factor]);
    perm.push(factor);
    let moved = permute(m, dims, &perm)?;
    let rest: usize = dims.iter().product::<usize>() / d_in;
    let mut out = CMatrix::zeros(rest * d_out, rest * d_out);
    for r in 0..rest {
        for c in 0..rest {
            let block = moved.view((r * d_in, c * d_in), (d_in, d_in)).into_owned();
            if block.iter().all(|z| *z == ZERO) {
                continue;
            }
            let img = f(&block);
            out.view_mut((r * d_out, c * d_out), (d_out, d_out))
                .copy_from(&img);
        }
    }
    let mut new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    *new_dims.last_mut().unwrap() = d_out;
    // Inverse permutation puts the factor back at its position.
    let mut inv = vec![0usize; perm.len()];
    for (k, &p) in perm.iter().enumerate() {
        inv[p] = k;
    }
    permute(&out, &new_dims, &inv)
}

/// Ascending eigenvalues and unitary eigenvector columns of a Hermitian
/// matrix.
pub fn eigh(m: &CMatrix) -> Result<(Vec<f64>, CMatrix)> {
    let n = m.nrows();
    if n == 0 {
        return Ok((vec![], CMatrix::zeros(0, 0)));
    }
    let h = hermitian_part(m);
    let eig = nalgebra::SymmetricEigen::try_new(h, f64::EPSILON, 1000 * n.max(10))
        .ok_or(Error::NoConvergence)?;
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
    let mut vecs = CMatrix::zeros(n, n);
    for (k, &i) in idx.iter().enumerate() {
        vecs.set_column(k, &eig.eigenvectors.column(i));
    }
    Ok((vals, vecs))
}

/// `V·diag(f(λ))·V†`.
pub fn spectral_map<F: Fn(f64) -> f64>(vals: &[f64], vecs: &CMatrix, f: F) -> CMatrix {
    let n = vals.len();
    let mut scaled = vecs.clone();
    for k in 0..n {
        let s = f(vals[k]);
        for i in 0..n {
            scaled[(i, k)] *= s;
        }
    }
    let out = scaled * vecs.adjoint();
    hermitian_part(&out)
}

fn cutoff(vals: &[f64]) -> f64 {
    let lmax = vals.iter().fold(0.0f64, |a, &v| a.max(v));
    RANK_CUTOFF * lmax
}

// ---------------------------------------------------------------------------
// Public operations on HermitianMatrix.

pub fn kron(a: &HermitianMatrix, b: &HermitianMatrix) -> HermitianMatrix {
    HermitianMatrix {
        data: kron_raw(&a.data, &b.data),
        shape: a.shape.concat(&b.shape),
    }
}

pub fn partial_trace(m: &HermitianMatrix, traced: &[usize]) -> Result<HermitianMatrix> {
    let dims = m.shape.factors();
    let data = ptrace(&m.data, dims, traced)?;
    Ok(HermitianMatrix::from_parts_unchecked(data, m.shape.without(traced)))
}

/// `Tr*`: identity inserted at `positions` of `full`; `z` lives on the other
/// factors.
pub fn partial_trace_adjoint(
    z: &HermitianMatrix,
    full: &TensorShape,
    positions: &[usize],
) -> Result<HermitianMatrix> {
    let data = embed_identity(&z.data, full.factors(), positions)?;
    Ok(HermitianMatrix::from_parts_unchecked(data, full.clone()))
}

pub fn partial_transpose(m: &HermitianMatrix, factor: usize) -> Result<HermitianMatrix> {
    m.shape.check_index(factor)?;
    let data = ptranspose(&m.data, m.shape.factors(), factor)?;
    Ok(HermitianMatrix::from_parts_unchecked(data, m.shape.clone()))
}

pub fn permute_factors(m: &HermitianMatrix, perm: &[usize]) -> Result<HermitianMatrix> {
    let dims = m.shape.factors();
    let data = permute(&m.data, dims, perm)?;
    let shape = TensorShape::new(perm.iter().map(|&p| dims[p]).collect())?;
    Ok(HermitianMatrix::from_parts_unchecked(data, shape))
}

/// Eigenvalues ascending; eigenvectors as unitary columns.
pub fn hermitian_eig(m: &HermitianMatrix) -> Result<(Vec<f64>, CMatrix)> {
    eigh(&m.data)
}

/// Moore–Penrose inverse of `M^{1/2}` for PSD `M`.
pub fn pinv_sqrt(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (vals, vecs) = eigh(&m.data)?;
    check_psd(&vals)?;
    let cut = cutoff(&vals);
    let data = spectral_map(&vals, &vecs, |l| if l > cut { 1.0 / l.sqrt() } else { 0.0 });
    Ok(HermitianMatrix::from_parts_unchecked(data, m.shape.clone()))
}

/// Principal square root of a PSD matrix (small negative eigenvalues
/// clipped).
pub fn sqrt_psd(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (vals, vecs) = eigh(&m.data)?;
    check_psd(&vals)?;
    let data = spectral_map(&vals, &vecs, |l| l.max(0.0).sqrt());
    Ok(HermitianMatrix::from_parts_unchecked(data, m.shape.clone()))
}

/// Projector onto the span of eigenvectors above the rank cutoff.
pub fn support_projector(m: &HermitianMatrix) -> Result<HermitianMatrix> {
    let (vals, vecs) = eigh(&m.data)?;
    let cut = cutoff(&vals);
    let data = spectral_map(&vals, &vecs, |l| if l > cut { 1.0 } else { 0.0 });
    Ok(HermitianMatrix::from_parts_unchecked(data, m.shape.clone()))
}

fn check_psd(vals: &[f64]) -> Result<()> {
    if let Some(&lmin) = vals.first() {
        if lmin < -PSD_TOL {
            return Err(Error::NotPsd {
                min_eigenvalue: lmin,
            });
        }
    }
    Ok(())
}

/// The swap `W(u ⊗ v) = v ⊗ u` on `C^d ⊗ C^d`.
pub fn swap_operator(d: usize) -> HermitianMatrix {
    let d = d.max(1);
    let mut w = CMatrix::zeros(d * d, d * d);
    for i in 0..d {
        for j in 0..d {
            w[(j * d + i, i * d + j)] = ONE;
        }
    }
    HermitianMatrix {
        data: w,
        shape: TensorShape(vec![d, d]),
    }
}

/// Checks `A = (Π⊗I)A(Π⊗I)` where `Π` projects onto the support of the
/// first-factor marginal of a PSD `A` on `X⊗Y`. Returns the deviation.
pub fn support_projection_absorbs(a: &HermitianMatrix) -> Result<f64> {
    let dims = a.shape.factors().to_vec();
    if dims.len() < 2 {
        return Err(Error::DimensionMismatch(
            "absorption check needs a bipartite shape".into(),
        ));
    }
    let rest: Vec<usize> = (1..dims.len()).collect();
    let marginal = partial_trace(a, &rest)?;
    let pi = support_projector(&marginal)?;
    let dy: usize = dims[1..].iter().product();
    let p = kron_raw(&pi.data, &CMatrix::identity(dy, dy));
    let sandwiched = &p * &a.data * &p;
    let deviation = max_abs(&(&sandwiched - &a.data));
    if deviation > 1e-9 * max_abs(&a.data).max(1.0) {
        return Err(Error::AbsorptionFailed { deviation });
    }
    Ok(deviation)
}

// ---------------------------------------------------------------------------
// Real orthonormal Hermitian basis.
//
// Coordinates of side-n Hermitian X: the n diagonal entries, then for each
// j < k the pair (√2·Re X_jk, √2·Im X_jk). These are the inner products of X
// with E_kk, (E_jk+E_kj)/√2 and i(E_jk−E_kj)/√2.

/// Number of real coordinates of a side-`n` Hermitian matrix.
pub fn herm_dim(n: usize) -> usize {
    n * n
}

pub fn herm_to_coords(m: &CMatrix) -> DVector<f64> {
    let n = m.nrows();
    let mut v = DVector::zeros(n * n);
    herm_to_coords_into(m, v.as_mut_slice());
    v
}

pub fn herm_to_coords_into(m: &CMatrix, out: &mut [f64]) {
    let n = m.nrows();
    let s = std::f64::consts::SQRT_2;
    for k in 0..n {
        out[k] = m[(k, k)].re;
    }
    let mut idx = n;
    for j in 0..n {
        for k in (j + 1)..n {
            // Average the two triangles so slightly non-Hermitian input maps
            // to its Hermitian part.
            let z = (m[(j, k)] + m[(k, j)].conj()) * 0.5;
            out[idx] = s * z.re;
            out[idx + 1] = s * z.im;
            idx += 2;
        }
    }
}

pub fn coords_to_herm(v: &[f64], n: usize) -> CMatrix {
    let mut m = CMatrix::zeros(n, n);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    for k in 0..n {
        m[(k, k)] = C64::new(v[k], 0.0);
    }
    let mut idx = n;
    for j in 0..n {
        for k in (j + 1)..n {
            let z = C64::new(v[idx] * s, v[idx + 1] * s);
            m[(j, k)] = z;
            m[(k, j)] = z.conj();
            idx += 2;
        }
    }
    m
}

/// Basis element `k` of the real Hermitian basis.
pub fn herm_basis(n: usize, k: usize) -> CMatrix {
    let mut v = vec![0.0; n * n];
    v[k] = 1.0;
    coords_to_herm(&v, n)
}
