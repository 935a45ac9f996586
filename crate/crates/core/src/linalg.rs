//! Dense complex linear algebra over qubit registers.
//!
//! Qubit 0 is the most significant tensor factor: in a register of `n`
//! qubits, qubit `q` is bit `n - 1 - q` of a basis index.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

pub type C64 = Complex64;

/// Centralized numerical tolerances.
pub mod tol {
    pub const HERMITICITY: f64 = 1e-12;
    pub const UNITARITY: f64 = 1e-10;
    pub const NUMERIC: f64 = 1e-10;
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("matrix is not Hermitian (max |M - M^dagger| = {deviation:e})")]
    NonHermitianInput { deviation: f64 },
    #[error("matrix is not unitary (max |M^dagger M - I| = {deviation:e})")]
    NonUnitaryInput { deviation: f64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("qubit index {index} out of range for a {n_qubits}-qubit register")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("dimension {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("expected {expected} entries for a square matrix, got {got}")]
    BadShape { expected: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, LinalgError>;

/// Dense square complex matrix, row-major.
///
/// The `hermitian` and `unitary` flags are only ever set after the
/// corresponding check has passed (or by constructions that preserve the
/// property exactly up to rounding).
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    dim: usize,
    data: Vec<C64>,
    hermitian: bool,
    unitary: bool,
}

impl OperatorMatrix {
    pub fn new(dim: usize, data: Vec<C64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(LinalgError::BadShape {
                expected: dim * dim,
                got: data.len(),
            });
        }
        Ok(Self {
            dim,
            data,
            hermitian: false,
            unitary: false,
        })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let dim = rows.len();
        let data: Vec<C64> = rows
            .iter()
            .flat_map(|r| r.iter().map(|&v| C64::new(v, 0.0)))
            .collect();
        Self::new(dim, data)
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self {
            dim,
            data: vec![C64::new(0.0, 0.0); dim * dim],
            hermitian: true,
            unitary: false,
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.data[i * dim + i] = C64::new(1.0, 0.0);
        }
        m.unitary = true;
        m
    }

    pub fn from_diagonal(diag: &[C64]) -> Self {
        let dim = diag.len();
        let mut m = Self::zeros(dim);
        for (i, &d) in diag.iter().enumerate() {
            m.data[i * dim + i] = d;
        }
        m.hermitian = diag.iter().all(|d| d.im.abs() < tol::HERMITICITY);
        m.unitary = diag.iter().all(|d| (d.norm() - 1.0).abs() < tol::UNITARITY);
        m
    }

    pub fn from_real_diagonal(diag: &[f64]) -> Self {
        let d: Vec<C64> = diag.iter().map(|&v| C64::new(v, 0.0)).collect();
        Self::from_diagonal(&d)
    }

    pub fn from_nalgebra(m: &DMatrix<C64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(LinalgError::DimMismatch {
                left: m.nrows(),
                right: m.ncols(),
            });
        }
        let dim = m.nrows();
        let mut data = Vec::with_capacity(dim * dim);
        for i in 0..dim {
            for j in 0..dim {
                data.push(m[(i, j)]);
            }
        }
        Self::new(dim, data)
    }

    pub fn to_nalgebra(&self) -> DMatrix<C64> {
        DMatrix::from_row_slice(self.dim, self.dim, &self.data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of qubits when `dim` is a power of two.
    pub fn n_qubits(&self) -> Result<usize> {
        qubits_for_dim(self.dim)
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> C64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: C64) {
        self.clear_flags();
        self.data[row * self.dim + col] = value;
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    /// Mutable access to the raw entries; clears the capability flags.
    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        self.clear_flags();
        &mut self.data
    }

    pub fn is_hermitian_flagged(&self) -> bool {
        self.hermitian
    }

    pub fn is_unitary_flagged(&self) -> bool {
        self.unitary
    }

    fn clear_flags(&mut self) {
        self.hermitian = false;
        self.unitary = false;
    }

    pub(crate) fn set_flags_unchecked(&mut self, hermitian: bool, unitary: bool) {
        self.hermitian = hermitian;
        self.unitary = unitary;
    }

    /// max |M - M^dagger|
    pub fn hermiticity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in i..n {
                let d = (self.data[i * n + j] - self.data[j * n + i].conj()).norm();
                worst = worst.max(d);
            }
        }
        worst
    }

    /// max |M^dagger M - I|
    pub fn unitarity_deviation(&self) -> f64 {
        let prod = self.adjoint().matmul(self).expect("square matrices of equal dim");
        let n = self.dim;
        let mut worst = 0.0f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((prod.data[i * n + j] - C64::new(target, 0.0)).norm());
            }
        }
        worst
    }

    /// Checks Hermiticity at [`tol::HERMITICITY`] and sets the flag.
    pub fn into_hermitian(mut self) -> Result<Self> {
        let deviation = self.hermiticity_deviation();
        if deviation >= tol::HERMITICITY {
            return Err(LinalgError::NonHermitianInput { deviation });
        }
        self.hermitian = true;
        Ok(self)
    }

    /// Checks unitarity at [`tol::UNITARITY`] and sets the flag.
    pub fn into_unitary(mut self) -> Result<Self> {
        let deviation = self.unitarity_deviation();
        if deviation >= tol::UNITARITY {
            return Err(LinalgError::NonUnitaryInput { deviation });
        }
        self.unitary = true;
        Ok(self)
    }

    pub fn require_hermitian(&self) -> Result<()> {
        if self.hermitian {
            return Ok(());
        }
        let deviation = self.hermiticity_deviation();
        if deviation < tol::HERMITICITY {
            Ok(())
        } else {
            Err(LinalgError::NonHermitianInput { deviation })
        }
    }

    pub fn require_unitary(&self) -> Result<()> {
        if self.unitary {
            return Ok(());
        }
        let deviation = self.unitarity_deviation();
        if deviation < tol::UNITARITY {
            Ok(())
        } else {
            Err(LinalgError::NonUnitaryInput { deviation })
        }
    }

    pub fn adjoint(&self) -> Self {
        let n = self.dim;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        Self {
            dim: n,
            data,
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    pub fn transpose(&self) -> Self {
        let n = self.dim;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.data[i * n + j];
            }
        }
        Self {
            dim: n,
            data,
            hermitian: self.hermitian,
            unitary: self.unitary,
        }
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        let n = self.dim;
        let mut out = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            let row = &mut out[i * n..(i + 1) * n];
            for k in 0..n {
                let a = self.data[i * n + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                let brow = &other.data[k * n..(k + 1) * n];
                for (o, b) in row.iter_mut().zip(brow) {
                    *o += a * b;
                }
            }
        }
        let mut m = Self::new(n, out)?;
        m.unitary = self.unitary && other.unitary;
        Ok(m)
    }

    pub fn scale(&self, factor: C64) -> Self {
        let data = self.data.iter().map(|v| v * factor).collect();
        Self {
            dim: self.dim,
            data,
            hermitian: self.hermitian && factor.im == 0.0,
            unitary: self.unitary && (factor.norm() - 1.0).abs() < tol::UNITARITY,
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        let mut m = Self::new(self.dim, data)?;
        m.hermitian = self.hermitian && other.hermitian;
        Ok(m)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dims(self, other)?;
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        let mut m = Self::new(self.dim, data)?;
        m.hermitian = self.hermitian && other.hermitian;
        Ok(m)
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|i| self.data[i * self.dim + i]).sum()
    }

    /// Elementwise max |a - b|.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn determinant(&self) -> C64 {
        self.to_nalgebra().determinant()
    }

    /// Conjugation `self * op * self^dagger` by dense multiplication.
    pub fn conjugate(&self, op: &Self) -> Result<Self> {
        let mut out = self.matmul(op)?.matmul(&self.adjoint())?;
        out.hermitian = op.hermitian;
        out.unitary = op.unitary && self.unitary;
        Ok(out)
    }
}

fn check_dims(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<()> {
    if a.dim != b.dim {
        return Err(LinalgError::DimMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    Ok(())
}

pub fn qubits_for_dim(dim: usize) -> Result<usize> {
    if dim == 0 || !dim.is_power_of_two() {
        return Err(LinalgError::NotPowerOfTwo(dim));
    }
    Ok(dim.trailing_zeros() as usize)
}

/// Bit mask of qubit `q` in an `n`-qubit basis index.
#[inline]
pub fn qubit_mask(q: usize, n_qubits: usize) -> usize {
    1usize << (n_qubits - 1 - q)
}

fn subsystem_mask(qubits: &[usize], n_qubits: usize) -> Result<usize> {
    let mut mask = 0usize;
    for &q in qubits {
        if q >= n_qubits {
            return Err(LinalgError::IndexOutOfRange { index: q, n_qubits });
        }
        mask |= qubit_mask(q, n_qubits);
    }
    Ok(mask)
}

/// Tensor product with `a` as the major (more significant) factor.
pub fn kron(a: &OperatorMatrix, b: &OperatorMatrix) -> OperatorMatrix {
    let (na, nb) = (a.dim, b.dim);
    let n = na * nb;
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..na {
        for j in 0..na {
            let aij = a.data[i * na + j];
            if aij.re == 0.0 && aij.im == 0.0 {
                continue;
            }
            for k in 0..nb {
                let row = (i * nb + k) * n + j * nb;
                for l in 0..nb {
                    data[row + l] = aij * b.data[k * nb + l];
                }
            }
        }
    }
    OperatorMatrix {
        dim: n,
        data,
        hermitian: a.hermitian && b.hermitian,
        unitary: a.unitary && b.unitary,
    }
}

/// Ascending eigenvalues and the matching eigenvectors (as columns) of a
/// Hermitian matrix.
pub fn hermitian_eigen(h: &OperatorMatrix) -> Result<(Vec<f64>, OperatorMatrix)> {
    h.require_hermitian()?;
    let eig = SymmetricEigen::new(h.to_nalgebra());
    let mut order: Vec<usize> = (0..h.dim).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let n = h.dim;
    let mut vecs = vec![C64::new(0.0, 0.0); n * n];
    for (col, &k) in order.iter().enumerate() {
        for row in 0..n {
            vecs[row * n + col] = eig.eigenvectors[(row, k)];
        }
    }
    Ok((values, OperatorMatrix::new(n, vecs)?))
}

pub fn eigenvalues_hermitian(h: &OperatorMatrix) -> Result<Vec<f64>> {
    h.require_hermitian()?;
    let mut values: Vec<f64> = SymmetricEigen::new(h.to_nalgebra())
        .eigenvalues
        .iter()
        .copied()
        .collect();
    values.sort_by(f64::total_cmp);
    Ok(values)
}

fn spectral_map(h: &OperatorMatrix, f: impl Fn(f64) -> C64) -> Result<OperatorMatrix> {
    let (values, vecs) = hermitian_eigen(h)?;
    let n = h.dim;
    let weights: Vec<C64> = values.into_iter().map(f).collect();
    let mut data = vec![C64::new(0.0, 0.0); n * n];
    for i in 0..n {
        for j in 0..n {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..n {
                acc += vecs.data[i * n + k] * weights[k] * vecs.data[j * n + k].conj();
            }
            data[i * n + j] = acc;
        }
    }
    OperatorMatrix::new(n, data)
}

/// `exp(i * scale * h)` for Hermitian `h`, via eigendecomposition.
pub fn matexp_hermitian(h: &OperatorMatrix, scale: f64) -> Result<OperatorMatrix> {
    let m = spectral_map(h, |l| C64::from_polar(1.0, scale * l))?;
    m.into_unitary()
}

/// `exp(scale * h)` for Hermitian `h` (no imaginary unit), e.g. Gibbs weights.
pub fn matexp_hermitian_real(h: &OperatorMatrix, scale: f64) -> Result<OperatorMatrix> {
    let mut m = spectral_map(h, |l| C64::new((scale * l).exp(), 0.0))?;
    // Hermitian by construction: symmetrize away rounding.
    let n = m.dim;
    for i in 0..n {
        for j in i..n {
            let avg = (m.data[i * n + j] + m.data[j * n + i].conj()) * 0.5;
            m.data[i * n + j] = avg;
            m.data[j * n + i] = avg.conj();
        }
    }
    m.into_hermitian()
}

/// Partial trace keeping the listed qubits (in ascending register order).
pub fn partial_trace(m: &OperatorMatrix, keep: &[usize]) -> Result<OperatorMatrix> {
    let n = m.n_qubits()?;
    let mut kept: Vec<usize> = keep.to_vec();
    kept.sort_unstable();
    kept.dedup();
    subsystem_mask(&kept, n)?;
    let traced: Vec<usize> = (0..n).filter(|q| !kept.contains(q)).collect();

    let compose = |kept_bits: usize, traced_bits: usize| -> usize {
        let mut idx = 0usize;
        for (pos, &q) in kept.iter().enumerate() {
            if (kept_bits >> (kept.len() - 1 - pos)) & 1 == 1 {
                idx |= qubit_mask(q, n);
            }
        }
        for (pos, &q) in traced.iter().enumerate() {
            if (traced_bits >> (traced.len() - 1 - pos)) & 1 == 1 {
                idx |= qubit_mask(q, n);
            }
        }
        idx
    };

    let dk = 1usize << kept.len();
    let dt = 1usize << traced.len();
    let mut out = vec![C64::new(0.0, 0.0); dk * dk];
    for i in 0..dk {
        for j in 0..dk {
            let mut acc = C64::new(0.0, 0.0);
            for t in 0..dt {
                acc += m.get(compose(i, t), compose(j, t));
            }
            out[i * dk + j] = acc;
        }
    }
    let mut r = OperatorMatrix::new(dk, out)?;
    r.hermitian = m.hermitian;
    Ok(r)
}

/// Transposes the tensor indices of the listed qubits only.
pub fn partial_transpose(m: &OperatorMatrix, subsystem: &[usize]) -> Result<OperatorMatrix> {
    let n = m.n_qubits()?;
    let mask = subsystem_mask(subsystem, n)?;
    let dim = m.dim;
    let mut out = vec![C64::new(0.0, 0.0); dim * dim];
    for r in 0..dim {
        for c in 0..dim {
            let src_r = (r & !mask) | (c & mask);
            let src_c = (c & !mask) | (r & mask);
            out[r * dim + c] = m.data[src_r * dim + src_c];
        }
    }
    let mut t = OperatorMatrix::new(dim, out)?;
    // partial transpose maps Hermitian to Hermitian
    t.hermitian = m.hermitian;
    Ok(t)
}

/// Sum of absolute eigenvalues.
pub fn trace_norm_hermitian(m: &OperatorMatrix) -> Result<f64> {
    Ok(eigenvalues_hermitian(m)?.iter().map(|v| v.abs()).sum())
}

/// `Tr[a b]` as the elementwise sum of `a_ij * b_ji`, without forming the product.
pub fn frobenius_inner(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<C64> {
    check_dims(a, b)?;
    const BLOCK: usize = 32;
    let n = a.dim;
    let mut acc = C64::new(0.0, 0.0);
    for bi in (0..n).step_by(BLOCK) {
        for bj in (0..n).step_by(BLOCK) {
            for i in bi..(bi + BLOCK).min(n) {
                for j in bj..(bj + BLOCK).min(n) {
                    acc += a.data[i * n + j] * b.data[j * n + i];
                }
            }
        }
    }
    Ok(acc)
}

/// `Tr[a b]` for Hermitian `b`, using `b_ji = conj(b_ij)` so both operands
/// are read contiguously.
pub fn hermitian_inner(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<C64> {
    check_dims(a, b)?;
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let chunks_a = a.data.chunks_exact(4);
    let chunks_b = b.data.chunks_exact(4);
    let mut tail = C64::new(0.0, 0.0);
    for (x, y) in chunks_a.remainder().iter().zip(chunks_b.remainder()) {
        tail += x * y.conj();
    }
    for (ca, cb) in chunks_a.zip(chunks_b) {
        for k in 0..4 {
            re[k] += ca[k].re * cb[k].re + ca[k].im * cb[k].im;
            im[k] += ca[k].im * cb[k].re - ca[k].re * cb[k].im;
        }
    }
    Ok(C64::new(
        (re[0] + re[1]) + (re[2] + re[3]) + tail.re,
        (im[0] + im[1]) + (im[2] + im[3]) + tail.im,
    ))
}

/// Compressed-row operator holding only the exactly nonzero entries.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    dim: usize,
    row_ptr: Vec<usize>,
    cols: Vec<u32>,
    vals: Vec<C64>,
}

impl SparseOperator {
    pub fn from_dense(m: &OperatorMatrix) -> Self {
        let n = m.dim;
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for i in 0..n {
            for (j, &v) in m.data[i * n..(i + 1) * n].iter().enumerate() {
                if v.re != 0.0 || v.im != 0.0 {
                    cols.push(j as u32);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        Self {
            dim: n,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn to_dense(&self) -> OperatorMatrix {
        let n = self.dim;
        let mut data = vec![C64::new(0.0, 0.0); n * n];
        for i in 0..n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                data[i * n + self.cols[k] as usize] = self.vals[k];
            }
        }
        OperatorMatrix::new(n, data).expect("square by construction")
    }

    /// Heap bytes used by the entries.
    pub fn bytes(&self) -> usize {
        self.row_ptr.len() * std::mem::size_of::<usize>()
            + self.cols.len() * std::mem::size_of::<u32>()
            + self.vals.len() * std::mem::size_of::<C64>()
    }
}

/// `sum_ij a_ij conj(b_ij)` over two sparse operators.
pub fn hermitian_inner_sparse(a: &SparseOperator, b: &SparseOperator) -> Result<C64> {
    if a.dim != b.dim {
        return Err(LinalgError::DimMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..a.dim {
        let (mut p, pe) = (a.row_ptr[i], a.row_ptr[i + 1]);
        let (mut q, qe) = (b.row_ptr[i], b.row_ptr[i + 1]);
        while p < pe && q < qe {
            match a.cols[p].cmp(&b.cols[q]) {
                std::cmp::Ordering::Less => p += 1,
                std::cmp::Ordering::Greater => q += 1,
                std::cmp::Ordering::Equal => {
                    acc += a.vals[p] * b.vals[q].conj();
                    p += 1;
                    q += 1;
                }
            }
        }
    }
    Ok(acc)
}

/// `sum_ij a_ij conj(b_ij)` with sparse `a` and dense `b`.
pub fn hermitian_inner_sparse_dense(a: &SparseOperator, b: &OperatorMatrix) -> Result<C64> {
    if a.dim != b.dim {
        return Err(LinalgError::DimMismatch {
            left: a.dim,
            right: b.dim,
        });
    }
    let n = a.dim;
    let mut acc = C64::new(0.0, 0.0);
    for i in 0..n {
        for k in a.row_ptr[i]..a.row_ptr[i + 1] {
            acc += a.vals[k] * b.data[i * n + a.cols[k] as usize].conj();
        }
    }
    Ok(acc)
}

// In-place gate application. Each routine touches every entry a constant
// number of times, so one- and two-qubit gates cost O(dim^2).

/// `m <- g m` for a single-qubit gate `g = [g00, g01, g10, g11]`.
pub fn apply_1q_left(m: &mut OperatorMatrix, q: usize, g: &[C64; 4]) {
    let n = m.dim;
    let nq = qubits_for_dim(n).expect("power-of-two dimension");
    let mask = qubit_mask(q, nq);
    for r0 in 0..n {
        if r0 & mask != 0 {
            continue;
        }
        let r1 = r0 | mask;
        let (head, tail) = m.data.split_at_mut(r1 * n);
        let row0 = &mut head[r0 * n..(r0 + 1) * n];
        let row1 = &mut tail[..n];
        for (a, b) in row0.iter_mut().zip(row1.iter_mut()) {
            let (x, y) = (*a, *b);
            *a = g[0] * x + g[1] * y;
            *b = g[2] * x + g[3] * y;
        }
    }
    m.clear_flags();
}

/// `m <- m g` for a single-qubit gate `g`.
pub fn apply_1q_right(m: &mut OperatorMatrix, q: usize, g: &[C64; 4]) {
    let n = m.dim;
    let nq = qubits_for_dim(n).expect("power-of-two dimension");
    let mask = qubit_mask(q, nq);
    for row in m.data.chunks_exact_mut(n) {
        for c0 in 0..n {
            if c0 & mask != 0 {
                continue;
            }
            let c1 = c0 | mask;
            let (x, y) = (row[c0], row[c1]);
            row[c0] = x * g[0] + y * g[2];
            row[c1] = x * g[1] + y * g[3];
        }
    }
    m.clear_flags();
}

fn adjoint_2x2(g: &[C64; 4]) -> [C64; 4] {
    [g[0].conj(), g[2].conj(), g[1].conj(), g[3].conj()]
}

/// `m <- g m g^dagger` for a single-qubit unitary.
pub fn conjugate_1q(m: &mut OperatorMatrix, q: usize, g: &[C64; 4]) {
    let flags = (m.hermitian, m.unitary);
    apply_1q_left(m, q, g);
    apply_1q_right(m, q, &adjoint_2x2(g));
    m.set_flags_unchecked(flags.0, flags.1);
}

fn two_qubit_indices(base: usize, m1: usize, m2: usize) -> [usize; 4] {
    [base, base | m2, base | m1, base | m1 | m2]
}

/// `m <- g m` for a 4x4 gate on qubits `(q1, q2)`, `q1` the major factor.
pub fn apply_2q_left(m: &mut OperatorMatrix, q1: usize, q2: usize, g: &OperatorMatrix) {
    let n = m.dim;
    let nq = qubits_for_dim(n).expect("power-of-two dimension");
    let (m1, m2) = (qubit_mask(q1, nq), qubit_mask(q2, nq));
    let gd = &g.data;
    let mut buf = [C64::new(0.0, 0.0); 4];
    for base in 0..n {
        if base & (m1 | m2) != 0 {
            continue;
        }
        let idx = two_qubit_indices(base, m1, m2);
        for col in 0..n {
            for (k, &r) in idx.iter().enumerate() {
                buf[k] = m.data[r * n + col];
            }
            for (k, &r) in idx.iter().enumerate() {
                m.data[r * n + col] = gd[k * 4] * buf[0]
                    + gd[k * 4 + 1] * buf[1]
                    + gd[k * 4 + 2] * buf[2]
                    + gd[k * 4 + 3] * buf[3];
            }
        }
    }
    m.clear_flags();
}

/// `m <- m g` for a 4x4 gate on qubits `(q1, q2)`.
pub fn apply_2q_right(m: &mut OperatorMatrix, q1: usize, q2: usize, g: &OperatorMatrix) {
    let n = m.dim;
    let nq = qubits_for_dim(n).expect("power-of-two dimension");
    let (m1, m2) = (qubit_mask(q1, nq), qubit_mask(q2, nq));
    let gd = &g.data;
    let mut buf = [C64::new(0.0, 0.0); 4];
    for row in m.data.chunks_exact_mut(n) {
        for base in 0..n {
            if base & (m1 | m2) != 0 {
                continue;
            }
            let idx = two_qubit_indices(base, m1, m2);
            for (k, &c) in idx.iter().enumerate() {
                buf[k] = row[c];
            }
            for (k, &c) in idx.iter().enumerate() {
                row[c] = buf[0] * gd[k]
                    + buf[1] * gd[4 + k]
                    + buf[2] * gd[8 + k]
                    + buf[3] * gd[12 + k];
            }
        }
    }
    m.clear_flags();
}

/// `m <- g m g^dagger` for a 4x4 unitary on qubits `(q1, q2)`.
pub fn conjugate_2q(m: &mut OperatorMatrix, q1: usize, q2: usize, g: &OperatorMatrix) {
    let flags = (m.hermitian, m.unitary);
    apply_2q_left(m, q1, q2, g);
    apply_2q_right(m, q1, q2, &g.adjoint());
    m.set_flags_unchecked(flags.0, flags.1);
}

/// `m <- diag(d) m`
pub fn apply_diagonal_left(m: &mut OperatorMatrix, d: &[C64]) {
    let n = m.dim;
    assert_eq!(d.len(), n, "diagonal length");
    for (row, &di) in m.data.chunks_exact_mut(n).zip(d) {
        for v in row.iter_mut() {
            *v *= di;
        }
    }
    m.clear_flags();
}

/// `m <- diag(d) m diag(d)^dagger`
pub fn conjugate_diagonal(m: &mut OperatorMatrix, d: &[C64]) {
    let n = m.dim;
    assert_eq!(d.len(), n, "diagonal length");
    for (row, &di) in m.data.chunks_exact_mut(n).zip(d) {
        for (v, dj) in row.iter_mut().zip(d) {
            *v *= di * dj.conj();
        }
    }
}

/// `m <- P m` where `P|i> = |perm[i]>`.
pub fn apply_permutation_left(m: &mut OperatorMatrix, perm: &[usize]) {
    let n = m.dim;
    assert_eq!(perm.len(), n, "permutation length");
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for (i, row) in m.data.chunks_exact(n).enumerate() {
        out[perm[i] * n..(perm[i] + 1) * n].copy_from_slice(row);
    }
    m.data = out;
    m.clear_flags();
}

/// `m <- P m P^T` where `P|i> = |perm[i]>`.
pub fn conjugate_permutation(m: &mut OperatorMatrix, perm: &[usize]) {
    let n = m.dim;
    assert_eq!(perm.len(), n, "permutation length");
    let mut out = vec![C64::new(0.0, 0.0); n * n];
    for (i, row) in m.data.chunks_exact(n).enumerate() {
        let dst = &mut out[perm[i] * n..(perm[i] + 1) * n];
        for (j, &v) in row.iter().enumerate() {
            dst[perm[j]] = v;
        }
    }
    m.data = out;
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    pub(crate) fn pauli_x() -> OperatorMatrix {
        OperatorMatrix::from_real_rows(&[&[0.0, 1.0], &[1.0, 0.0]])
            .unwrap()
            .into_hermitian()
            .unwrap()
    }

    fn pauli_y() -> OperatorMatrix {
        OperatorMatrix::new(2, vec![c(0.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(0.0, 0.0)])
            .unwrap()
            .into_hermitian()
            .unwrap()
    }

    fn pauli_z() -> OperatorMatrix {
        OperatorMatrix::from_real_diagonal(&[1.0, -1.0])
    }

    fn bell() -> OperatorMatrix {
        let s = 0.5;
        OperatorMatrix::from_real_rows(&[
            &[s, 0.0, 0.0, s],
            &[0.0, 0.0, 0.0, 0.0],
            &[0.0, 0.0, 0.0, 0.0],
            &[s, 0.0, 0.0, s],
        ])
        .unwrap()
        .into_hermitian()
        .unwrap()
    }

    #[test]
    fn kron_identity_and_layout() {
        let i2 = OperatorMatrix::identity(2);
        assert_eq!(kron(&i2, &i2), OperatorMatrix::identity(4));
        let zi = kron(&pauli_z(), &i2);
        let expected = OperatorMatrix::from_real_diagonal(&[1.0, 1.0, -1.0, -1.0]);
        assert!(zi.max_abs_diff(&expected) == 0.0);
    }

    #[test]
    fn matexp_closed_forms() {
        let half_z = pauli_z().scale(c(0.5, 0.0));
        let u = matexp_hermitian(&half_z, -2.0 * std::f64::consts::PI).unwrap();
        let minus_i = OperatorMatrix::identity(2).scale(c(-1.0, 0.0));
        assert!(u.max_abs_diff(&minus_i) < 1e-12);
        assert!(u.is_unitary_flagged());

        let xx = kron(&pauli_x(), &pauli_x());
        let alpha = 0.7;
        let u = matexp_hermitian(&xx, -alpha / 2.0).unwrap();
        let expected = OperatorMatrix::identity(4)
            .scale(c((alpha / 2.0).cos(), 0.0))
            .add(&xx.scale(c(0.0, -(alpha / 2.0).sin())))
            .unwrap();
        assert!(u.max_abs_diff(&expected) < 1e-12);
    }

    #[test]
    fn matexp_rejects_non_hermitian() {
        let m = OperatorMatrix::from_real_rows(&[&[0.0, 1.0], &[0.0, 0.0]]).unwrap();
        assert!(matches!(
            matexp_hermitian(&m, 1.0),
            Err(LinalgError::NonHermitianInput { .. })
        ));
    }

    #[test]
    fn partial_trace_of_bell_is_maximally_mixed() {
        let r = partial_trace(&bell(), &[0]).unwrap();
        let half = OperatorMatrix::identity(2).scale(c(0.5, 0.0));
        assert!(r.max_abs_diff(&half) < 1e-15);
    }

    #[test]
    fn partial_trace_factorizes_products() {
        let rho = OperatorMatrix::from_real_rows(&[&[0.7, 0.1], &[0.1, 0.3]]).unwrap();
        let sigma = OperatorMatrix::from_real_rows(&[&[2.0, 0.5], &[0.5, 1.0]]).unwrap();
        let r = partial_trace(&kron(&rho, &sigma), &[0]).unwrap();
        assert!(r.max_abs_diff(&rho.scale(sigma.trace())) < 1e-14);
        let r = partial_trace(&kron(&rho, &sigma), &[1]).unwrap();
        assert!(r.max_abs_diff(&sigma.scale(rho.trace())) < 1e-14);
    }

    #[test]
    fn partial_trace_index_out_of_range() {
        assert!(matches!(
            partial_trace(&bell(), &[2]),
            Err(LinalgError::IndexOutOfRange { index: 2, n_qubits: 2 })
        ));
    }

    #[test]
    fn partial_transpose_rules() {
        let rho = OperatorMatrix::new(2, vec![c(0.6, 0.0), c(0.1, 0.2), c(0.1, -0.2), c(0.4, 0.0)])
            .unwrap();
        let sigma = OperatorMatrix::new(2, vec![c(0.5, 0.0), c(0.0, 0.3), c(0.0, -0.3), c(0.5, 0.0)])
            .unwrap();
        let pt = partial_transpose(&kron(&rho, &sigma), &[1]).unwrap();
        assert_eq!(pt, kron(&rho, &sigma.transpose()));
        let twice = partial_transpose(&pt, &[1]).unwrap();
        assert_eq!(twice, kron(&rho, &sigma));
    }

    #[test]
    fn bell_partial_transpose_spectrum_and_norm() {
        let pt = partial_transpose(&bell(), &[1]).unwrap();
        let ev = eigenvalues_hermitian(&pt).unwrap();
        let expected = [-0.5, 0.5, 0.5, 0.5];
        for (a, b) in ev.iter().zip(expected) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!((trace_norm_hermitian(&pt).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn trace_norm_simple_cases() {
        let d = OperatorMatrix::from_real_diagonal(&[1.0, -2.0]);
        assert!((trace_norm_hermitian(&d).unwrap() - 3.0).abs() < 1e-14);
        assert!((trace_norm_hermitian(&bell()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn frobenius_pauli_cases() {
        assert_eq!(frobenius_inner(&pauli_x(), &pauli_z()).unwrap(), c(0.0, 0.0));
        assert_eq!(frobenius_inner(&pauli_y(), &pauli_y()).unwrap(), c(2.0, 0.0));
        let err = frobenius_inner(&pauli_x(), &OperatorMatrix::identity(4));
        assert!(matches!(err, Err(LinalgError::DimMismatch { left: 2, right: 4 })));
    }

    #[test]
    fn gate_routines_match_dense_products() {
        let g = matexp_hermitian(&pauli_y(), 0.3).unwrap();
        let g2 = [g.get(0, 0), g.get(0, 1), g.get(1, 0), g.get(1, 1)];
        let mut m = kron(&kron(&pauli_x(), &pauli_z()), &pauli_y());
        let dense = kron(&kron(&OperatorMatrix::identity(2), &g), &OperatorMatrix::identity(2));
        let expected = dense.conjugate(&m).unwrap();
        conjugate_1q(&mut m, 1, &g2);
        assert!(m.max_abs_diff(&expected) < 1e-14);

        let xx = kron(&pauli_x(), &pauli_y());
        let u = matexp_hermitian(&xx, 0.9).unwrap();
        let mut m = kron(&kron(&pauli_z(), &pauli_x()), &pauli_y());
        let dense = kron(&OperatorMatrix::identity(2), &u);
        let expected = dense.conjugate(&m).unwrap();
        conjugate_2q(&mut m, 1, 2, &u);
        assert!(m.max_abs_diff(&expected) < 1e-14);
    }

    #[test]
    fn sparse_inner_products_match_dense() {
        let a = kron(&pauli_x(), &pauli_y());
        let b = kron(&pauli_x(), &pauli_x()).add(&kron(&pauli_z(), &pauli_y())).unwrap();
        let (sa, sb) = (SparseOperator::from_dense(&a), SparseOperator::from_dense(&b));
        assert_eq!(sa.nnz(), 4);
        assert!(sa.to_dense().max_abs_diff(&a) == 0.0);
        let dense = hermitian_inner(&a, &b).unwrap();
        assert!((hermitian_inner_sparse(&sa, &sb).unwrap() - dense).norm() < 1e-15);
        assert!((hermitian_inner_sparse_dense(&sa, &b).unwrap() - dense).norm() < 1e-15);
        let self_overlap = hermitian_inner_sparse(&sb, &sb).unwrap();
        assert!((self_overlap - hermitian_inner(&b, &b).unwrap()).norm() < 1e-15);
        assert!(hermitian_inner_sparse(&sa, &SparseOperator::from_dense(&pauli_x())).is_err());
    }

    #[test]
    fn flags_are_cleared_by_mutation() {
        let mut m = OperatorMatrix::identity(2);
        assert!(m.is_unitary_flagged());
        m.set(0, 1, c(1.0, 0.0));
        assert!(!m.is_unitary_flagged());
        assert!(!m.is_hermitian_flagged());
    }
}
