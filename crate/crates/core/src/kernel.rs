//! Quantum kernel evaluation, Gram matrices, 1-D profiles, 2-D slices and
//! the classical Gaussian baseline.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use nalgebra::{DMatrix, SymmetricEigen};
use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::linalg::{self, LinalgError, OperatorMatrix, SparseOperator};
use crate::parallel::try_map_indexed;
use crate::register::{
    classical_circuit, feature_from_circuit, unitary_circuit, EncodingSpec, RegisterError, Topology,
};

pub const SYMMETRY_TOL: f64 = 1e-12;
pub const DIAGONAL_TOL: f64 = 1e-10;
pub const PSD_TOL: f64 = 1e-8;
pub const IMAGINARY_TOL: f64 = 1e-10;

pub const DEFAULT_CACHE_ENTRIES: usize = 256;
/// Upper bound on cached feature-operator memory (16 MiB per dense operator at 10 qubits).
pub const DEFAULT_CACHE_BYTES: usize = 2 << 30;

/// Resolution of the memo table used by the 1-D stationary fast path.
const DELTA_RESOLUTION: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KernelError {
    #[error("inputs mix classical vectors and unitaries")]
    MixedInputKinds,
    #[error("input dimension mismatch: {left} vs {right}")]
    DimMismatch { left: usize, right: usize },
    #[error("kernel value has imaginary residue {0:e}")]
    ImaginaryResidue(f64),
    #[error("gaussian kernel width must be positive, got {0}")]
    NonPositiveSigma(f64),
    #[error("{0} requires classical inputs")]
    ClassicalOnly(&'static str),
    #[error("gram matrix invariant violated: {0}")]
    InvalidGram(String),
    #[error(transparent)]
    Register(#[from] RegisterError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, KernelError>;

/// A kernel input: a real feature vector or a two-qubit unitary.
#[derive(Debug, Clone, PartialEq)]
pub enum Input {
    Vector(Vec<f64>),
    Unitary(OperatorMatrix),
}

impl Input {
    pub fn scalar(x: f64) -> Self {
        Input::Vector(vec![x])
    }

    pub fn as_vector(&self) -> Option<&[f64]> {
        match self {
            Input::Vector(v) => Some(v),
            Input::Unitary(_) => None,
        }
    }

    fn cache_key(&self) -> Vec<u64> {
        match self {
            Input::Vector(v) => std::iter::once(0u64).chain(v.iter().map(|x| x.to_bits())).collect(),
            Input::Unitary(u) => std::iter::once(1u64)
                .chain(u.as_slice().iter().flat_map(|c| [c.re.to_bits(), c.im.to_bits()]))
                .collect(),
        }
    }

    fn digest_into(&self, hasher: &mut Sha256) {
        for word in self.cache_key() {
            hasher.update(word.to_le_bytes());
        }
    }
}

fn check_same_kind(a: &Input, b: &Input) -> Result<()> {
    match (a, b) {
        (Input::Vector(x), Input::Vector(y)) if x.len() != y.len() => Err(KernelError::DimMismatch {
            left: x.len(),
            right: y.len(),
        }),
        (Input::Vector(_), Input::Vector(_)) | (Input::Unitary(_), Input::Unitary(_)) => Ok(()),
        _ => Err(KernelError::MixedInputKinds),
    }
}

fn check_homogeneous(inputs: &[Input]) -> Result<()> {
    if let Some(first) = inputs.first() {
        for x in &inputs[1..] {
            check_same_kind(first, x)?;
        }
    }
    Ok(())
}

/// Hex SHA-256 over a kernel description and the exact bits of the inputs.
pub fn inputs_digest(description: &str, inputs: &[Input]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(description.as_bytes());
    hasher.update((inputs.len() as u64).to_le_bytes());
    for x in inputs {
        x.digest_into(&mut hasher);
    }
    hasher
        .finalize()
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// Symmetric kernel matrix over a dataset.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GramMatrix {
    n: usize,
    values: Vec<f64>,
    inputs_digest: String,
    diagonal_normalized: bool,
}

impl GramMatrix {
    /// Builds from row-major values, checking symmetry.
    pub fn from_values(n: usize, values: Vec<f64>, inputs_digest: impl Into<String>) -> Result<Self> {
        if values.len() != n * n {
            return Err(KernelError::InvalidGram(format!(
                "expected {} entries, got {}",
                n * n,
                values.len()
            )));
        }
        for i in 0..n {
            for j in (i + 1)..n {
                let d = (values[i * n + j] - values[j * n + i]).abs();
                if d >= SYMMETRY_TOL {
                    return Err(KernelError::InvalidGram(format!("asymmetric at ({i}, {j}): {d:e}")));
                }
            }
        }
        let diagonal_normalized = (0..n).all(|i| (values[i * n + i] - 1.0).abs() < DIAGONAL_TOL);
        Ok(Self {
            n,
            values,
            inputs_digest: inputs_digest.into(),
            diagonal_normalized,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn inputs_digest(&self) -> &str {
        &self.inputs_digest
    }

    pub fn diagonal_normalized(&self) -> bool {
        self.diagonal_normalized
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n, self.n, &self.values)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.n == 0 {
            return Vec::new();
        }
        let mut ev: Vec<f64> = SymmetricEigen::new(self.to_nalgebra()).eigenvalues.iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn check_psd(&self) -> Result<()> {
        let min = self.min_eigenvalue();
        if min < -PSD_TOL {
            return Err(KernelError::InvalidGram(format!("smallest eigenvalue {min:e}")));
        }
        Ok(())
    }

    /// Entrywise scaling (the digest is kept).
    pub fn scaled(&self, factor: f64) -> Self {
        let values: Vec<f64> = self.values.iter().map(|v| v * factor).collect();
        let diagonal_normalized = (0..self.n).all(|i| (values[i * self.n + i] - 1.0).abs() < DIAGONAL_TOL);
        Self {
            n: self.n,
            values,
            inputs_digest: self.inputs_digest.clone(),
            diagonal_normalized,
        }
    }

    /// Principal submatrix on the given indices, in the given order.
    pub fn select(&self, idx: &[usize]) -> Self {
        let m = idx.len();
        let mut values = Vec::with_capacity(m * m);
        for &i in idx {
            for &j in idx {
                values.push(self.get(i, j));
            }
        }
        Self {
            n: m,
            values,
            inputs_digest: self.inputs_digest.clone(),
            diagonal_normalized: self.diagonal_normalized,
        }
    }
}

/// A positive semidefinite kernel over [`Input`]s.
pub trait Kernel: Sync {
    fn value(&self, a: &Input, b: &Input) -> Result<f64>;

    /// Kernel description folded into Gram digests.
    fn description(&self) -> String;

    fn gram(&self, inputs: &[Input]) -> Result<GramMatrix> {
        check_homogeneous(inputs)?;
        let n = inputs.len();
        let rows = try_map_indexed(n, |i| {
            (i..n)
                .map(|j| self.value(&inputs[i], &inputs[j]))
                .collect::<Result<Vec<f64>>>()
        })?;
        let gram = assemble_upper(n, &rows, inputs_digest(&self.description(), inputs))?;
        Ok(gram)
    }

    /// `k(x_i, x)` for every training input `x_i`.
    fn row(&self, training: &[Input], x: &Input) -> Result<Vec<f64>> {
        training.iter().map(|t| self.value(t, x)).collect()
    }

    fn rows(&self, training: &[Input], xs: &[Input]) -> Result<Vec<Vec<f64>>> {
        try_map_indexed(xs.len(), |i| self.row(training, &xs[i]))
    }
}

fn assemble_upper(n: usize, rows: &[Vec<f64>], digest: String) -> Result<GramMatrix> {
    let mut values = vec![0.0; n * n];
    for (i, row) in rows.iter().enumerate() {
        for (off, &v) in row.iter().enumerate() {
            let j = i + off;
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    GramMatrix::from_values(n, values, digest)
}

/// Densities at or below this fraction of nonzero entries are stored sparse.
const SPARSE_DENSITY: f64 = 0.125;

/// A feature operator, stored as compressed rows when mostly zero.
#[derive(Debug, Clone, PartialEq)]
pub enum Feature {
    Dense(OperatorMatrix),
    Sparse(SparseOperator),
}

impl Feature {
    pub fn from_operator(op: OperatorMatrix) -> Self {
        let nnz = op.as_slice().iter().filter(|v| v.re != 0.0 || v.im != 0.0).count();
        if (nnz as f64) <= SPARSE_DENSITY * op.as_slice().len() as f64 {
            Feature::Sparse(SparseOperator::from_dense(&op))
        } else {
            Feature::Dense(op)
        }
    }

    pub fn to_dense(&self) -> OperatorMatrix {
        match self {
            Feature::Dense(m) => m.clone(),
            Feature::Sparse(s) => s.to_dense(),
        }
    }

    pub fn bytes(&self) -> usize {
        match self {
            Feature::Dense(m) => m.dim() * m.dim() * std::mem::size_of::<linalg::C64>(),
            Feature::Sparse(s) => s.bytes(),
        }
    }

    /// `sum_ij a_ij conj(b_ij)`, which equals `Tr[a b]` for Hermitian `b`.
    pub fn inner(&self, other: &Feature) -> linalg::Result<linalg::C64> {
        match (self, other) {
            (Feature::Dense(a), Feature::Dense(b)) => linalg::hermitian_inner(a, b),
            (Feature::Sparse(a), Feature::Sparse(b)) => linalg::hermitian_inner_sparse(a, b),
            (Feature::Sparse(a), Feature::Dense(b)) => linalg::hermitian_inner_sparse_dense(a, b),
            (Feature::Dense(a), Feature::Sparse(b)) => {
                linalg::hermitian_inner_sparse_dense(b, a).map(|v| v.conj())
            }
        }
    }
}

#[derive(Default)]
struct CacheInner {
    map: HashMap<Vec<u64>, (Arc<Feature>, u64)>,
    tick: u64,
    bytes: usize,
}

/// Bounded LRU of feature operators, safe for concurrent get-or-insert.
struct FeatureCache {
    max_entries: usize,
    max_bytes: usize,
    inner: Mutex<CacheInner>,
}

impl FeatureCache {
    fn new(max_entries: usize, max_bytes: usize) -> Self {
        Self {
            max_entries,
            max_bytes,
            inner: Mutex::new(CacheInner::default()),
        }
    }

    fn get_or_insert_with(
        &self,
        key: Vec<u64>,
        compute: impl FnOnce() -> Result<Feature>,
    ) -> Result<Arc<Feature>> {
        {
            let mut inner = self.inner.lock().expect("feature cache poisoned");
            inner.tick += 1;
            let tick = inner.tick;
            if let Some(entry) = inner.map.get_mut(&key) {
                entry.1 = tick;
                return Ok(entry.0.clone());
            }
        }
        let op = Arc::new(compute()?);
        let size = op.bytes();
        let mut inner = self.inner.lock().expect("feature cache poisoned");
        inner.tick += 1;
        let tick = inner.tick;
        if let Some(entry) = inner.map.get_mut(&key) {
            entry.1 = tick;
            return Ok(entry.0.clone());
        }
        if self.max_entries == 0 || size > self.max_bytes {
            return Ok(op);
        }
        while inner.map.len() >= self.max_entries || inner.bytes + size > self.max_bytes {
            let oldest = inner
                .map
                .iter()
                .min_by_key(|(_, (_, t))| *t)
                .map(|(k, (m, _))| (k.clone(), m.bytes()));
            match oldest {
                Some((k, bytes)) => {
                    inner.map.remove(&k);
                    inner.bytes -= bytes;
                }
                None => break,
            }
        }
        inner.bytes += size;
        inner.map.insert(key, (op.clone(), tick));
        Ok(op)
    }

    fn clear(&self) {
        let mut inner = self.inner.lock().expect("feature cache poisoned");
        inner.map.clear();
        inner.bytes = 0;
    }

    fn len(&self) -> usize {
        self.inner.lock().expect("feature cache poisoned").map.len()
    }
}

/// Normalized Frobenius-overlap kernel `Tr[A_i A_j] / Tr[(I_z^C)^2]`.
pub struct QuantumKernel {
    spec: EncodingSpec,
    norm: f64,
    cache: FeatureCache,
    profile_memo: Mutex<HashMap<i64, f64>>,
}

impl QuantumKernel {
    pub fn new(spec: EncodingSpec) -> Result<Self> {
        Self::with_cache_limits(spec, DEFAULT_CACHE_ENTRIES, DEFAULT_CACHE_BYTES)
    }

    pub fn with_cache_limits(spec: EncodingSpec, max_entries: usize, max_bytes: usize) -> Result<Self> {
        spec.validate()?;
        Ok(Self {
            norm: spec.register.dim() as f64 / 4.0,
            spec,
            cache: FeatureCache::new(max_entries, max_bytes),
            profile_memo: Mutex::new(HashMap::new()),
        })
    }

    pub fn spec(&self) -> &EncodingSpec {
        &self.spec
    }

    pub fn cached_features(&self) -> usize {
        self.cache.len()
    }

    pub fn clear_cache(&self) {
        self.cache.clear();
        self.profile_memo.lock().expect("memo poisoned").clear();
    }

    /// Feature operator of one input, computed without touching the cache.
    pub fn compute_feature(&self, input: &Input) -> Result<OperatorMatrix> {
        let circuit = match input {
            Input::Vector(x) => classical_circuit(&self.spec, x)?,
            Input::Unitary(u) => unitary_circuit(&self.spec, u)?,
        };
        Ok(feature_from_circuit(&self.spec, &circuit))
    }

    fn compute(&self, input: &Input) -> Result<Feature> {
        Ok(Feature::from_operator(self.compute_feature(input)?))
    }

    /// Feature operator of one input, through the LRU cache.
    pub fn feature(&self, input: &Input) -> Result<Arc<Feature>> {
        self.cache.get_or_insert_with(input.cache_key(), || self.compute(input))
    }

    fn overlap(&self, a: &Feature, b: &Feature) -> Result<f64> {
        let raw = a.inner(b)? / self.norm;
        if raw.im.abs() >= IMAGINARY_TOL {
            return Err(KernelError::ImaginaryResidue(raw.im));
        }
        Ok(raw.re)
    }

    /// Raw central-spin signal `Tr[U_j^dag U_i rho U_i^dag U_j I_z^C]` for
    /// `rho = (1 + purity I_z^C) / 2`, i.e. `(purity / 2) Tr[A_i A_j]`.
    pub fn signal(&self, a: &Input, b: &Input) -> Result<f64> {
        Ok(self.value(a, b)? * self.norm * self.spec.purity / 2.0)
    }

    fn is_stationary_1d(&self, inputs: &[Input]) -> bool {
        matches!(self.spec.register.topology(), Topology::Star { .. })
            && inputs.iter().all(|x| matches!(x, Input::Vector(v) if v.len() == 1))
    }

    fn require_star(&self) -> Result<()> {
        match self.spec.register.topology() {
            Topology::Star { .. } => Ok(()),
            _ => Err(RegisterError::WrongTopology {
                expected: "star",
                found: self.spec.register.topology_name(),
            }
            .into()),
        }
    }

    /// `k(delta, 0)` for a 1-D input, `delta` in radians after scaling.
    pub fn profile_value(&self, delta: f64) -> Result<f64> {
        self.require_star()?;
        let x = delta / self.spec.input_scale;
        let a = self.compute(&Input::scalar(x))?;
        let origin = self.feature(&Input::scalar(0.0))?;
        self.overlap(&a, &origin)
    }

    fn memo_profile(&self, delta: f64) -> Result<f64> {
        let key = (delta / DELTA_RESOLUTION).round() as i64;
        if let Some(&v) = self.profile_memo.lock().expect("memo poisoned").get(&key) {
            return Ok(v);
        }
        let v = self.profile_value(key as f64 * DELTA_RESOLUTION)?;
        self.profile_memo.lock().expect("memo poisoned").insert(key, v);
        Ok(v)
    }

    /// Gram from the memoized profile; `None` when the inputs have more
    /// distinct offsets than points, where per-input features are cheaper.
    fn gram_stationary(&self, inputs: &[Input]) -> Result<Option<GramMatrix>> {
        let n = inputs.len();
        let xs: Vec<f64> = inputs.iter().map(|x| x.as_vector().expect("checked")[0]).collect();
        let gamma = self.spec.input_scale;
        let mut deltas: Vec<i64> = Vec::new();
        for i in 0..n {
            for j in i..n {
                deltas.push((gamma * (xs[i] - xs[j]) / DELTA_RESOLUTION).round() as i64);
            }
        }
        let mut distinct = deltas.clone();
        distinct.sort_unstable();
        distinct.dedup();
        if distinct.len() > n {
            return Ok(None);
        }
        let values = try_map_indexed(distinct.len(), |k| self.memo_profile(distinct[k] as f64 * DELTA_RESOLUTION))?;
        let table: HashMap<i64, f64> = distinct.into_iter().zip(values).collect();
        let mut it = deltas.iter();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|i| (i..n).map(|_| table[it.next().expect("len")]).collect())
            .collect();
        assemble_upper(n, &rows, inputs_digest(&self.description(), inputs)).map(Some)
    }

    /// Features for every input, cached.
    pub fn features(&self, inputs: &[Input]) -> Result<Vec<Arc<Feature>>> {
        try_map_indexed(inputs.len(), |i| self.feature(&inputs[i]))
    }

    /// Evaluates the kernel profile `k(delta, 0)` over a grid of radian offsets.
    pub fn kernel_profile_1d(&self, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
        self.require_star()?;
        let values = try_map_indexed(deltas.len(), |i| self.profile_value(deltas[i]))?;
        Ok(deltas.iter().copied().zip(values).collect())
    }

    /// Reduced 2-D kernel `k({xi1, xi2}, {xj1, 0})` over a product grid,
    /// ordered by `xj1`, then `xi2`, then `xi1`.
    pub fn kernel_slices_2d(&self, grid: &SliceGrid) -> Result<Vec<SlicePoint>> {
        self.require_star()?;
        let refs: Vec<Arc<Feature>> = grid
            .xj1
            .iter()
            .map(|&x| self.feature(&Input::Vector(vec![x, 0.0])))
            .collect::<Result<_>>()?;
        let probes: Vec<(f64, f64)> = grid
            .xi2
            .iter()
            .flat_map(|&b| grid.xi1.iter().map(move |&a| (a, b)))
            .collect();
        let values = try_map_indexed(probes.len(), |p| {
            let (a, b) = probes[p];
            let f = self.compute(&Input::Vector(vec![a, b]))?;
            refs.iter().map(|r| self.overlap(&f, r)).collect::<Result<Vec<f64>>>()
        })?;
        let mut out = Vec::with_capacity(probes.len() * grid.xj1.len());
        for (s, &xj1) in grid.xj1.iter().enumerate() {
            for (p, &(xi1, xi2)) in probes.iter().enumerate() {
                out.push(SlicePoint {
                    xi1,
                    xi2,
                    xj1,
                    value: values[p][s],
                });
            }
        }
        Ok(out)
    }
}

impl Kernel for QuantumKernel {
    fn value(&self, a: &Input, b: &Input) -> Result<f64> {
        check_same_kind(a, b)?;
        let fa = self.feature(a)?;
        let fb = self.feature(b)?;
        self.overlap(&fa, &fb)
    }

    fn description(&self) -> String {
        serde_json::to_string(&self.spec).expect("spec serializes")
    }

    fn gram(&self, inputs: &[Input]) -> Result<GramMatrix> {
        check_homogeneous(inputs)?;
        if self.is_stationary_1d(inputs) {
            if let Some(g) = self.gram_stationary(inputs)? {
                return Ok(g);
            }
        }
        let feats = self.features(inputs)?;
        let n = inputs.len();
        let rows = try_map_indexed(n, |i| {
            (i..n)
                .map(|j| self.overlap(&feats[i], &feats[j]))
                .collect::<Result<Vec<f64>>>()
        })?;
        assemble_upper(n, &rows, inputs_digest(&self.description(), inputs))
    }

    fn row(&self, training: &[Input], x: &Input) -> Result<Vec<f64>> {
        if let Some(t) = training.first() {
            check_same_kind(t, x)?;
        }
        let fx = self.compute(x)?;
        training
            .iter()
            .map(|t| self.overlap(&*self.feature(t)?, &fx))
            .collect()
    }
}

/// Grid for the reduced 2-D kernel.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceGrid {
    pub xi1: Vec<f64>,
    pub xi2: Vec<f64>,
    pub xj1: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SlicePoint {
    pub xi1: f64,
    pub xi2: f64,
    pub xj1: f64,
    pub value: f64,
}

/// One-shot kernel evaluation.
pub fn kernel_value(spec: &EncodingSpec, a: &Input, b: &Input) -> Result<f64> {
    QuantumKernel::with_cache_limits(*spec, 0, 0)?.value(a, b)
}

pub fn gram(spec: &EncodingSpec, dataset: &[Input]) -> Result<GramMatrix> {
    QuantumKernel::new(*spec)?.gram(dataset)
}

pub fn kernel_profile_1d(spec: &EncodingSpec, deltas: &[f64]) -> Result<Vec<(f64, f64)>> {
    QuantumKernel::new(*spec)?.kernel_profile_1d(deltas)
}

pub fn kernel_slices_2d(spec: &EncodingSpec, grid: &SliceGrid) -> Result<Vec<SlicePoint>> {
    QuantumKernel::new(*spec)?.kernel_slices_2d(grid)
}

/// `exp(-|a - b|^2 / (2 sigma^2))` on raw parameters.
pub fn gaussian_kernel(a: &[f64], b: &[f64], sigma: f64) -> Result<f64> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(KernelError::NonPositiveSigma(sigma));
    }
    if a.len() != b.len() {
        return Err(KernelError::DimMismatch {
            left: a.len(),
            right: b.len(),
        });
    }
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((-d2 / (2.0 * sigma * sigma)).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GaussianKernel {
    pub sigma: f64,
}

impl GaussianKernel {
    pub fn new(sigma: f64) -> Result<Self> {
        gaussian_kernel(&[], &[], sigma)?;
        Ok(Self { sigma })
    }
}

impl Kernel for GaussianKernel {
    fn value(&self, a: &Input, b: &Input) -> Result<f64> {
        match (a, b) {
            (Input::Vector(x), Input::Vector(y)) => gaussian_kernel(x, y, self.sigma),
            (Input::Unitary(_), Input::Unitary(_)) => Err(KernelError::ClassicalOnly("gaussian kernel")),
            _ => Err(KernelError::MixedInputKinds),
        }
    }

    fn description(&self) -> String {
        format!("gaussian(sigma={:e})", self.sigma)
    }
}
