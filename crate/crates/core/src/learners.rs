//! Kernel ridge regression and soft-margin SVM over precomputed Gram
//! matrices, plus the error metrics used to score them.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::{GramMatrix, Input, Kernel, KernelError};
use crate::parallel::try_map_indexed;

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_C: f64 = 1.0;
pub const DEFAULT_SVM_TOL: f64 = 1e-3;

/// Relative eigenvalue cutoff of the pseudo-inverse fallback.
const PINV_RCOND: f64 = 1e-12;
const KRR_RESIDUAL_TOL: f64 = 1e-6;
const TAU: f64 = 1e-12;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnerError {
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("linear system is singular: residual {residual:e} after pseudo-inverse")]
    SingularSystem { residual: f64 },
    #[error("all training labels belong to one class")]
    DegenerateLabels,
    #[error("labels must be -1 or +1, got {0}")]
    InvalidLabel(f64),
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
    #[error("model is {found:?}, operation needs {expected:?}")]
    WrongModelKind { expected: ModelKind, found: ModelKind },
    #[error("metric needs at least one sample")]
    EmptyInput,
    #[error("targets have zero range")]
    ZeroRange,
    #[error(transparent)]
    Kernel(#[from] KernelError),
}

pub type Result<T> = std::result::Result<T, LearnerError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Krr,
    Svm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitStatus {
    Converged,
    ConvergenceWarning,
}

/// Dual coefficients of a fitted model.
///
/// For KRR `f(x) = sum_i alpha_i k(x_i, x)`. For the SVM the alphas are the
/// dual variables and `f(x) = sum_i alpha_i y_i k(x_i, x) + bias`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DualWeights {
    pub kind: ModelKind,
    pub alphas: Vec<f64>,
    pub bias: f64,
    /// SVM training labels; empty for KRR.
    pub labels: Vec<f64>,
    pub status: FitStatus,
    pub iterations: usize,
    /// Ridge for KRR, box constraint C for the SVM.
    pub regularization: f64,
    pub gram_digest: String,
}

impl DualWeights {
    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }

    /// Coefficients multiplying `k(x_i, x)` in the decision function.
    pub fn expansion_coefficients(&self) -> Vec<f64> {
        match self.kind {
            ModelKind::Krr => self.alphas.clone(),
            ModelKind::Svm => self.alphas.iter().zip(&self.labels).map(|(a, y)| a * y).collect(),
        }
    }

    /// Decision value from a precomputed kernel row `k(x_i, x)`.
    pub fn evaluate_row(&self, row: &[f64]) -> Result<f64> {
        check_len(self.len(), row.len())?;
        let coef = self.expansion_coefficients();
        Ok(coef.iter().zip(row).map(|(c, k)| c * k).sum::<f64>() + self.bias)
    }

    fn require(&self, kind: ModelKind) -> Result<()> {
        if self.kind != kind {
            return Err(LearnerError::WrongModelKind {
                expected: kind,
                found: self.kind,
            });
        }
        Ok(())
    }
}

/// Dual weights together with the training inputs they expand over.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub weights: DualWeights,
    pub inputs: Vec<Input>,
}

impl TrainedModel {
    pub fn new(weights: DualWeights, inputs: Vec<Input>) -> Result<Self> {
        check_len(weights.len(), inputs.len())?;
        Ok(Self { weights, inputs })
    }

    pub fn decision<K: Kernel + ?Sized>(&self, kernel: &K, x: &Input) -> Result<f64> {
        let row = kernel.row(&self.inputs, x)?;
        self.weights.evaluate_row(&row)
    }

    /// Decision values over a batch, computed in parallel.
    pub fn decisions<K: Kernel + ?Sized>(&self, kernel: &K, xs: &[Input]) -> Result<Vec<f64>> {
        try_map_indexed(xs.len(), |i| self.decision(kernel, &xs[i]))
    }
}

fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(LearnerError::LengthMismatch { expected, found });
    }
    Ok(())
}

/// Solves `(K + ridge I) alpha = y`.
pub fn krr_fit(gram: &GramMatrix, targets: &[f64], ridge: f64) -> Result<DualWeights> {
    let n = gram.n();
    check_len(n, targets.len())?;
    if !(ridge >= 0.0 && ridge.is_finite()) {
        return Err(LearnerError::InvalidHyperparameter(format!("ridge must be >= 0, got {ridge}")));
    }
    let mut k = gram.to_nalgebra();
    for i in 0..n {
        k[(i, i)] += ridge;
    }
    let y = DVector::from_column_slice(targets);
    let alpha = match k.clone().cholesky() {
        Some(ch) => ch.solve(&y),
        None => pseudo_inverse_solve(&k, &y)?,
    };
    Ok(DualWeights {
        kind: ModelKind::Krr,
        alphas: alpha.iter().copied().collect(),
        bias: 0.0,
        labels: Vec::new(),
        status: FitStatus::Converged,
        iterations: 0,
        regularization: ridge,
        gram_digest: gram.inputs_digest().to_owned(),
    })
}

fn pseudo_inverse_solve(k: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let eig = SymmetricEigen::new(k.clone());
    let max = eig.eigenvalues.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let cutoff = PINV_RCOND * max * k.nrows() as f64;
    let proj = eig.eigenvectors.transpose() * y;
    let scaled = DVector::from_iterator(
        proj.len(),
        proj.iter()
            .zip(eig.eigenvalues.iter())
            .map(|(p, &l)| if l.abs() > cutoff { p / l } else { 0.0 }),
    );
    let alpha = &eig.eigenvectors * scaled;
    let residual = (k * &alpha - y).amax();
    if residual > KRR_RESIDUAL_TOL * (1.0 + y.amax()) {
        return Err(LearnerError::SingularSystem { residual });
    }
    Ok(alpha)
}

pub fn krr_predict<K: Kernel + ?Sized>(model: &TrainedModel, kernel: &K, x: &Input) -> Result<f64> {
    model.weights.require(ModelKind::Krr)?;
    model.decision(kernel, x)
}

/// SMO solver settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SvmOptions {
    pub c: f64,
    /// KKT violation tolerance.
    pub tol: f64,
    /// Iterations without objective decrease before giving up; `None` means `max(10 N, 1000)`.
    pub stall_limit: Option<usize>,
    /// Hard iteration cap; `None` means `max(100 000, 1000 N)`.
    pub max_iter: Option<usize>,
}

impl Default for SvmOptions {
    fn default() -> Self {
        Self {
            c: DEFAULT_C,
            tol: DEFAULT_SVM_TOL,
            stall_limit: None,
            max_iter: None,
        }
    }
}

impl SvmOptions {
    pub fn with_c(c: f64) -> Self {
        Self { c, ..Self::default() }
    }
}

pub fn svm_fit(gram: &GramMatrix, labels: &[f64], c: f64) -> Result<DualWeights> {
    svm_fit_with(gram, labels, &SvmOptions::with_c(c))
}

/// Soft-margin dual by SMO with second-order working-set selection.
pub fn svm_fit_with(gram: &GramMatrix, labels: &[f64], opts: &SvmOptions) -> Result<DualWeights> {
    let n = gram.n();
    check_len(n, labels.len())?;
    if let Some(&bad) = labels.iter().find(|&&y| y != 1.0 && y != -1.0) {
        return Err(LearnerError::InvalidLabel(bad));
    }
    if labels.iter().all(|&y| y == labels[0]) {
        return Err(LearnerError::DegenerateLabels);
    }
    let c = opts.c;
    if !(c > 0.0 && c.is_finite()) {
        return Err(LearnerError::InvalidHyperparameter(format!("C must be > 0, got {c}")));
    }
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(LearnerError::InvalidHyperparameter(format!("tol must be > 0, got {}", opts.tol)));
    }
    let stall_limit = opts.stall_limit.unwrap_or((10 * n).max(1000));
    let max_iter = opts.max_iter.unwrap_or((1000 * n).max(100_000));

    let y = labels;
    let k = |i: usize, j: usize| gram.get(i, j);
    let q = |i: usize, j: usize| y[i] * y[j] * gram.get(i, j);
    let mut alpha = vec![0.0; n];
    // Gradient of 0.5 a'Qa - e'a.
    let mut grad = vec![-1.0; n];
    let mut objective = 0.0;
    let mut stalled = 0usize;
    let mut iterations = 0usize;
    let mut status = FitStatus::ConvergenceWarning;

    let in_up = |a: f64, yt: f64| (yt > 0.0 && a < c) || (yt < 0.0 && a > 0.0);
    let in_low = |a: f64, yt: f64| (yt > 0.0 && a > 0.0) || (yt < 0.0 && a < c);

    while iterations < max_iter {
        let mut gmax = f64::NEG_INFINITY;
        let mut i_sel = usize::MAX;
        for t in 0..n {
            if in_up(alpha[t], y[t]) {
                let v = -y[t] * grad[t];
                if v > gmax {
                    gmax = v;
                    i_sel = t;
                }
            }
        }
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j_sel = usize::MAX;
        let mut best = f64::INFINITY;
        for t in 0..n {
            if !in_low(alpha[t], y[t]) {
                continue;
            }
            let v = y[t] * grad[t];
            gmax2 = gmax2.max(v);
            if i_sel == usize::MAX {
                continue;
            }
            let b = gmax + v;
            if b > 0.0 {
                let mut a = k(i_sel, i_sel) + k(t, t) - 2.0 * k(i_sel, t);
                if a <= 0.0 {
                    a = TAU;
                }
                let score = -b * b / a;
                if score < best {
                    best = score;
                    j_sel = t;
                }
            }
        }
        if gmax + gmax2 < opts.tol || j_sel == usize::MAX {
            status = FitStatus::Converged;
            break;
        }
        iterations += 1;
        let (i, j) = (i_sel, j_sel);
        let (old_i, old_j) = (alpha[i], alpha[j]);
        let mut quad = q(i, i) + q(j, j) - 2.0 * y[i] * y[j] * q(i, j);
        if quad <= 0.0 {
            quad = TAU;
        }
        if y[i] != y[j] {
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }
        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        // Exact objective change of the two-variable step.
        let change = di * grad[i] + dj * grad[j] + 0.5 * (di * di * q(i, i) + dj * dj * q(j, j)) + di * dj * q(i, j);
        for t in 0..n {
            grad[t] += q(t, i) * di + q(t, j) * dj;
        }
        objective += change;
        if change < -1e-15 * (1.0 + objective.abs()) {
            stalled = 0;
        } else {
            stalled += 1;
            if stalled >= stall_limit {
                break;
            }
        }
    }

    let bias = svm_bias(&alpha, y, &grad, c);
    Ok(DualWeights {
        kind: ModelKind::Svm,
        alphas: alpha,
        bias,
        labels: y.to_vec(),
        status,
        iterations,
        regularization: c,
        gram_digest: gram.inputs_digest().to_owned(),
    })
}

/// Mean of `y_i - sum_j alpha_j y_j K_ij` over free support vectors, or the
/// midpoint of the feasible interval when none are free.
fn svm_bias(alpha: &[f64], y: &[f64], grad: &[f64], c: f64) -> f64 {
    let mut sum = 0.0;
    let mut free = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..alpha.len() {
        let yg = y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            sum += -yg;
            free += 1;
        } else {
            let at_upper = alpha[t] >= c;
            // Bound on b = -y_t g_t implied by the KKT conditions.
            if (at_upper && y[t] < 0.0) || (!at_upper && y[t] > 0.0) {
                lb = lb.max(-yg);
            } else {
                ub = ub.min(-yg);
            }
        }
    }
    if free > 0 {
        sum / free as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else if lb.is_finite() {
        lb
    } else {
        0.0
    }
}

pub fn svm_decision<K: Kernel + ?Sized>(model: &TrainedModel, kernel: &K, x: &Input) -> Result<f64> {
    model.weights.require(ModelKind::Svm)?;
    model.decision(kernel, x)
}

/// Class label of a decision value; ties go to `+1`.
pub fn classify(f: f64) -> f64 {
    if f >= 0.0 {
        1.0
    } else {
        -1.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RmsPercent,
    Hinge,
    Accuracy,
}

pub fn metric(predictions: &[f64], truth: &[f64], kind: Metric) -> Result<f64> {
    match kind {
        Metric::RmsPercent => rms_percent(predictions, truth),
        Metric::Hinge => hinge_loss(predictions, truth),
        Metric::Accuracy => accuracy(predictions, truth),
    }
}

fn check_pair(a: &[f64], b: &[f64]) -> Result<()> {
    check_len(b.len(), a.len())?;
    if a.is_empty() {
        return Err(LearnerError::EmptyInput);
    }
    Ok(())
}

/// `100 RMSE / (max(truth) - min(truth))`.
pub fn rms_percent(predictions: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(predictions, truth)?;
    let (lo, hi) = truth
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &t| (lo.min(t), hi.max(t)));
    let range = hi - lo;
    if range <= 0.0 {
        return Err(LearnerError::ZeroRange);
    }
    let mse = predictions
        .iter()
        .zip(truth)
        .map(|(p, t)| (p - t) * (p - t))
        .sum::<f64>()
        / truth.len() as f64;
    Ok(100.0 * mse.sqrt() / range)
}

/// `mean_i max(0, 1 - y_i f_i)`.
pub fn hinge_loss(decisions: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(decisions, labels)?;
    Ok(decisions
        .iter()
        .zip(labels)
        .map(|(f, y)| (1.0 - y * f).max(0.0))
        .sum::<f64>()
        / labels.len() as f64)
}

/// Fraction of decision signs matching the labels.
pub fn accuracy(decisions: &[f64], labels: &[f64]) -> Result<f64> {
    check_pair(decisions, labels)?;
    let hits = decisions
        .iter()
        .zip(labels)
        .filter(|(f, y)| classify(**f) == classify(**y))
        .count();
    Ok(hits as f64 / labels.len() as f64)
}
