//! Deterministic experiment runner: strict JSON configuration, task
//! dispatch and CSV/JSON artifacts.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use crate::datasets::{self, Dataset, WindowMap};
use crate::entangle::{self, EntanglementConfig, TrainRegion};
use crate::kernel::{GaussianKernel, Input, Kernel, QuantumKernel, SliceGrid};
use crate::learners::{self, DualWeights, SvmOptions, TrainedModel};
use crate::register::{EncodingSpec, EntanglerChoice, RegisterSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    #[serde(rename = "kernel-1d")]
    Kernel1d,
    #[serde(rename = "kernel-2d")]
    Kernel2d,
    RegressSine,
    #[serde(rename = "regress-poly7")]
    RegressPoly7,
    ClassifyCircles,
    ClassifyMoons,
    EntangleClassify,
    Baseline,
}

impl Task {
    pub const ALL: [Task; 8] = [
        Task::Kernel1d,
        Task::Kernel2d,
        Task::RegressSine,
        Task::RegressPoly7,
        Task::ClassifyCircles,
        Task::ClassifyMoons,
        Task::EntangleClassify,
        Task::Baseline,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Task::Kernel1d => "kernel-1d",
            Task::Kernel2d => "kernel-2d",
            Task::RegressSine => "regress-sine",
            Task::RegressPoly7 => "regress-poly7",
            Task::ClassifyCircles => "classify-circles",
            Task::ClassifyMoons => "classify-moons",
            Task::EntangleClassify => "entangle-classify",
            Task::Baseline => "baseline",
        }
    }

    pub fn from_name(name: &str) -> Option<Task> {
        Task::ALL.into_iter().find(|t| t.name() == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RegisterConfig {
    pub n_ancillas: usize,
}

impl Default for RegisterConfig {
    fn default() -> Self {
        Self { n_ancillas: 9 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EncodingConfig {
    pub entangler: EntanglerChoice,
    pub input_scale: f64,
    pub purity: f64,
    /// Half-width of the window raw coordinates are mapped onto.
    pub window: f64,
}

impl Default for EncodingConfig {
    fn default() -> Self {
        Self {
            entangler: EntanglerChoice::Fan,
            input_scale: 1.0,
            purity: 1.0,
            window: datasets::DEFAULT_WINDOW,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub ridge: f64,
    pub c: f64,
    pub svm_tol: f64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            ridge: learners::DEFAULT_RIDGE,
            c: learners::DEFAULT_C,
            svm_tol: learners::DEFAULT_SVM_TOL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    /// Training points (regression) or points per class (classification);
    /// `None` picks the task default.
    pub n_train: Option<usize>,
    pub noise: Option<f64>,
    pub eval_points: usize,
    pub decision_grid: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            n_train: None,
            noise: None,
            eval_points: 200,
            decision_grid: 25,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KernelTaskConfig {
    pub profile_points: usize,
    /// Profile spans `[-profile_range, profile_range]` radians.
    pub profile_range: f64,
    pub slice_points: usize,
    pub slice_range: f64,
    pub slice_xj1: Vec<f64>,
    pub symmetry_samples: usize,
}

impl Default for KernelTaskConfig {
    fn default() -> Self {
        Self {
            profile_points: 101,
            profile_range: PI,
            slice_points: 21,
            slice_range: PI,
            slice_xj1: vec![0.0, PI / 2.0],
            symmetry_samples: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub register: RegisterConfig,
    pub encoding: EncodingConfig,
    pub learner: LearnerConfig,
    pub data: DataConfig,
    pub kernel: KernelTaskConfig,
    pub entangle: EntanglementConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("out"),
            register: RegisterConfig::default(),
            encoding: EncodingConfig::default(),
            learner: LearnerConfig::default(),
            data: DataConfig::default(),
            kernel: KernelTaskConfig::default(),
            entangle: EntanglementConfig::default(),
        }
    }
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(String),
    #[error("task error: {0}")]
    Task(String),
    #[error("io error: {0}")]
    Io(String),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Task(_) | RunError::Io(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            RunError::Config(_) => "config",
            RunError::Task(_) => "task",
            RunError::Io(_) => "io",
        }
    }

    pub fn to_json(&self) -> String {
        let message = match self {
            RunError::Config(m) | RunError::Task(m) | RunError::Io(m) => m,
        };
        json!({ "error": self.kind(), "message": message }).to_string()
    }
}

fn task_err(e: impl std::fmt::Display) -> RunError {
    RunError::Task(e.to_string())
}

fn config_err(e: impl std::fmt::Display) -> RunError {
    RunError::Config(e.to_string())
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, RunError> {
        let cfg: Self = serde_json::from_str(text).map_err(config_err)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self, RunError> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<(), RunError> {
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(config_err(format!("{name} must be positive, got {v}")))
            }
        };
        positive("encoding.window", self.encoding.window)?;
        positive("learner.c", self.learner.c)?;
        positive("learner.svm_tol", self.learner.svm_tol)?;
        positive("kernel.profile_range", self.kernel.profile_range)?;
        positive("kernel.slice_range", self.kernel.slice_range)?;
        if !(self.learner.ridge >= 0.0 && self.learner.ridge.is_finite()) {
            return Err(config_err(format!("learner.ridge must be >= 0, got {}", self.learner.ridge)));
        }
        if let Some(noise) = self.data.noise {
            if !(noise >= 0.0 && noise.is_finite()) {
                return Err(config_err(format!("data.noise must be >= 0, got {noise}")));
            }
        }
        for (name, v) in [
            ("data.eval_points", self.data.eval_points),
            ("data.decision_grid", self.data.decision_grid),
            ("kernel.profile_points", self.kernel.profile_points),
            ("kernel.slice_points", self.kernel.slice_points),
        ] {
            if v == 0 {
                return Err(config_err(format!("{name} must be positive")));
            }
        }
        self.encoding_spec()?;
        self.entangle.validate().map_err(config_err)?;
        Ok(())
    }

    pub fn encoding_spec(&self) -> Result<EncodingSpec, RunError> {
        let reg = RegisterSpec::star(self.register.n_ancillas).map_err(config_err)?;
        EncodingSpec::new(reg, self.encoding.entangler, self.encoding.input_scale)
            .and_then(|s| s.with_purity(self.encoding.purity))
            .map_err(config_err)
    }

    fn entangle_config(&self) -> EntanglementConfig {
        EntanglementConfig {
            seed: self.seed,
            ..self.entangle
        }
    }
}

/// A named file produced by a task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Artifact {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub task: Task,
    pub artifacts: Vec<Artifact>,
    pub metrics: Value,
}

impl RunOutput {
    pub fn artifact(&self, name: &str) -> Option<&str> {
        self.artifacts.iter().find(|a| a.name == name).map(|a| a.contents.as_str())
    }

    pub fn write_to(&self, dir: &Path) -> Result<(), RunError> {
        std::fs::create_dir_all(dir).map_err(|e| RunError::Io(format!("{}: {e}", dir.display())))?;
        for a in &self.artifacts {
            let path = dir.join(&a.name);
            std::fs::write(&path, &a.contents).map_err(|e| RunError::Io(format!("{}: {e}", path.display())))?;
        }
        Ok(())
    }
}

/// Float with 17 significant digits.
pub fn fmt_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// CSV text with a header row; floats at 17 significant digits.
pub struct Csv {
    text: String,
}

pub enum Cell {
    F(f64),
    I(i64),
}

impl Csv {
    pub fn new(header: &[&str]) -> Self {
        Self {
            text: format!("{}\n", header.join(",")),
        }
    }

    pub fn row(&mut self, cells: &[Cell]) {
        for (k, c) in cells.iter().enumerate() {
            if k > 0 {
                self.text.push(',');
            }
            match c {
                Cell::F(v) => self.text.push_str(&fmt_float(*v)),
                Cell::I(v) => write!(self.text, "{v}").expect("write to string"),
            }
        }
        self.text.push('\n');
    }

    pub fn finish(self) -> String {
        self.text
    }
}

fn sign_int(b: bool) -> i64 {
    if b {
        1
    } else {
        -1
    }
}

fn json_text(v: &impl Serialize) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serializable");
    s.push('\n');
    s
}

fn artifact(name: &str, contents: String) -> Artifact {
    Artifact {
        name: name.to_owned(),
        contents,
    }
}

/// Runs `task` and returns its artifacts without touching the filesystem.
pub fn run(task: Task, cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    cfg.validate()?;
    let (mut artifacts, metrics) = match task {
        Task::Kernel1d => kernel_1d(cfg)?,
        Task::Kernel2d => kernel_2d(cfg)?,
        Task::RegressSine => regress(cfg, Curve::Sine)?,
        Task::RegressPoly7 => regress(cfg, Curve::Poly7)?,
        Task::ClassifyCircles => classify(cfg, Shape::Circles)?,
        Task::ClassifyMoons => classify(cfg, Shape::Moons)?,
        Task::EntangleClassify => entangle_classify(cfg)?,
        Task::Baseline => baseline(cfg)?,
    };
    let echo = json!({ "task": task.name(), "config": cfg });
    artifacts.insert(0, artifact("config.json", json_text(&echo)));
    artifacts.push(artifact("metrics.json", json_text(&metrics)));
    Ok(RunOutput {
        task,
        artifacts,
        metrics,
    })
}

/// Runs `task` and writes the artifacts under `cfg.out_dir`.
pub fn run_and_write(task: Task, cfg: &ExperimentConfig) -> Result<RunOutput, RunError> {
    let out = run(task, cfg)?;
    out.write_to(&cfg.out_dir)?;
    Ok(out)
}

type TaskResult = Result<(Vec<Artifact>, Value), RunError>;

fn kernel_1d(cfg: &ExperimentConfig) -> TaskResult {
    let spec = cfg.encoding_spec()?;
    let k = QuantumKernel::new(spec).map_err(task_err)?;
    let r = cfg.kernel.profile_range;
    let deltas = datasets::linspace(-r, r, cfg.kernel.profile_points);
    let profile = k.kernel_profile_1d(&deltas).map_err(task_err)?;
    let mut csv = Csv::new(&["delta", "value"]);
    for &(d, v) in &profile {
        csv.row(&[Cell::F(d), Cell::F(v)]);
    }
    let mut metrics = json!({
        "n_points": profile.len(),
        "n_ancillas": cfg.register.n_ancillas,
        "entangler": cfg.encoding.entangler,
    });
    if cfg.encoding.entangler == EntanglerChoice::Fan {
        let n = cfg.register.n_ancillas as i32;
        let err = profile
            .iter()
            .map(|&(d, v)| (v - d.cos().powi(n)).abs())
            .fold(0.0, f64::max);
        metrics["max_abs_error_vs_cos_power"] = json!(err);
    }
    Ok((vec![artifact("profile.csv", csv.finish())], metrics))
}

/// Largest violation of `k({a,b},{c,d}) = k({a-d, b-d},{c-d, 0})` over
/// random 4-tuples in `[-pi, pi)`, the reduction behind the slice table.
pub fn slice_symmetry_deviation<K: Kernel + ?Sized>(k: &K, samples: usize, seed: u64) -> Result<f64, RunError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let [a, b, c, d]: [f64; 4] = std::array::from_fn(|_| rng.random_range(-PI..PI));
        let lhs = k
            .value(&Input::Vector(vec![a, b]), &Input::Vector(vec![c, d]))
            .map_err(task_err)?;
        let rhs = k
            .value(&Input::Vector(vec![a - d, b - d]), &Input::Vector(vec![c - d, 0.0]))
            .map_err(task_err)?;
        worst = worst.max((lhs - rhs).abs());
    }
    Ok(worst)
}

fn kernel_2d(cfg: &ExperimentConfig) -> TaskResult {
    let spec = cfg.encoding_spec()?;
    let k = QuantumKernel::new(spec).map_err(task_err)?;
    let r = cfg.kernel.slice_range;
    let axis = datasets::linspace(-r, r, cfg.kernel.slice_points);
    let grid = SliceGrid {
        xi1: axis.clone(),
        xi2: axis,
        xj1: cfg.kernel.slice_xj1.clone(),
    };
    let table = k.kernel_slices_2d(&grid).map_err(task_err)?;
    let mut csv = Csv::new(&["xi1", "xi2", "xj1", "value"]);
    for p in &table {
        csv.row(&[Cell::F(p.xi1), Cell::F(p.xi2), Cell::F(p.xj1), Cell::F(p.value)]);
    }
    k.clear_cache();
    let deviation = slice_symmetry_deviation(&k, cfg.kernel.symmetry_samples, cfg.seed)?;
    let metrics = json!({
        "n_rows": table.len(),
        "n_ancillas": cfg.register.n_ancillas,
        "symmetry_samples": cfg.kernel.symmetry_samples,
        "max_symmetry_deviation": deviation,
    });
    Ok((vec![artifact("slices.csv", csv.finish())], metrics))
}

#[derive(Debug, Clone, Copy)]
enum Curve {
    Sine,
    Poly7,
}

#[derive(Debug, Clone, Serialize)]
struct ModelDump<'a> {
    weights: &'a DualWeights,
    window: &'a WindowMap,
    encoding: EncodingSpec,
    training_inputs: &'a [Vec<f64>],
}

fn regress(cfg: &ExperimentConfig, curve: Curve) -> TaskResult {
    let (ds, f, domain): (Dataset, fn(f64) -> f64, (f64, f64)) = match curve {
        Curve::Sine => (
            datasets::gen_sine(cfg.data.n_train.unwrap_or(15)).map_err(task_err)?,
            datasets::sine,
            datasets::SINE_DOMAIN,
        ),
        Curve::Poly7 => (
            datasets::gen_poly7(cfg.data.n_train.unwrap_or(40)).map_err(task_err)?,
            datasets::poly7,
            datasets::POLY7_DOMAIN,
        ),
    };
    let spec = cfg.encoding_spec()?;
    let k = QuantumKernel::new(spec).map_err(task_err)?;
    let window = WindowMap::fit(&ds.inputs, cfg.encoding.window).map_err(task_err)?;
    let train = window.apply_all(&ds.inputs).map_err(task_err)?;
    let gram = k.gram(&train).map_err(task_err)?;
    let weights = learners::krr_fit(&gram, &ds.targets, cfg.learner.ridge).map_err(task_err)?;
    let model = TrainedModel::new(weights, train).map_err(task_err)?;

    let xs = datasets::linspace(domain.0, domain.1, cfg.data.eval_points);
    let eval: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let eval_inputs = window.apply_all(&eval).map_err(task_err)?;
    let pred = model.decisions(&k, &eval_inputs).map_err(task_err)?;
    let truth: Vec<f64> = xs.iter().map(|&x| f(x)).collect();
    let rms = learners::rms_percent(&pred, &truth).map_err(task_err)?;
    let train_pred = model.decisions(&k, &model.inputs).map_err(task_err)?;
    let train_rms = learners::rms_percent(&train_pred, &ds.targets).map_err(task_err)?;

    let mut pcsv = Csv::new(&["x", "f", "truth"]);
    for i in 0..xs.len() {
        pcsv.row(&[Cell::F(xs[i]), Cell::F(pred[i]), Cell::F(truth[i])]);
    }
    let mut tcsv = Csv::new(&["x", "y"]);
    for (x, y) in ds.inputs.iter().zip(&ds.targets) {
        tcsv.row(&[Cell::F(x[0]), Cell::F(*y)]);
    }
    let dump = ModelDump {
        weights: &model.weights,
        window: &window,
        encoding: spec,
        training_inputs: &ds.inputs,
    };
    let metrics = json!({
        "rms_percent": rms,
        "train_rms_percent": train_rms,
        "n_train": ds.len(),
        "eval_points": xs.len(),
        "ridge": cfg.learner.ridge,
        "gram_min_eigenvalue": gram.min_eigenvalue(),
    });
    Ok((
        vec![
            artifact("training.csv", tcsv.finish()),
            artifact("predictions.csv", pcsv.finish()),
            artifact("model.json", json_text(&dump)),
        ],
        metrics,
    ))
}

#[derive(Debug, Clone, Copy)]
enum Shape {
    Circles,
    Moons,
}

fn gen_shape(shape: Shape, cfg: &ExperimentConfig, seed: u64) -> Result<Dataset, RunError> {
    let n = cfg.data.n_train.unwrap_or(40);
    match shape {
        Shape::Circles => datasets::gen_circles(n, cfg.data.noise.unwrap_or(0.05), seed),
        Shape::Moons => datasets::gen_moons(n, cfg.data.noise.unwrap_or(0.1), seed),
    }
    .map_err(task_err)
}

fn classify(cfg: &ExperimentConfig, shape: Shape) -> TaskResult {
    let train_ds = gen_shape(shape, cfg, cfg.seed)?;
    let hold_ds = gen_shape(shape, cfg, cfg.seed.wrapping_add(1))?;
    let spec = cfg.encoding_spec()?;
    let k = QuantumKernel::new(spec).map_err(task_err)?;
    let window = WindowMap::fit(&train_ds.inputs, cfg.encoding.window).map_err(task_err)?;
    let train = window.apply_all(&train_ds.inputs).map_err(task_err)?;
    let gram = k.gram(&train).map_err(task_err)?;
    let opts = SvmOptions {
        c: cfg.learner.c,
        tol: cfg.learner.svm_tol,
        ..SvmOptions::default()
    };
    let weights = learners::svm_fit_with(&gram, &train_ds.targets, &opts).map_err(task_err)?;
    let model = TrainedModel::new(weights, train).map_err(task_err)?;

    let train_f: Vec<f64> = (0..gram.n())
        .map(|i| {
            let row: Vec<f64> = (0..gram.n()).map(|j| gram.get(j, i)).collect();
            model.weights.evaluate_row(&row)
        })
        .collect::<Result<_, _>>()
        .map_err(task_err)?;
    let hold = window.apply_all(&hold_ds.inputs).map_err(task_err)?;
    let hold_f = model.decisions(&k, &hold).map_err(task_err)?;

    let n = cfg.data.decision_grid;
    let pad = |lo: f64, hi: f64| {
        let m = 0.1 * (hi - lo);
        datasets::linspace(lo - m, hi + m, n)
    };
    let gx = pad(window.lo[0], window.hi[0]);
    let gy = pad(window.lo[1], window.hi[1]);
    let grid_raw: Vec<Vec<f64>> = gy.iter().flat_map(|&y| gx.iter().map(move |&x| vec![x, y])).collect();
    let grid = window.apply_all(&grid_raw).map_err(task_err)?;
    let grid_f = model.decisions(&k, &grid).map_err(task_err)?;

    let mut gcsv = Csv::new(&["x1", "x2", "f", "label"]);
    for (x, &f) in grid_raw.iter().zip(&grid_f) {
        gcsv.row(&[Cell::F(x[0]), Cell::F(x[1]), Cell::F(f), Cell::I(sign_int(f >= 0.0))]);
    }
    let points_csv = |ds: &Dataset, f: &[f64]| {
        let mut c = Csv::new(&["x1", "x2", "f", "label"]);
        for ((x, &y), &fv) in ds.inputs.iter().zip(&ds.targets).zip(f) {
            c.row(&[Cell::F(x[0]), Cell::F(x[1]), Cell::F(fv), Cell::I(y as i64)]);
        }
        c.finish()
    };
    let metric = |f: &[f64], y: &[f64], m| learners::metric(f, y, m).map_err(task_err);
    use learners::Metric::{Accuracy, Hinge};
    let dump = ModelDump {
        weights: &model.weights,
        window: &window,
        encoding: spec,
        training_inputs: &train_ds.inputs,
    };
    let metrics = json!({
        "train_hinge": metric(&train_f, &train_ds.targets, Hinge)?,
        "train_accuracy": metric(&train_f, &train_ds.targets, Accuracy)?,
        "holdout_hinge": metric(&hold_f, &hold_ds.targets, Hinge)?,
        "holdout_accuracy": metric(&hold_f, &hold_ds.targets, Accuracy)?,
        "n_train": train_ds.len(),
        "n_holdout": hold_ds.len(),
        "c": cfg.learner.c,
        "fit_status": model.weights.status,
        "smo_iterations": model.weights.iterations,
        "support_vectors": model.weights.alphas.iter().filter(|&&a| a > 0.0).count(),
    });
    Ok((
        vec![
            artifact("training.csv", points_csv(&train_ds, &train_f)),
            artifact("holdout.csv", points_csv(&hold_ds, &hold_f)),
            artifact("decision_grid.csv", gcsv.finish()),
            artifact("model.json", json_text(&dump)),
        ],
        metrics,
    ))
}

fn entangle_classify(cfg: &ExperimentConfig) -> TaskResult {
    let ec = cfg.entangle_config();
    let report = entangle::run_entanglement_experiment(&ec).map_err(task_err)?;
    let sweep = entangle::run_seed_sweep(&ec, ec.sweep_seeds).map_err(task_err)?;
    let mut csv = Csv::new(&["theta", "alpha", "truth", "quantum_pred", "classical_pred"]);
    for g in &report.grid {
        csv.row(&[
            Cell::F(g.theta),
            Cell::F(g.alpha),
            Cell::I(sign_int(g.truth)),
            Cell::I(sign_int(g.quantum_pred)),
            Cell::I(sign_int(g.classical_pred)),
        ]);
    }
    let mut scsv = Csv::new(&["seed", "quantum_grid_accuracy", "classical_grid_accuracy", "random_accuracy"]);
    for r in &sweep.runs {
        scsv.row(&[
            Cell::I(r.seed as i64),
            Cell::F(r.quantum_grid_accuracy),
            Cell::F(r.classical_grid_accuracy),
            Cell::F(r.random_accuracy),
        ]);
    }
    let zone = |name: &str| report.zones.iter().find(|z| z.zone == name).cloned();
    let metrics = json!({
        "quantum_grid_accuracy": report.quantum_grid_accuracy,
        "classical_grid_accuracy": report.classical_grid_accuracy,
        "random_accuracy": report.random.quantum_accuracy,
        "random_classical_accuracy": report.random.classical_accuracy,
        "upper_zone": zone("upper"),
        "lower_zone": zone("lower"),
        "region": ec.region,
        "n_train": ec.n_train,
        "sweep_mean_quantum_grid_accuracy": sweep.mean_quantum_grid_accuracy,
        "sweep_mean_classical_grid_accuracy": sweep.mean_classical_grid_accuracy,
        "sweep_mean_random_accuracy": sweep.mean_random_accuracy,
    });
    let full = json!({ "report": report, "sweep": sweep });
    Ok((
        vec![
            artifact("grid.csv", csv.finish()),
            artifact("sweep.csv", scsv.finish()),
            artifact("report.json", json_text(&full)),
        ],
        metrics,
    ))
}

/// Gaussian-kernel SVM on raw family parameters, scored on the oracle grid.
fn baseline(cfg: &ExperimentConfig) -> TaskResult {
    let ec = cfg.entangle_config();
    let (grid, truth) = entangle::grid_truth(&ec).map_err(task_err)?;
    let report = entangle::run_entanglement_experiment(&ec).map_err(task_err)?;
    let xs: Vec<Input> = report
        .training
        .iter()
        .map(|p| Input::Vector(vec![p.theta, p.alpha]))
        .collect();
    let y: Vec<f64> = report.training.iter().map(|p| if p.label { 1.0 } else { -1.0 }).collect();
    let gk = GaussianKernel::new(ec.baseline_sigma).map_err(task_err)?;
    let gram = gk.gram(&xs).map_err(task_err)?;
    let opts = SvmOptions {
        c: ec.c,
        tol: ec.svm_tol,
        ..SvmOptions::default()
    };
    let model = TrainedModel::new(learners::svm_fit_with(&gram, &y, &opts).map_err(task_err)?, xs).map_err(task_err)?;
    let gx: Vec<Input> = grid.iter().map(|p| Input::Vector(vec![p.theta(), p.alpha_u()])).collect();
    let f = model.decisions(&gk, &gx).map_err(task_err)?;
    let mut csv = Csv::new(&["theta", "alpha", "truth", "classical_f", "classical_pred"]);
    for i in 0..grid.len() {
        csv.row(&[
            Cell::F(grid[i].theta()),
            Cell::F(grid[i].alpha_u()),
            Cell::I(sign_int(truth[i])),
            Cell::F(f[i]),
            Cell::I(sign_int(f[i] >= 0.0)),
        ]);
    }
    let ty: Vec<f64> = truth.iter().map(|&t| if t { 1.0 } else { -1.0 }).collect();
    let upper: Vec<usize> = (0..grid.len()).filter(|&i| truth[i] && grid[i].alpha_u() >= PI).collect();
    let upper_recall = if upper.is_empty() {
        Value::Null
    } else {
        json!(upper.iter().filter(|&&i| f[i] >= 0.0).count() as f64 / upper.len() as f64)
    };
    let metrics = json!({
        "classical_grid_accuracy": learners::accuracy(&f, &ty).map_err(task_err)?,
        "upper_zone_recall": upper_recall,
        "random_accuracy": "not applicable",
        "sigma": ec.baseline_sigma,
        "region": match ec.region { TrainRegion::LowerHalf => "lower-half", TrainRegion::FullSpace => "full-space" },
    });
    Ok((vec![artifact("baseline_grid.csv", csv.finish())], metrics))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> ExperimentConfig {
        let mut c = ExperimentConfig::default();
        c.register.n_ancillas = 3;
        c.data.eval_points = 20;
        c.data.decision_grid = 5;
        c.data.n_train = Some(10);
        c.entangle.grid_size = 4;
        c.entangle.n_random = 5;
        c.entangle.sweep_seeds = 2;
        c.kernel.slice_points = 3;
        c.kernel.symmetry_samples = 5;
        c
    }

    #[test]
    fn task_names_round_trip() {
        for t in Task::ALL {
            assert_eq!(Task::from_name(t.name()), Some(t));
            assert_eq!(serde_json::to_string(&t).unwrap(), format!("\"{}\"", t.name()));
        }
        assert_eq!(Task::from_name("nope"), None);
    }

    #[test]
    fn unknown_keys_are_named() {
        let e = ExperimentConfig::from_json(r#"{"seed": 1, "ridg": 0.1}"#).unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(e.to_string().contains("ridg"), "{e}");
        let e = ExperimentConfig::from_json(r#"{"learner": {"cc": 1}}"#).unwrap_err();
        assert!(e.to_string().contains("cc"));
        let e = ExperimentConfig::from_json(r#"{"learner": {"c": -1}}"#).unwrap_err();
        assert!(matches!(e, RunError::Config(_)));
        let ok = ExperimentConfig::from_json(r#"{"seed": 7, "register": {"n_ancillas": 2}}"#).unwrap();
        assert_eq!((ok.seed, ok.register.n_ancillas), (7, 2));
    }

    #[test]
    fn csv_floats_have_17_digits() {
        let mut c = Csv::new(&["a", "b"]);
        c.row(&[Cell::F(0.1), Cell::I(-1)]);
        assert_eq!(c.finish(), "a,b\n1.0000000000000001e-1,-1\n");
    }

    #[test]
    fn every_task_runs_and_is_deterministic() {
        let cfg = small();
        for t in Task::ALL {
            let a = run(t, &cfg).unwrap();
            let b = run(t, &cfg).unwrap();
            assert_eq!(a.artifacts, b.artifacts, "{}", t.name());
            assert!(a.artifact("config.json").is_some() && a.artifact("metrics.json").is_some());
            for art in a.artifacts.iter().filter(|x| x.name.ends_with(".csv")) {
                let lines: Vec<&str> = art.contents.lines().collect();
                assert!(lines.len() > 1);
                let cols = lines[0].split(',').count();
                assert!(lines.iter().all(|l| l.split(',').count() == cols));
            }
        }
    }

    #[test]
    fn kernel_1d_matches_cos_power() {
        let out = run(Task::Kernel1d, &small()).unwrap();
        assert_eq!(out.artifact("profile.csv").unwrap().lines().count(), 102);
        assert!(out.metrics["max_abs_error_vs_cos_power"].as_f64().unwrap() < 1e-10);
    }
}
