//! WebAssembly bindings for the browser demo. Every export returns a JSON
//! string; the `*_json` functions hold the logic and run natively too.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use qkernel::entangle::TrainRegion;
use qkernel::experiment::{self, ExperimentConfig, RunOutput, Task};
use qkernel::register::EntanglerChoice;

/// Largest star register the page offers; features are 4^(n+1) complex entries.
pub const MAX_WEB_ANCILLAS: usize = 8;

fn entangler(name: &str) -> Result<EntanglerChoice, String> {
    serde_json::from_value(Value::String(name.to_owned())).map_err(|_| format!("unknown entangler `{name}`"))
}

fn check_ancillas(n: usize) -> Result<(), String> {
    if (1..=MAX_WEB_ANCILLAS).contains(&n) {
        Ok(())
    } else {
        Err(format!("n_ancillas must lie in 1..={MAX_WEB_ANCILLAS}, got {n}"))
    }
}

/// Parses a numeric CSV artifact into `{columns, rows}`.
fn table(out: &RunOutput, name: &str) -> Result<Value, String> {
    let text = out.artifact(name).ok_or_else(|| format!("missing artifact {name}"))?;
    let mut lines = text.lines();
    let columns: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    let rows = lines
        .map(|l| l.split(',').map(|c| c.parse::<f64>().map_err(|e| e.to_string())).collect())
        .collect::<Result<Vec<Vec<f64>>, String>>()?;
    Ok(json!({ "columns": columns, "rows": rows }))
}

fn run(task: Task, cfg: &ExperimentConfig) -> Result<RunOutput, String> {
    experiment::run(task, cfg).map_err(|e| e.to_string())
}

/// 1-D kernel profile `k(delta, 0)` over `[-pi, pi]`.
pub fn kernel_profile_json(n_ancillas: usize, entangler_name: &str, points: usize) -> Result<String, String> {
    check_ancillas(n_ancillas)?;
    let mut cfg = ExperimentConfig::default();
    cfg.register.n_ancillas = n_ancillas;
    cfg.encoding.entangler = entangler(entangler_name)?;
    cfg.kernel.profile_points = points.clamp(2, 2001);
    let out = run(Task::Kernel1d, &cfg)?;
    Ok(json!({ "profile": table(&out, "profile.csv")?, "metrics": out.metrics }).to_string())
}

/// SVM decision function of `circles` or `moons` over a square grid.
pub fn decision_grid_json(shape: &str, n_ancillas: usize, seed: u64, grid: usize) -> Result<String, String> {
    check_ancillas(n_ancillas)?;
    let task = match shape {
        "circles" => Task::ClassifyCircles,
        "moons" => Task::ClassifyMoons,
        other => return Err(format!("unknown dataset `{other}`")),
    };
    let mut cfg = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    cfg.register.n_ancillas = n_ancillas;
    cfg.data.decision_grid = grid.clamp(2, 80);
    let out = run(task, &cfg)?;
    Ok(json!({
        "grid": table(&out, "decision_grid.csv")?,
        "training": table(&out, "training.csv")?,
        "metrics": out.metrics,
    })
    .to_string())
}

/// Oracle labels against quantum and Gaussian predictions on the family grid.
pub fn entanglement_map_json(seed: u64, full_space: bool, n_train: usize) -> Result<String, String> {
    let mut cfg = ExperimentConfig {
        seed,
        ..ExperimentConfig::default()
    };
    cfg.entangle.region = if full_space {
        TrainRegion::FullSpace
    } else {
        TrainRegion::LowerHalf
    };
    cfg.entangle.n_train = n_train;
    cfg.entangle.sweep_seeds = 1;
    let out = run(Task::EntangleClassify, &cfg)?;
    let report: Value = serde_json::from_str(out.artifact("report.json").unwrap_or("{}")).map_err(|e| e.to_string())?;
    Ok(json!({
        "grid": table(&out, "grid.csv")?,
        "training": report["report"]["training"],
        "metrics": out.metrics,
    })
    .to_string())
}

fn js(r: Result<String, String>) -> Result<String, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn kernel_profile(n_ancillas: usize, entangler: &str, points: usize) -> Result<String, JsError> {
    js(kernel_profile_json(n_ancillas, entangler, points))
}

#[wasm_bindgen]
pub fn decision_grid(shape: &str, n_ancillas: usize, seed: u32, grid: usize) -> Result<String, JsError> {
    js(decision_grid_json(shape, n_ancillas, seed as u64, grid))
}

#[wasm_bindgen]
pub fn entanglement_map(seed: u32, full_space: bool, n_train: usize) -> Result<String, JsError> {
    js(entanglement_map_json(seed as u64, full_space, n_train))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(s: String) -> Value {
        serde_json::from_str(&s).unwrap()
    }

    #[test]
    fn profile_matches_cosine_power() {
        let v = parse(kernel_profile_json(3, "fan", 21).unwrap());
        let rows = v["profile"]["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 21);
        for r in rows {
            let (d, k) = (r[0].as_f64().unwrap(), r[1].as_f64().unwrap());
            assert!((k - d.cos().powi(3)).abs() < 1e-10);
        }
        assert_eq!(v["profile"]["columns"], json!(["delta", "value"]));
    }

    #[test]
    fn decision_grid_has_requested_size() {
        let v = parse(decision_grid_json("moons", 2, 1, 6).unwrap());
        assert_eq!(v["grid"]["rows"].as_array().unwrap().len(), 36);
        assert_eq!(v["training"]["rows"].as_array().unwrap().len(), 80);
        assert!(v["metrics"]["train_accuracy"].as_f64().unwrap() > 0.5);
    }

    #[test]
    fn entanglement_map_covers_grid() {
        let v = parse(entanglement_map_json(0, false, 30).unwrap());
        assert_eq!(v["grid"]["rows"].as_array().unwrap().len(), 196);
        assert_eq!(v["training"].as_array().unwrap().len(), 30);
    }

    #[test]
    fn bad_arguments_are_reported() {
        assert!(kernel_profile_json(0, "fan", 10).is_err());
        assert!(kernel_profile_json(2, "spiral", 10).is_err());
        assert!(decision_grid_json("spirals", 2, 0, 5).is_err());
        assert!(decision_grid_json("circles", MAX_WEB_ANCILLAS + 1, 0, 5).is_err());
    }
}
