//! Synthetic regression and classification datasets, and the affine map
//! that places raw coordinates into the encoding window.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kernel::Input;

pub const DEFAULT_WINDOW: f64 = 1.0;
pub const CIRCLES_MIN_GAP: f64 = 0.2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DatasetError {
    #[error("{name} needs at least {min} points, got {got}")]
    TooFewPoints { name: &'static str, min: usize, got: usize },
    #[error("invalid dataset parameter: {0}")]
    InvalidParameter(String),
    #[error("window map fitted on {fitted} dimensions, got {got}")]
    DimMismatch { fitted: usize, got: usize },
}

pub type Result<T> = std::result::Result<T, DatasetError>;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Dataset {
    pub inputs: Vec<Vec<f64>>,
    /// Regression targets or `+-1` labels.
    pub targets: Vec<f64>,
    pub tag: String,
    pub seed: Option<u64>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.inputs.first().map_or(0, Vec::len)
    }

    /// Targets rescaled to `[0, 1]` by their range.
    pub fn normalized_targets(&self) -> Vec<f64> {
        let lo = self.targets.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = self.targets.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let range = hi - lo;
        self.targets
            .iter()
            .map(|t| if range > 0.0 { (t - lo) / range } else { 0.0 })
            .collect()
    }
}

fn need(name: &'static str, min: usize, got: usize) -> Result<()> {
    if got < min {
        return Err(DatasetError::TooFewPoints { name, min, got });
    }
    Ok(())
}

/// `n` equally spaced points on `[lo, hi]`, both ends included.
pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..n)
            .map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect(),
    }
}

pub const SINE_DOMAIN: (f64, f64) = (0.0, TAU);
pub const POLY7_DOMAIN: (f64, f64) = (-3.2, 3.2);

pub fn sine(x: f64) -> f64 {
    x.sin()
}

/// `(x - 3)(x - 2)(x - 1) x (x + 1)(x + 2)(x + 3)`.
pub fn poly7(x: f64) -> f64 {
    (-3..=3).map(|r| x - r as f64).product()
}

pub fn gen_sine(n: usize) -> Result<Dataset> {
    gen_curve("sine", n, 2, SINE_DOMAIN, sine)
}

pub fn gen_poly7(n: usize) -> Result<Dataset> {
    gen_curve("poly7", n, 8, POLY7_DOMAIN, poly7)
}

fn gen_curve(tag: &'static str, n: usize, min: usize, (lo, hi): (f64, f64), f: fn(f64) -> f64) -> Result<Dataset> {
    need(tag, min, n)?;
    let xs = linspace(lo, hi, n);
    Ok(Dataset {
        targets: xs.iter().map(|&x| f(x)).collect(),
        inputs: xs.into_iter().map(|x| vec![x]).collect(),
        tag: tag.into(),
        seed: None,
    })
}

fn noise_dist(noise: f64) -> Result<Option<Normal<f64>>> {
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(DatasetError::InvalidParameter(format!("noise must be >= 0, got {noise}")));
    }
    Ok(if noise > 0.0 {
        Some(Normal::new(0.0, noise).expect("positive std"))
    } else {
        None
    })
}

fn jitter<R: Rng>(rng: &mut R, dist: &Option<Normal<f64>>) -> f64 {
    dist.as_ref().map_or(0.0, |d| d.sample(rng))
}

/// Two concentric rings: label `+1` at radius 0.5, `-1` at radius 1.0.
/// Resamples once if the radial gap between classes is not above 0.2.
pub fn gen_circles(n_per_class: usize, noise: f64, seed: u64) -> Result<Dataset> {
    need("circles", 4, n_per_class)?;
    let dist = noise_dist(noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut sample = || {
        let mut inputs = Vec::with_capacity(2 * n_per_class);
        let mut targets = Vec::with_capacity(2 * n_per_class);
        for (radius, label) in [(0.5, 1.0), (1.0, -1.0)] {
            for _ in 0..n_per_class {
                let a: f64 = rng.random_range(0.0..TAU);
                let x = radius * a.cos() + jitter(&mut rng, &dist);
                let y = radius * a.sin() + jitter(&mut rng, &dist);
                inputs.push(vec![x, y]);
                targets.push(label);
            }
        }
        Dataset {
            inputs,
            targets,
            tag: "circles".into(),
            seed: Some(seed),
        }
    };
    let first = sample();
    if radial_gap(&first) > CIRCLES_MIN_GAP {
        return Ok(first);
    }
    Ok(sample())
}

/// `min` outer radius minus `max` inner radius.
pub fn radial_gap(ds: &Dataset) -> f64 {
    let mut inner = f64::NEG_INFINITY;
    let mut outer = f64::INFINITY;
    for (x, &t) in ds.inputs.iter().zip(&ds.targets) {
        let r = x[0].hypot(x[1]);
        if t > 0.0 {
            inner = inner.max(r);
        } else {
            outer = outer.min(r);
        }
    }
    outer - inner
}

/// Interleaved half circles: `+1` on `(cos t, sin t)`, `-1` on
/// `(1 - cos t, 0.5 - sin t)`, `t` uniform on `[0, pi]`.
pub fn gen_moons(n_per_class: usize, noise: f64, seed: u64) -> Result<Dataset> {
    need("moons", 4, n_per_class)?;
    let dist = noise_dist(noise)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut inputs = Vec::with_capacity(2 * n_per_class);
    let mut targets = Vec::with_capacity(2 * n_per_class);
    for label in [1.0, -1.0] {
        for _ in 0..n_per_class {
            let t: f64 = rng.random_range(0.0..=PI);
            let (x, y) = moon_point(t, label);
            inputs.push(vec![x + jitter(&mut rng, &dist), y + jitter(&mut rng, &dist)]);
            targets.push(label);
        }
    }
    Ok(Dataset {
        inputs,
        targets,
        tag: "moons".into(),
        seed: Some(seed),
    })
}

pub fn moon_point(t: f64, label: f64) -> (f64, f64) {
    if label > 0.0 {
        (t.cos(), t.sin())
    } else {
        (1.0 - t.cos(), 0.5 - t.sin())
    }
}

/// Per-axis affine map sending the fitted bounding box onto `[-w, w]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowMap {
    pub half_width: f64,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl WindowMap {
    pub fn fit(inputs: &[Vec<f64>], half_width: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(DatasetError::InvalidParameter(format!(
                "window half-width must be positive, got {half_width}"
            )));
        }
        let d = inputs.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(DatasetError::InvalidParameter("cannot fit a window to empty inputs".into()));
        }
        let mut lo = vec![f64::INFINITY; d];
        let mut hi = vec![f64::NEG_INFINITY; d];
        for x in inputs {
            if x.len() != d {
                return Err(DatasetError::DimMismatch { fitted: d, got: x.len() });
            }
            for k in 0..d {
                lo[k] = lo[k].min(x[k]);
                hi[k] = hi[k].max(x[k]);
            }
        }
        Ok(Self { half_width, lo, hi })
    }

    /// Map fixed by known per-axis bounds.
    pub fn from_bounds(lo: Vec<f64>, hi: Vec<f64>, half_width: f64) -> Self {
        Self { half_width, lo, hi }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.lo.len() {
            return Err(DatasetError::DimMismatch {
                fitted: self.lo.len(),
                got: x.len(),
            });
        }
        Ok(x.iter()
            .enumerate()
            .map(|(k, &v)| {
                let span = self.hi[k] - self.lo[k];
                if span > 0.0 {
                    self.half_width * (2.0 * (v - self.lo[k]) / span - 1.0)
                } else {
                    0.0
                }
            })
            .collect())
    }

    pub fn apply_all(&self, xs: &[Vec<f64>]) -> Result<Vec<Input>> {
        xs.iter().map(|x| Ok(Input::Vector(self.apply(x)?))).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn sine_grid() {
        let d = gen_sine(15).unwrap();
        assert_eq!(d.len(), 15);
        assert_eq!((d.inputs[0][0], d.targets[0]), (0.0, 0.0));
        assert_eq!(d.inputs[14][0], TAU);
        assert!(d.targets[14].abs() < 1e-15);
        assert!((d.inputs[1][0] - TAU / 14.0).abs() < 1e-15);
        assert!(d.targets.iter().all(|t| t.abs() <= 1.0));
        assert!(gen_sine(1).is_err());
    }

    #[test]
    fn poly7_values() {
        for r in [-3.0, -2.0, -1.0, 0.0, 1.0, 2.0, 3.0] {
            assert_eq!(poly7(r), 0.0);
        }
        let expect = 0.2 * 1.2 * 2.2 * 3.2 * 4.2 * 5.2 * 6.2;
        assert!((poly7(3.2) - expect).abs() < 1e-9);
        assert!((expect - 228.7853568).abs() < 1e-9);
        let d = gen_poly7(40).unwrap();
        for i in 0..40 {
            assert!((d.targets[i] + d.targets[39 - i]).abs() < 1e-9);
        }
        let n = d.normalized_targets();
        assert!(n.iter().all(|v| (0.0..=1.0).contains(v)));
        assert!(gen_poly7(7).is_err());
    }

    #[test]
    fn circles_shape_and_determinism() {
        let d = gen_circles(40, 0.0, 3).unwrap();
        for (x, &t) in d.inputs.iter().zip(&d.targets) {
            let r = x[0].hypot(x[1]);
            assert!((r - if t > 0.0 { 0.5 } else { 1.0 }).abs() < 1e-12);
        }
        let a = gen_circles(40, 0.05, 9).unwrap();
        let b = gen_circles(40, 0.05, 9).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        assert!(radial_gap(&a) > CIRCLES_MIN_GAP);
        assert_eq!(a.targets.iter().filter(|&&t| t > 0.0).count(), 40);
    }

    #[test]
    fn moons_shape() {
        assert_eq!(moon_point(0.0, 1.0), (1.0, 0.0));
        assert_eq!(moon_point(0.0, -1.0), (0.0, 0.5));
        let a = gen_moons(40, 0.1, 1).unwrap();
        assert_eq!(a, gen_moons(40, 0.1, 1).unwrap());
        // Noise-free sample centroids against the analytic (0, 2/pi) and (1, 0.5 - 2/pi).
        let big = gen_moons(4000, 0.0, 2).unwrap();
        let centroid = |label: f64| {
            let pts: Vec<&Vec<f64>> = big.inputs.iter().zip(&big.targets).filter(|(_, &t)| t == label).map(|(x, _)| x).collect();
            let n = pts.len() as f64;
            (pts.iter().map(|x| x[0]).sum::<f64>() / n, pts.iter().map(|x| x[1]).sum::<f64>() / n)
        };
        let (p, m) = (centroid(1.0), centroid(-1.0));
        assert!((p.0 - 0.0).abs() < 0.05 && (p.1 - 2.0 / PI).abs() < 0.05);
        assert!((m.0 - 1.0).abs() < 0.05 && (m.1 - (0.5 - 2.0 / PI)).abs() < 0.05);
        assert!((p.0 - m.0).abs() > 0.3 && (p.1 - m.1).abs() > 0.3);
        assert!(gen_moons(3, 0.1, 1).is_err());
        assert!(gen_moons(10, -1.0, 1).is_err());
    }

    #[test]
    fn window_map_hits_bounds() {
        let xs = vec![vec![0.0, -2.0], vec![4.0, 2.0], vec![1.0, 0.0]];
        let w = WindowMap::fit(&xs, 1.0).unwrap();
        assert_eq!(w.apply(&xs[0]).unwrap(), vec![-1.0, -1.0]);
        assert_eq!(w.apply(&xs[1]).unwrap(), vec![1.0, 1.0]);
        assert_eq!(w.apply(&xs[2]).unwrap(), vec![-0.5, 0.0]);
        assert!(w.apply(&[1.0]).is_err());
        assert!(WindowMap::fit(&xs, 0.0).is_err());
    }

    proptest! {
        #[test]
        fn window_map_stays_inside(seed in 0u64..500) {
            let d = gen_moons(10, 0.1, seed).unwrap();
            let w = WindowMap::fit(&d.inputs, 1.5).unwrap();
            for x in &d.inputs {
                for v in w.apply(x).unwrap() {
                    prop_assert!(v.abs() <= 1.5 + 1e-12);
                }
            }
        }
    }
}
