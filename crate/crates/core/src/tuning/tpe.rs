//! Independent (per-dimension) Tree-structured Parzen Estimator.

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::distribution::{ContinuousCDF, Normal};

use super::TrialRecord;

/// Bandwidth rule identifier, recorded with the config.
pub const BANDWIDTH_RULE: &str = "scott-per-dim-floor";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TpeConfig {
    pub n_startup_trials: usize,
    pub gamma: f64,
    pub n_candidates: usize,
    pub bandwidth_rule: String,
    pub bandwidth_floor: f64,
    pub lower: f64,
    pub upper: f64,
    pub seed: u64,
}

impl Default for TpeConfig {
    fn default() -> Self {
        Self {
            n_startup_trials: 10,
            gamma: 0.25,
            n_candidates: 24,
            bandwidth_rule: BANDWIDTH_RULE.to_string(),
            bandwidth_floor: 1e-3,
            lower: 0.01,
            upper: 0.5,
            seed: 0,
        }
    }
}

impl TpeConfig {
    pub fn with_seed(seed: u64) -> Self {
        Self { seed, ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(format!("gamma {} must lie in (0, 1)", self.gamma));
        }
        if self.n_startup_trials < 1 {
            return Err("n_startup_trials must be at least 1".into());
        }
        if self.n_candidates < 1 {
            return Err("n_candidates must be at least 1".into());
        }
        if self.lower.partial_cmp(&self.upper) != Some(std::cmp::Ordering::Less) {
            return Err(format!("empty bounds [{}, {}]", self.lower, self.upper));
        }
        Ok(())
    }

    /// Hex SHA-256 of the JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(json))
    }
}

/// Number of trials in the good set: `⌈γ·n⌉`, at least one.
pub fn good_set_size(n: usize, gamma: f64) -> usize {
    ((gamma * n as f64 - 1e-9).ceil() as usize).clamp(1, n.max(1))
}

/// Gaussian-kernel density truncated to `[lower, upper]`.
#[derive(Debug, Clone)]
pub struct Parzen {
    centers: Vec<f64>,
    sigma: f64,
    lower: f64,
    upper: f64,
    /// Per-kernel probability mass inside the bounds.
    mass: Vec<f64>,
}

impl Parzen {
    /// Kernels at `observations`, bandwidth by Scott's rule
    /// `1.06 · sd · m^(-1/5)` floored at `floor`.
    pub fn fit(observations: &[f64], lower: f64, upper: f64, floor: f64) -> Self {
        let m = observations.len();
        let sd = if m >= 2 {
            let mean = observations.iter().sum::<f64>() / m as f64;
            (observations.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (m - 1) as f64).sqrt()
        } else {
            0.0
        };
        let sigma = (1.06 * sd * (m.max(1) as f64).powf(-0.2)).max(floor);
        let std = Normal::standard();
        let mass = observations
            .iter()
            .map(|&mu| (std.cdf((upper - mu) / sigma) - std.cdf((lower - mu) / sigma)).max(f64::MIN_POSITIVE))
            .collect();
        Self { centers: observations.to_vec(), sigma, lower, upper, mass }
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if self.centers.is_empty() {
            return if (self.lower..=self.upper).contains(&x) { 1.0 / (self.upper - self.lower) } else { 0.0 };
        }
        if !(self.lower..=self.upper).contains(&x) {
            return 0.0;
        }
        let norm = 1.0 / (self.sigma * (2.0 * std::f64::consts::PI).sqrt());
        let total: f64 = self
            .centers
            .iter()
            .zip(&self.mass)
            .map(|(&mu, &z)| {
                let t = (x - mu) / self.sigma;
                norm * (-0.5 * t * t).exp() / z
            })
            .sum();
        total / self.centers.len() as f64
    }

    /// Picks a kernel uniformly, then draws from it by inverting the
    /// truncated normal CDF.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.centers.is_empty() {
            return rng.random_range(self.lower..=self.upper);
        }
        let std = Normal::standard();
        let k = rng.random_range(0..self.centers.len());
        let mu = self.centers[k];
        let a = std.cdf((self.lower - mu) / self.sigma);
        let b = std.cdf((self.upper - mu) / self.sigma);
        let u: f64 = rng.random();
        let p = (a + u * (b - a)).clamp(1e-300, 1.0 - 1e-16);
        (mu + self.sigma * std.inverse_cdf(p)).clamp(self.lower, self.upper)
    }
}

const DENSITY_FLOOR: f64 = 1e-12;

/// Proposes the next weight vector given the trial history (higher
/// objective is better).
pub fn tpe_suggest<R: Rng + ?Sized>(history: &[TrialRecord], config: &TpeConfig, rng: &mut R) -> [f64; 7] {
    let (lo, hi) = (config.lower, config.upper);
    if history.len() < config.n_startup_trials {
        return std::array::from_fn(|_| rng.random_range(lo..=hi));
    }

    let mut order: Vec<&TrialRecord> = history.iter().collect();
    order.sort_by(|a, b| b.objective.total_cmp(&a.objective).then(a.trial_index.cmp(&b.trial_index)));
    let n_good = good_set_size(order.len(), config.gamma);
    let (good, bad) = order.split_at(n_good);

    let fit = |set: &[&TrialRecord], d: usize| {
        let xs: Vec<f64> = set.iter().map(|t| t.weights.weights()[d]).collect();
        Parzen::fit(&xs, lo, hi, config.bandwidth_floor)
    };
    let models: Vec<(Parzen, Parzen)> = (0..7).map(|d| (fit(good, d), fit(bad, d))).collect();

    let mut best: Option<([f64; 7], f64)> = None;
    for _ in 0..config.n_candidates {
        let candidate: [f64; 7] = std::array::from_fn(|d| models[d].0.sample(rng));
        let score: f64 = candidate
            .iter()
            .zip(&models)
            .map(|(&x, (l, g))| l.pdf(x).max(DENSITY_FLOOR).ln() - g.pdf(x).max(DENSITY_FLOOR).ln())
            .sum();
        if best.is_none_or(|(_, s)| score > s) {
            best = Some((candidate, score));
        }
    }
    best.expect("n_candidates >= 1").0
}
