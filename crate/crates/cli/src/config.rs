//! `--config` file: defaults for every command, overridden by flags.
//!
//! ```toml
//! runs = 25000
//! seed = 0
//! folds = 10
//! repeats = 3            # regression CV repeats; classification runs once
//! split = 0.8
//! checkpoints = [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 100]
//! knn = [5, 9, 15, 25]
//! ridge = [0.0, 0.01, 0.1, 1.0, 10.0]
//! cart = { min_leaf = 20, max_depth = 8 }
//! bandwidth = "normal-reference"   # or { hx = 2.0, hy = 3.0 }
//! ```

use std::path::Path;

use serde::Deserialize;

use sedm_core::bench::{BenchmarkConfig, ForecastConfig};
use sedm_core::milestone::{BandwidthRule, KdeConfig};
use sedm_core::montecarlo::DEFAULT_RUNS;
use sedm_core::statlearn::tree::TreeParams;
use sedm_core::statlearn::{CvPlan, Grids};

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CartSetting {
    pub min_leaf: usize,
    pub max_depth: usize,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum BandwidthSetting {
    Rule(String),
    Fixed { hx: f64, hy: f64 },
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub runs: Option<usize>,
    pub seed: Option<u64>,
    pub folds: Option<usize>,
    pub repeats: Option<usize>,
    pub split: Option<f64>,
    pub checkpoints: Option<Vec<u32>>,
    pub knn: Option<Vec<usize>>,
    pub ridge: Option<Vec<f64>>,
    pub cart: Option<CartSetting>,
    pub bandwidth: Option<BandwidthSetting>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Config, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let config: Config = toml::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        config.check().map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(config)
    }

    fn check(&self) -> Result<(), String> {
        if self.runs == Some(0) {
            return Err("runs must be at least 1".into());
        }
        if let Some(f) = self.folds {
            if f < 2 {
                return Err("folds must be at least 2".into());
            }
        }
        if self.repeats == Some(0) {
            return Err("repeats must be at least 1".into());
        }
        if let Some(s) = self.split {
            if !(s > 0.0 && s <= 1.0) {
                return Err(format!("split must be in (0, 1], got {s}"));
            }
        }
        if let Some(c) = &self.checkpoints {
            if c.is_empty() || c.iter().any(|&p| p > 100) {
                return Err("checkpoints must be percentages between 0 and 100".into());
            }
        }
        if self.knn.as_ref().is_some_and(|k| k.is_empty() || k.contains(&0)) {
            return Err("knn grid must hold positive neighbour counts".into());
        }
        if self.ridge.as_ref().is_some_and(|r| r.is_empty() || r.iter().any(|&l| !(l >= 0.0))) {
            return Err("ridge grid must hold non-negative penalties".into());
        }
        if let Some(c) = self.cart {
            if c.min_leaf == 0 || c.max_depth == 0 {
                return Err("cart min_leaf and max_depth must be positive".into());
            }
        }
        match &self.bandwidth {
            Some(BandwidthSetting::Rule(r)) if r != "normal-reference" => {
                Err(format!("unknown bandwidth rule '{r}' (expected \"normal-reference\" or {{ hx, hy }})"))
            }
            Some(BandwidthSetting::Fixed { hx, hy }) if !(*hx > 0.0 && *hy > 0.0) => {
                Err("fixed bandwidths must be positive".into())
            }
            _ => Ok(()),
        }
    }

    pub fn runs(&self) -> usize {
        self.runs.unwrap_or(DEFAULT_RUNS)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn forecast(&self, seed: u64) -> ForecastConfig {
        let folds = self.folds.unwrap_or(10);
        let mut class_plan = CvPlan::classification(seed);
        class_plan.folds = folds;
        let mut reg_plan = CvPlan::regression(seed);
        reg_plan.folds = folds;
        if let Some(r) = self.repeats {
            reg_plan.repeats = r;
        }
        let mut grids = Grids::default();
        if let Some(k) = &self.knn {
            grids.knn = k.clone();
        }
        if let Some(r) = &self.ridge {
            grids.ridge = r.clone();
        }
        if let Some(c) = self.cart {
            grids.tree = TreeParams {
                min_leaf: c.min_leaf,
                max_depth: c.max_depth,
            };
        }
        let mut kde = KdeConfig::default();
        if let Some(BandwidthSetting::Fixed { hx, hy }) = self.bandwidth {
            kde.bandwidth = BandwidthRule::Fixed { hx, hy };
        }
        ForecastConfig {
            class_plan,
            reg_plan,
            grids,
            train_ratio: self.split.unwrap_or(0.8),
            kde,
            anomaly: true,
            seed,
        }
    }

    pub fn benchmark(&self, seed: u64) -> BenchmarkConfig {
        let mut b = BenchmarkConfig {
            forecast: self.forecast(seed),
            ..BenchmarkConfig::default()
        };
        if let Some(c) = &self.checkpoints {
            b.checkpoints = c.clone();
        }
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_apply() {
        let c: Config = toml::from_str(
            "runs = 500\nfolds = 4\nrepeats = 2\nknn = [3]\ncart = { min_leaf = 5, max_depth = 3 }\nbandwidth = { hx = 1.0, hy = 2.0 }",
        )
        .unwrap();
        c.check().unwrap();
        let f = c.forecast(9);
        assert_eq!(c.runs(), 500);
        assert_eq!((f.class_plan.folds, f.reg_plan.folds, f.reg_plan.repeats, f.class_plan.repeats), (4, 4, 2, 1));
        assert_eq!(f.grids.knn, vec![3]);
        assert_eq!(f.grids.tree.min_leaf, 5);
        assert_eq!(f.kde.bandwidth, BandwidthRule::Fixed { hx: 1.0, hy: 2.0 });
        assert_eq!(f.class_plan.seed, 9);
    }

    #[test]
    fn defaults_match_library() {
        let c = Config::default();
        assert_eq!(c.runs(), 25_000);
        assert_eq!(c.forecast(0), ForecastConfig::default());
        assert_eq!(c.benchmark(0), BenchmarkConfig::default());
    }

    #[test]
    fn rejects_bad_values() {
        for text in ["folds = 1", "split = 1.5", "bandwidth = \"silverman\"", "knn = []", "colour = 1"] {
            let parsed: Result<Config, _> = toml::from_str(text);
            assert!(parsed.map_err(|e| e.to_string()).and_then(|c| c.check()).is_err(), "{text}");
        }
    }
}
