//! Small descriptive-statistics helpers.

use serde::Serialize;

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator).
pub fn sd(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64).sqrt()
}

/// Linear-interpolation quantile of already sorted data (the "type 7"
/// definition: position `(n - 1) p`).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    assert!(n > 0, "quantile of empty data");
    let pos = (n - 1) as f64 * p.clamp(0.0, 1.0);
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

pub fn sorted(xs: &[f64]) -> Vec<f64> {
    let mut v = xs.to_vec();
    v.sort_by(f64::total_cmp);
    v
}

/// Six-number summary in the usual `Min / 1st Qu / Median / Mean / 3rd Qu /
/// Max` layout. Non-finite samples are counted in `missing` and excluded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub mean: f64,
    pub q3: f64,
    pub max: f64,
    pub missing: usize,
}

impl Summary {
    pub fn of(samples: &[f64]) -> Summary {
        let finite: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
        let missing = samples.len() - finite.len();
        if finite.is_empty() {
            return Summary {
                min: f64::NAN,
                q1: f64::NAN,
                median: f64::NAN,
                mean: f64::NAN,
                q3: f64::NAN,
                max: f64::NAN,
                missing,
            };
        }
        let s = sorted(&finite);
        Summary {
            min: s[0],
            q1: quantile_sorted(&s, 0.25),
            median: quantile_sorted(&s, 0.5),
            mean: mean(&s),
            q3: quantile_sorted(&s, 0.75),
            max: s[s.len() - 1],
            missing,
        }
    }
}
