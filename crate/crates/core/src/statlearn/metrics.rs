//! Classification and regression scores.

use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    Accuracy,
    Kappa,
    Mae,
    Rmse,
    R2,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::Accuracy => "accuracy",
            Metric::Kappa => "kappa",
            Metric::Mae => "mae",
            Metric::Rmse => "rmse",
            Metric::R2 => "r2",
        }
    }
}

/// 2x2 confusion counts, rows observed class, columns predicted class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Confusion(pub [[u64; 2]; 2]);

impl Confusion {
    pub fn from_labels(predicted: &[bool], observed: &[bool]) -> Confusion {
        let mut c = [[0u64; 2]; 2];
        for (&p, &o) in predicted.iter().zip(observed) {
            c[o as usize][p as usize] += 1;
        }
        Confusion(c)
    }

    pub fn total(&self) -> u64 {
        self.0.iter().flatten().sum()
    }

    pub fn accuracy(&self) -> f64 {
        (self.0[0][0] + self.0[1][1]) as f64 / self.total() as f64
    }

    /// Cohen's kappa; `None` when chance agreement is already 1.
    ///
    /// Computed as `(n * agree - chance) / (n^2 - chance)` on integer counts,
    /// so tables with exact rational kappa give the correctly rounded value.
    pub fn kappa(&self) -> Option<f64> {
        let c = &self.0;
        let n = self.total() as u128;
        let agree = (c[0][0] + c[1][1]) as u128;
        let chance: u128 = (0..2)
            .map(|i| (c[i][0] + c[i][1]) as u128 * (c[0][i] + c[1][i]) as u128)
            .sum();
        let denom = n * n - chance;
        if denom == 0 {
            return None;
        }
        Some(((n * agree) as i128 - chance as i128) as f64 / denom as f64)
    }
}

pub fn mae(predicted: &[f64], observed: &[f64]) -> f64 {
    let n = predicted.len() as f64;
    predicted.iter().zip(observed).map(|(p, o)| (p - o).abs()).sum::<f64>() / n
}

pub fn rmse(predicted: &[f64], observed: &[f64]) -> f64 {
    let n = predicted.len() as f64;
    (predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum::<f64>() / n).sqrt()
}

/// `1 - SS_res / SS_tot`; `None` for constant observations.
pub fn r2(predicted: &[f64], observed: &[f64]) -> Option<f64> {
    let m = observed.iter().sum::<f64>() / observed.len() as f64;
    let ss_tot: f64 = observed.iter().map(|o| (o - m) * (o - m)).sum();
    if ss_tot == 0.0 {
        return None;
    }
    let ss_res: f64 = predicted.iter().zip(observed).map(|(p, o)| (p - o) * (p - o)).sum();
    Some(1.0 - ss_res / ss_tot)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn kappa_example() {
        let c = Confusion([[40, 10], [10, 40]]);
        assert_eq!(c.accuracy(), 0.8);
        assert_eq!(c.kappa(), Some(0.6));
    }

    #[test]
    fn perfect_scores() {
        let obs = [true, false, true, true];
        let c = Confusion::from_labels(&obs, &obs);
        assert_eq!((c.accuracy(), c.kappa()), (1.0, Some(1.0)));
        let y = [1.0, 2.0, 4.0];
        assert_eq!((mae(&y, &y), rmse(&y, &y), r2(&y, &y)), (0.0, 0.0, Some(1.0)));
    }

    #[test]
    fn regression_example() {
        let (p, o) = ([1.0, 2.0], [1.0, 4.0]);
        assert_eq!(mae(&p, &o), 1.0);
        assert!((rmse(&p, &o) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn undefined_cases() {
        let all_one = [true; 5];
        assert_eq!(Confusion::from_labels(&all_one, &all_one).kappa(), None);
        assert_eq!(r2(&[1.0, 2.0], &[3.0, 3.0]), None);
    }

    proptest! {
        #[test]
        fn metric_ranges(pairs in prop::collection::vec((-50.0f64..50.0, -50.0f64..50.0), 1..60),
                         labels in prop::collection::vec((any::<bool>(), any::<bool>()), 1..60)) {
            let (p, o): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
            prop_assert!(mae(&p, &o) <= rmse(&p, &o) + 1e-12);
            if let Some(r) = r2(&p, &o) {
                prop_assert!(r <= 1.0);
            }
            let (lp, lo): (Vec<bool>, Vec<bool>) = labels.into_iter().unzip();
            let c = Confusion::from_labels(&lp, &lo);
            prop_assert!((0.0..=1.0).contains(&c.accuracy()));
            if let Some(k) = c.kappa() {
                prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&k));
            }
        }
    }
}
