//! Two-class linear discriminant analysis.

use nalgebra::{DMatrix, DVector};

use super::{Features, LearnError};

const RIDGE: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct Lda {
    /// Discriminant direction `Sigma^-1 (mu1 - mu0)`.
    w: DVector<f64>,
    /// Log-odds offset at the origin.
    b: f64,
    /// True when the pooled covariance had to be ridged to invert.
    pub regularized: bool,
}

impl Lda {
    /// `y` holds 0/1 labels.
    pub fn fit(x: &Features, y: &[f64]) -> Result<Lda, LearnError> {
        let p = x.n_features();
        let n1 = y.iter().filter(|&&v| v == 1.0).count();
        let n0 = y.len() - n1;
        if n0 == 0 || n1 == 0 {
            return Err(LearnError::SingleClass);
        }
        let mut mu = [DVector::zeros(p), DVector::zeros(p)];
        for (r, &c) in x.rows().zip(y) {
            mu[c as usize] += DVector::from_column_slice(r);
        }
        mu[0] /= n0 as f64;
        mu[1] /= n1 as f64;
        let mut s = DMatrix::zeros(p, p);
        for (r, &c) in x.rows().zip(y) {
            let d = DVector::from_column_slice(r) - &mu[c as usize];
            s += &d * d.transpose();
        }
        let dof = (y.len() as f64 - 2.0).max(1.0);
        s /= dof;
        let well_posed = |c: &nalgebra::Cholesky<f64, nalgebra::Dyn>| {
            let d = c.l_dirty().diagonal().map(|v| v * v);
            d.min() > 1e-12 * d.max()
        };
        let (inv, regularized) = match s.clone().cholesky() {
            Some(c) if well_posed(&c) => (c.inverse(), false),
            _ => {
                let ridged = s + DMatrix::identity(p, p) * RIDGE;
                let inv = ridged
                    .clone()
                    .cholesky()
                    .map(|c| c.inverse())
                    .or_else(|| ridged.try_inverse())
                    .ok_or(LearnError::RankDeficient {
                        column: "pooled covariance".into(),
                        with: x.names().to_vec(),
                    })?;
                (inv, true)
            }
        };
        let w = &inv * (&mu[1] - &mu[0]);
        let quad = |m: &DVector<f64>| (m.transpose() * &inv * m)[(0, 0)];
        let b = -0.5 * (quad(&mu[1]) - quad(&mu[0])) + (n1 as f64 / n0 as f64).ln();
        Ok(Lda { w, b, regularized })
    }

    pub fn log_odds(&self, x: &[f64]) -> f64 {
        self.w.iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + self.b
    }

    /// Posterior probability of class 1.
    pub fn posterior(&self, x: &[f64]) -> f64 {
        logistic(self.log_odds(x))
    }

    /// `[P(class 0), P(class 1)]`.
    pub fn posteriors(&self, x: &[f64]) -> [f64; 2] {
        let z = self.log_odds(x);
        [logistic(-z), logistic(z)]
    }
}

fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statlearn::tests::pairs_features;
    use proptest::prelude::*;

    /// Points at exact `+-1` offsets give each class sample covariance I.
    fn separated() -> (Features, Vec<f64>) {
        let mut pairs = Vec::new();
        let mut y = Vec::new();
        for (c, centre) in [(0.0, 0.0), (1.0, 10.0)] {
            for (dx, dy) in [(1.0, 0.0), (-1.0, 0.0), (0.0, 1.0), (0.0, -1.0)] {
                pairs.push((centre + dx * 2f64.sqrt() * 0.75f64.sqrt(), centre + dy * 2f64.sqrt() * 0.75f64.sqrt()));
                y.push(c);
            }
        }
        (pairs_features(&pairs), y)
    }

    #[test]
    fn separated_gaussians_posterior() {
        let (x, y) = separated();
        let m = Lda::fit(&x, &y).unwrap();
        assert!(!m.regularized);
        let [p0, p1] = m.posteriors(&[1.0, 1.0]);
        assert!(p0 > 0.99, "p0 {p0}");
        // Closed form with identity covariance and equal priors:
        // log-odds = (mu1 - mu0)'x - (|mu1|^2 - |mu0|^2)/2 = 20 - 100.
        assert!((m.log_odds(&[1.0, 1.0]) + 80.0).abs() < 1e-9);
        assert!((p0 + p1 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn singular_covariance_is_ridged() {
        let pairs: Vec<(f64, f64)> = (0..20).map(|i| (i as f64, 2.0 * i as f64)).collect();
        let y: Vec<f64> = (0..20).map(|i| (i >= 10) as u8 as f64).collect();
        let m = Lda::fit(&pairs_features(&pairs), &y).unwrap();
        assert!(m.regularized);
        assert!(m.posterior(&[19.0, 38.0]) > 0.5 && m.posterior(&[0.0, 0.0]) < 0.5);
    }

    #[test]
    fn single_class_rejected() {
        let x = pairs_features(&[(1.0, 2.0), (2.0, 3.0)]);
        assert!(matches!(Lda::fit(&x, &[1.0, 1.0]), Err(LearnError::SingleClass)));
    }

    proptest! {
        #[test]
        fn posteriors_are_probabilities(pts in prop::collection::vec((-20.0f64..20.0, -20.0f64..20.0, any::<bool>()), 4..40),
                                        q in (-100.0f64..100.0, -100.0f64..100.0)) {
            let pairs: Vec<(f64, f64)> = pts.iter().map(|p| (p.0, p.1)).collect();
            let mut y: Vec<f64> = pts.iter().map(|p| p.2 as u8 as f64).collect();
            y[0] = 0.0;
            y[1] = 1.0;
            let m = Lda::fit(&pairs_features(&pairs), &y).unwrap();
            let [p0, p1] = m.posteriors(&[q.0, q.1]);
            prop_assert!((0.0..=1.0).contains(&p0) && (0.0..=1.0).contains(&p1));
            prop_assert!((p0 + p1 - 1.0).abs() < 1e-12);
        }
    }
}
