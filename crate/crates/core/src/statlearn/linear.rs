//! Least squares and ridge regression.

use nalgebra::{DMatrix, DVector};

use super::knn::Standardizer;
use super::{Features, LearnError};

/// `y = intercept + coef . x` on raw feature scale.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    pub intercept: f64,
    pub coef: Vec<f64>,
    /// Ridge penalty, `None` for plain least squares.
    pub lambda: Option<f64>,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(x).map(|(c, v)| c * v).sum::<f64>()
    }
}

/// Relative size below which an `R` diagonal entry marks a dependent column.
const RANK_TOL: f64 = 1e-10;

/// Least squares with intercept via Householder QR.
pub fn ols(x: &Features, y: &[f64]) -> Result<LinearModel, LearnError> {
    let n = y.len();
    let p = x.n_features() + 1;
    if n < p {
        return Err(LearnError::TooFewSamples { n, p });
    }
    let design = DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { x.row(i)[j - 1] });
    let col_norms: Vec<f64> = design.column_iter().map(|c| c.norm()).collect();
    let qr = design.qr();
    let r = qr.r();
    let mut names = vec!["(intercept)".to_string()];
    names.extend(x.names().iter().cloned());
    for j in 0..p {
        if r[(j, j)].abs() <= RANK_TOL * col_norms[j].max(f64::MIN_POSITIVE) {
            return Err(LearnError::RankDeficient {
                column: names[j].clone(),
                with: names[..j].to_vec(),
            });
        }
    }
    let mut qty = DVector::from_column_slice(y);
    qr.q_tr_mul(&mut qty);
    let beta = r
        .solve_upper_triangular(&qty.rows(0, p).into_owned())
        .expect("diagonal checked nonzero");
    Ok(LinearModel {
        intercept: beta[0],
        coef: beta.iter().skip(1).copied().collect(),
        lambda: None,
    })
}

/// Ridge on standardized features: minimizes
/// `sum (y - b0 - z.beta)^2 + lambda |beta|^2` with the intercept free.
pub fn ridge(x: &Features, y: &[f64], lambda: f64) -> Result<LinearModel, LearnError> {
    let n = y.len();
    if n == 0 {
        return Err(LearnError::Empty);
    }
    let p = x.n_features();
    let st = Standardizer::fit(x);
    let y_mean = y.iter().sum::<f64>() / n as f64;
    let mut ztz = DMatrix::<f64>::zeros(p, p);
    let mut zty = DVector::<f64>::zeros(p);
    let mut z = vec![0.0; p];
    for (r, &t) in x.rows().zip(y) {
        st.apply(r, &mut z);
        let yc = t - y_mean;
        for a in 0..p {
            zty[a] += z[a] * yc;
            for b in 0..p {
                ztz[(a, b)] += z[a] * z[b];
            }
        }
    }
    if lambda == 0.0 {
        // Same conditioning test as least squares, on the centred design.
        let m = DMatrix::from_fn(n, p, |i, j| (x.row(i)[j] - st.mean[j]) / st.scale[j]);
        let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
        let r = m.qr().r();
        for j in 0..p.min(n) {
            if r[(j, j)].abs() <= RANK_TOL * norms[j].max(f64::MIN_POSITIVE) || norms[j] == 0.0 {
                let mut with = vec!["(intercept)".to_string()];
                with.extend(x.names()[..j].iter().cloned());
                return Err(LearnError::RankDeficient {
                    column: x.names()[j].clone(),
                    with,
                });
            }
        }
        if n <= p {
            return Err(LearnError::TooFewSamples { n, p: p + 1 });
        }
    }
    for a in 0..p {
        ztz[(a, a)] += lambda;
    }
    let beta = ztz
        .cholesky()
        .map(|c| c.solve(&zty))
        .ok_or(LearnError::RankDeficient {
            column: x.names().last().cloned().unwrap_or_default(),
            with: x.names().to_vec(),
        })?;
    let coef: Vec<f64> = (0..p).map(|j| beta[j] / st.scale[j]).collect();
    let intercept = y_mean - coef.iter().zip(&st.mean).map(|(c, m)| c * m).sum::<f64>();
    Ok(LinearModel {
        intercept,
        coef,
        lambda: Some(lambda),
    })
}
