//! AR(3) baselines over lagged labels: the same metric's three lags, or all
//! seven metrics' lags, with a linear or logistic link.

use serde::{Deserialize, Serialize};

use super::linalg::{cholesky_solve, dot, sigmoid, softplus, SymMatrix};
use crate::dataset::{LabeledExample, LagLabels, LAGS};
use crate::error::{Error, Result};
use crate::metrics::Metric;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    SameMetric,
    AllMetrics,
}

impl FeatureSet {
    pub fn arity(self) -> usize {
        match self {
            FeatureSet::SameMetric => LAGS,
            FeatureSet::AllMetrics => LAGS * Metric::ALL.len(),
        }
    }

    pub fn features(self, target: Metric, lags: &LagLabels) -> Vec<f64> {
        match self {
            FeatureSet::SameMetric => lags.same_metric(target),
            FeatureSet::AllMetrics => lags.all_metrics(),
        }
    }

    pub fn names(self, target: Metric) -> Vec<String> {
        match self {
            FeatureSet::SameMetric => (1..=LAGS).map(|j| format!("{}_lag{j}", target.name())).collect(),
            FeatureSet::AllMetrics => LagLabels::field_names(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Linear,
    Logistic,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ARModelFit {
    pub target_metric: Metric,
    pub feature_set: FeatureSet,
    pub link: Link,
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub residual_variance: f64,
    /// Newton iterations for the logistic link; 0 for least squares.
    pub iterations: usize,
}

/// Diagonal ridge keeping the normal equations solvable on degenerate data.
pub const RIDGE: f64 = 1e-8;
const LOGIT_MAX_ITER: usize = 200;
const LOGIT_GRAD_TOL: f64 = 1e-8;

pub fn fit_ar(examples: &[LabeledExample], target: Metric, feature_set: FeatureSet, link: Link) -> Result<ARModelFit> {
    let mut rows = Vec::with_capacity(examples.len());
    let mut y = Vec::with_capacity(examples.len());
    for e in examples {
        let lags = e
            .lagged_labels
            .as_ref()
            .ok_or_else(|| Error::InvalidParameter(format!("example {}/{} has no lagged labels", e.player, e.unit)))?;
        rows.push(feature_set.features(target, lags));
        y.push(f64::from(e.label));
    }
    fit_ar_rows(&rows, &y, target, feature_set, link)
}

/// Fits on explicit feature rows; targets may be continuous for the linear link.
pub fn fit_ar_rows(
    rows: &[Vec<f64>],
    y: &[f64],
    target: Metric,
    feature_set: FeatureSet,
    link: Link,
) -> Result<ARModelFit> {
    let p = feature_set.arity();
    if rows.len() != y.len() {
        return Err(Error::Arity {
            expected: rows.len(),
            got: y.len(),
        });
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != p) {
        return Err(Error::Arity {
            expected: p,
            got: bad.len(),
        });
    }
    if rows.len() < p + 1 {
        return Err(Error::Insufficient(format!(
            "{} examples for {} parameters",
            rows.len(),
            p + 1
        )));
    }
    if link == Link::Logistic && y.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
        return Err(Error::InvalidParameter("logistic targets must lie in [0, 1]".into()));
    }

    // constant columns carry nothing beyond the intercept; they keep coefficient 0
    let active: Vec<usize> = (0..p).filter(|&j| rows.iter().any(|r| r[j] != rows[0][j])).collect();
    let design: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| std::iter::once(1.0).chain(active.iter().map(|&j| r[j])).collect())
        .collect();
    let names = feature_set.names(target);
    let col_name = |c: usize| {
        if c == 0 {
            "intercept".to_owned()
        } else {
            names[active[c - 1]].clone()
        }
    };
    let q = active.len() + 1;

    let mut xtx = SymMatrix::zeros(q);
    let mut xty = vec![0.0; q];
    for (x, &t) in design.iter().zip(y) {
        for i in 0..q {
            xty[i] += x[i] * t;
            for j in 0..q {
                xtx.add(i, j, x[i] * x[j]);
            }
        }
    }
    let singular = |c: usize| Error::SingularDesign {
        column: col_name(c),
        others: (0..c).map(col_name).collect(),
    };
    let mut gram = xtx.clone();
    for i in 0..q {
        gram.add(i, i, RIDGE);
    }

    // collinearity is judged on the plain Gram matrix; the ridge only steadies the solve
    cholesky_solve(&xtx, &xty).map_err(singular)?;
    let (beta, iterations) = match link {
        Link::Linear => (cholesky_solve(&gram, &xty).map_err(singular)?, 0),
        Link::Logistic => irls(&design, y, q)?,
    };

    let n = design.len();
    let fitted: Vec<f64> = design.iter().map(|x| dot(x, &beta)).collect();
    let rss: f64 = match link {
        Link::Linear => fitted.iter().zip(y).map(|(f, t)| (t - f).powi(2)).sum(),
        Link::Logistic => fitted.iter().zip(y).map(|(f, t)| (t - sigmoid(*f)).powi(2)).sum(),
    };
    let dof = if n > q { n - q } else { n };

    let mut coefficients = vec![0.0; p];
    for (k, &j) in active.iter().enumerate() {
        coefficients[j] = beta[k + 1];
    }
    Ok(ARModelFit {
        target_metric: target,
        feature_set,
        link,
        intercept: beta[0],
        coefficients,
        residual_variance: rss / dof as f64,
        iterations,
    })
}

fn neg_log_likelihood(design: &[Vec<f64>], y: &[f64], beta: &[f64]) -> f64 {
    let ridge: f64 = 0.5 * RIDGE * dot(beta, beta);
    design
        .iter()
        .zip(y)
        .map(|(x, &t)| {
            let z = dot(x, beta);
            softplus(z) - t * z
        })
        .sum::<f64>()
        + ridge
}

/// Newton-Raphson on the (tiny-ridge) log-likelihood, i.e. iteratively
/// reweighted least squares, with step halving.
fn irls(design: &[Vec<f64>], y: &[f64], q: usize) -> Result<(Vec<f64>, usize)> {
    let mut beta = vec![0.0; q];
    let mut loss = neg_log_likelihood(design, y, &beta);
    let mut iterations = 0;
    while iterations < LOGIT_MAX_ITER {
        let mut grad = vec![0.0; q];
        let mut hess = SymMatrix::zeros(q);
        for (x, &t) in design.iter().zip(y) {
            let mu = sigmoid(dot(x, &beta));
            let w = mu * (1.0 - mu);
            for i in 0..q {
                grad[i] += x[i] * (t - mu);
                for j in 0..q {
                    hess.add(i, j, w * x[i] * x[j]);
                }
            }
        }
        for i in 0..q {
            grad[i] -= RIDGE * beta[i];
            hess.add(i, i, RIDGE);
        }
        if dot(&grad, &grad).sqrt() <= LOGIT_GRAD_TOL {
            break;
        }
        iterations += 1;
        let Ok(step) = cholesky_solve(&hess, &grad) else {
            break;
        };
        let mut scale = 1.0;
        loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let cand_loss = neg_log_likelihood(design, y, &cand);
            if cand_loss <= loss || scale < 1e-10 {
                beta = cand;
                loss = cand_loss;
                break;
            }
            scale *= 0.5;
        }
    }
    Ok((beta, iterations))
}

impl ARModelFit {
    /// Linear: clamp of the linear form into [0, 1]; logistic: its sigmoid.
    pub fn predict(&self, lags: &[f64]) -> Result<f64> {
        if lags.len() != self.coefficients.len() {
            return Err(Error::Arity {
                expected: self.coefficients.len(),
                got: lags.len(),
            });
        }
        let z = self.intercept + dot(&self.coefficients, lags);
        Ok(match self.link {
            Link::Linear => z.clamp(0.0, 1.0),
            Link::Logistic => sigmoid(z),
        })
    }

    pub fn predict_example(&self, lags: &LagLabels) -> Result<f64> {
        self.predict(&self.feature_set.features(self.target_metric, lags))
    }
}

pub fn predict_ar(fit: &ARModelFit, lags: &[f64]) -> Result<f64> {
    fit.predict(lags)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn fit(link: Link, intercept: f64, coefficients: Vec<f64>) -> ARModelFit {
        ARModelFit {
            target_metric: Metric::Pts,
            feature_set: FeatureSet::SameMetric,
            link,
            intercept,
            coefficients,
            residual_variance: 0.0,
            iterations: 0,
        }
    }

    #[test]
    fn predict_examples() {
        let f = fit(Link::Linear, 0.7, vec![0.0; 3]);
        assert_eq!(f.predict(&[1.0, 0.0, 1.0]).unwrap(), 0.7);
        let f = fit(Link::Linear, 0.4, vec![1.0, 0.0, 0.0]);
        assert_eq!(f.predict(&[1.0, 0.0, 0.0]).unwrap(), 1.0);
        let f = fit(Link::Logistic, 0.0, vec![0.0; 3]);
        assert_eq!(f.predict(&[1.0, 1.0, 1.0]).unwrap(), 0.5);
        assert!(matches!(f.predict(&[1.0]), Err(Error::Arity { expected: 3, got: 1 })));
    }

    fn random_rows(n: usize, p: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n)
            .map(|_| (0..p).map(|_| f64::from(rng.random_range(0u8..2))).collect())
            .collect()
    }

    #[test]
    fn constant_target() {
        let rows = random_rows(50, 3, 1);
        let y = vec![1.0; 50];
        let f = fit_ar_rows(&rows, &y, Metric::Pts, FeatureSet::SameMetric, Link::Linear).unwrap();
        assert!((f.intercept - 1.0).abs() < 1e-6, "{f:?}");
        assert!(f.coefficients.iter().all(|c| c.abs() < 1e-6));
    }

    #[test]
    fn constant_column_gets_zero_coefficient() {
        let mut rows = random_rows(60, 3, 2);
        rows.iter_mut().for_each(|r| r[1] = 1.0);
        let y: Vec<f64> = rows.iter().map(|r| r[0]).collect();
        let f = fit_ar_rows(&rows, &y, Metric::Fgr, FeatureSet::SameMetric, Link::Linear).unwrap();
        assert_eq!(f.coefficients[1], 0.0);
        assert!((f.coefficients[0] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn duplicate_columns_are_reported() {
        let mut rows = random_rows(60, 3, 3);
        rows.iter_mut().for_each(|r| r[2] = r[0]);
        let y: Vec<f64> = rows.iter().map(|r| r[1]).collect();
        let err = fit_ar_rows(&rows, &y, Metric::Sr, FeatureSet::SameMetric, Link::Linear).unwrap_err();
        match err {
            Error::SingularDesign { column, others } => {
                assert_eq!(column, "SR_lag3");
                assert!(others.contains(&"SR_lag1".to_owned()));
            }
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn all_metrics_arity() {
        let rows = random_rows(200, 21, 4);
        let y: Vec<f64> = rows.iter().map(|r| r[5]).collect();
        let f = fit_ar_rows(&rows, &y, Metric::Pf, FeatureSet::AllMetrics, Link::Linear).unwrap();
        assert_eq!(f.coefficients.len(), 21);
        assert!(fit_ar_rows(&rows[..10], &y[..10], Metric::Pf, FeatureSet::AllMetrics, Link::Linear).is_err());
    }

    #[test]
    fn ols_residuals_are_orthogonal_to_regressors() {
        let rows = random_rows(500, 3, 5);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 0.2 + 0.3 * r[0] - 0.1 * r[2] + rng.random_range(-0.5..0.5))
            .collect();
        let f = fit_ar_rows(&rows, &y, Metric::Pts, FeatureSet::SameMetric, Link::Linear).unwrap();
        let resid: Vec<f64> = rows
            .iter()
            .zip(&y)
            .map(|(r, t)| t - f.intercept - dot(&f.coefficients, r))
            .collect();
        let n = rows.len() as f64;
        assert!(resid.iter().sum::<f64>().abs() <= 1e-6 * n);
        for j in 0..3 {
            let s: f64 = resid.iter().zip(&rows).map(|(e, r)| e * r[j]).sum();
            assert!(s.abs() <= 1e-6 * n, "column {j}: {s}");
        }
    }

    #[test]
    fn logistic_recovers_known_coefficients() {
        let rows = random_rows(20_000, 3, 7);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let y: Vec<f64> = rows
            .iter()
            .map(|r| f64::from(u8::from(rng.random::<f64>() < sigmoid(-0.5 + 1.0 * r[0] - 0.8 * r[1]))))
            .collect();
        let f = fit_ar_rows(&rows, &y, Metric::Pts, FeatureSet::SameMetric, Link::Logistic).unwrap();
        assert!((f.intercept + 0.5).abs() < 0.1, "{f:?}");
        assert!((f.coefficients[0] - 1.0).abs() < 0.1);
        assert!((f.coefficients[1] + 0.8).abs() < 0.1);
        assert!(f.coefficients[2].abs() < 0.1);
        assert!(f.iterations < LOGIT_MAX_ITER);
    }
}
