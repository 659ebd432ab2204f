//! L2-regularized logistic regression on sparse features, fitted with
//! L-BFGS and a backtracking (Armijo) line search.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::linalg::{dot, sigmoid, softplus};
use super::text::SparseVector;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    /// Penalty on the weights; the intercept is not penalized.
    pub l2: f64,
    pub max_iter: usize,
    pub grad_tol: f64,
    pub history: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        Self {
            l2: 1.0,
            max_iter: 500,
            grad_tol: 1e-6,
            history: 10,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    /// Objective after each accepted step, starting from the initial point.
    #[serde(skip)]
    pub loss_history: Vec<f64>,
}

impl LogRegModel {
    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn predict_proba(&self, x: &SparseVector) -> Result<f64> {
        if let Some(max) = x.max_index() {
            if max as usize >= self.weights.len() {
                return Err(Error::Arity {
                    expected: self.weights.len(),
                    got: max as usize + 1,
                });
            }
        }
        Ok(sigmoid(x.dot(&self.weights) + self.intercept))
    }
}

/// Objective and gradient at `params = [weights.., intercept]`:
/// `Σ softplus(z) − y z + λ/2 ‖w‖²`.
pub fn objective_and_gradient(rows: &[SparseVector], labels: &[u8], l2: f64, params: &[f64]) -> (f64, Vec<f64>) {
    let dim = params.len() - 1;
    let (w, b) = (&params[..dim], params[dim]);
    let mut grad = vec![0.0; dim + 1];
    let mut loss = 0.0;
    for (x, &y) in rows.iter().zip(labels) {
        let z = x.dot(w) + b;
        let y = f64::from(y);
        loss += softplus(z) - y * z;
        let r = sigmoid(z) - y;
        for (i, v) in x.iter() {
            grad[i as usize] += r * v;
        }
        grad[dim] += r;
    }
    loss += 0.5 * l2 * dot(w, w);
    for (g, wi) in grad.iter_mut().zip(w) {
        *g += l2 * wi;
    }
    (loss, grad)
}

fn check_inputs(rows: &[SparseVector], labels: &[u8], dim: usize) -> Result<()> {
    if rows.len() != labels.len() {
        return Err(Error::Arity {
            expected: rows.len(),
            got: labels.len(),
        });
    }
    if let Some(max) = rows.iter().filter_map(SparseVector::max_index).max() {
        if max as usize >= dim {
            return Err(Error::Arity {
                expected: dim,
                got: max as usize + 1,
            });
        }
    }
    let pos = labels.iter().filter(|&&y| y == 1).count();
    if labels.iter().any(|&y| y > 1) {
        return Err(Error::InvalidParameter("labels must be 0 or 1".into()));
    }
    if pos == 0 || pos == labels.len() {
        return Err(Error::SingleClass);
    }
    Ok(())
}

pub fn fit_logreg(rows: &[SparseVector], labels: &[u8], dim: usize, cfg: &LogRegConfig) -> Result<LogRegModel> {
    fit_logreg_from(rows, labels, dim, cfg, None)
}

/// Fits from an explicit starting point (`[weights.., intercept]`), zeros by default.
pub fn fit_logreg_from(
    rows: &[SparseVector],
    labels: &[u8],
    dim: usize,
    cfg: &LogRegConfig,
    init: Option<&[f64]>,
) -> Result<LogRegModel> {
    check_inputs(rows, labels, dim)?;
    if !(cfg.l2 >= 0.0) {
        return Err(Error::InvalidParameter("l2 must be nonnegative".into()));
    }
    let mut x: Vec<f64> = match init {
        Some(p) if p.len() == dim + 1 => p.to_vec(),
        Some(p) => {
            return Err(Error::Arity {
                expected: dim + 1,
                got: p.len(),
            })
        }
        None => vec![0.0; dim + 1],
    };
    let eval = |p: &[f64]| objective_and_gradient(rows, labels, cfg.l2, p);
    let (mut f, mut g) = eval(&x);
    let mut history = vec![f];
    let mut pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)> = VecDeque::new();
    let mut iterations = 0;

    while iterations < cfg.max_iter && dot(&g, &g).sqrt() > cfg.grad_tol {
        // two-loop recursion for the search direction
        let mut d: Vec<f64> = g.iter().map(|v| -v).collect();
        let mut alphas = Vec::with_capacity(pairs.len());
        for (s, y, rho) in pairs.iter().rev() {
            let a = rho * dot(s, &d);
            d.iter_mut().zip(y).for_each(|(di, yi)| *di -= a * yi);
            alphas.push(a);
        }
        if let Some((s, y, _)) = pairs.back() {
            let gamma = dot(s, y) / dot(y, y);
            d.iter_mut().for_each(|di| *di *= gamma);
        }
        for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &d);
            d.iter_mut().zip(s).for_each(|(di, si)| *di += (a - b) * si);
        }
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            // lost descent; restart from steepest descent
            pairs.clear();
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
        }

        let mut step = if pairs.is_empty() {
            1.0 / dot(&g, &g).sqrt().max(1.0)
        } else {
            1.0
        };
        let accepted = loop {
            let cand: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            let (fc, gc) = eval(&cand);
            // Armijo, or the approximate Wolfe test once the decrease is
            // below the rounding noise of the summed loss
            let approx_wolfe = fc <= f + 1e-10 * f.abs() && dot(&gc, &d) <= (2.0 * 1e-4 - 1.0) * slope;
            if fc <= f + 1e-4 * step * slope || approx_wolfe {
                break Some((cand, fc, gc));
            }
            step *= 0.5;
            if step < 1e-20 {
                break None;
            }
        };
        let Some((cand, fc, gc)) = accepted else {
            break;
        };
        iterations += 1;
        let s: Vec<f64> = cand.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = gc.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 * dot(&y, &y).sqrt() * dot(&s, &s).sqrt() {
            if pairs.len() == cfg.history {
                pairs.pop_front();
            }
            pairs.push_back((s, y, 1.0 / sy));
        }
        x = cand;
        f = fc;
        g = gc;
        history.push(f);
    }

    let intercept = x[dim];
    x.truncate(dim);
    Ok(LogRegModel {
        weights: x,
        intercept,
        iterations,
        grad_norm: dot(&g, &g).sqrt(),
        loss_history: history,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn toy(n: usize, seed: u64) -> (Vec<SparseVector>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for _ in 0..n {
            let a: f64 = rng.random_range(-2.0..2.0);
            let b: f64 = rng.random_range(-2.0..2.0);
            let y = u8::from(rng.random::<f64>() < sigmoid(1.5 * a - b + 0.3));
            rows.push(SparseVector::from_dense(&[a, b, if y == 1 { 0.0 } else { 0.5 }]));
            labels.push(y);
        }
        (rows, labels)
    }

    #[test]
    fn separable_toy_set_is_fit_exactly() {
        let rows: Vec<SparseVector> = [
            [1.0, 2.0],
            [2.0, 1.5],
            [1.5, 3.0],
            [-1.0, -2.0],
            [-2.0, -0.5],
            [-1.5, -1.0],
        ]
        .iter()
        .map(|r| SparseVector::from_dense(r))
        .collect();
        let labels = [1, 1, 1, 0, 0, 0];
        let m = fit_logreg(&rows, &labels, 2, &LogRegConfig::default()).unwrap();
        let acc = rows
            .iter()
            .zip(labels)
            .filter(|(r, y)| u8::from(m.predict_proba(r).unwrap() >= 0.5) == *y)
            .count();
        assert_eq!(acc, 6);
    }

    #[test]
    fn heavy_penalty_gives_base_rate() {
        let (rows, labels) = toy(300, 1);
        let cfg = LogRegConfig {
            l2: 1e9,
            ..Default::default()
        };
        let m = fit_logreg(&rows, &labels, 3, &cfg).unwrap();
        let rate = labels.iter().filter(|&&y| y == 1).count() as f64 / labels.len() as f64;
        assert!(m.weights.iter().all(|w| w.abs() < 1e-6), "{:?}", m.weights);
        assert!((sigmoid(m.intercept) - rate).abs() < 1e-6);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let (rows, labels) = toy(200, 2);
        let m = fit_logreg(&rows, &labels, 3, &LogRegConfig::default()).unwrap();
        let mut p = m.weights.clone();
        p.push(m.intercept);
        let (_, grad) = objective_and_gradient(&rows, &labels, 1.0, &p);
        let h = 1e-5;
        for i in 0..p.len() {
            let mut up = p.clone();
            let mut down = p.clone();
            up[i] += h;
            down[i] -= h;
            let fd = (objective_and_gradient(&rows, &labels, 1.0, &up).0
                - objective_and_gradient(&rows, &labels, 1.0, &down).0)
                / (2.0 * h);
            assert!((fd - grad[i]).abs() <= 1e-5, "param {i}: fd {fd} vs {}", grad[i]);
        }
        assert!(m.grad_norm <= 1e-6);
    }

    #[test]
    fn loss_decreases_and_fits_agree_across_starts() {
        let (rows, labels) = toy(400, 3);
        let cfg = LogRegConfig::default();
        let a = fit_logreg(&rows, &labels, 3, &cfg).unwrap();
        assert!(a.loss_history.windows(2).all(|w| w[1] <= w[0] + 1e-10 * w[0].abs()));
        let b = fit_logreg_from(&rows, &labels, 3, &cfg, Some(&[5.0, -5.0, 3.0, -2.0])).unwrap();
        for (x, y) in a.weights.iter().zip(&b.weights) {
            assert!((x - y).abs() <= 1e-4);
        }
        assert!((a.intercept - b.intercept).abs() <= 1e-4);
    }

    #[test]
    fn errors() {
        let rows = vec![SparseVector::from_dense(&[1.0]); 3];
        assert!(matches!(
            fit_logreg(&rows, &[1, 1, 1], 1, &LogRegConfig::default()),
            Err(Error::SingleClass)
        ));
        let m = fit_logreg(&rows, &[1, 0, 1], 1, &LogRegConfig::default()).unwrap();
        assert!(m.predict_proba(&SparseVector::from_dense(&[0.0, 1.0])).is_err());
    }
}
