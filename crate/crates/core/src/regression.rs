//! Differentially private linear regression with per-record budgets.
//!
//! Full-batch gradient descent on squared loss with per-example gradient
//! clipping. Budgets enter either by weighting (example `i`'s clipped
//! gradient scaled by `eps_i / t`) or by sampling (example `i` included
//! each step with the sample-mechanism probability). Per-step Laplace
//! noise of scale `clip_norm / t` is added to the summed gradient.
//!
//! All randomness is keyed by example identity rather than position, so
//! shuffling rows together with their budgets and ids reproduces the same
//! coefficients.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mechanisms::{sample_inclusion_probability, MechanismResult, MechanismValue};
use crate::dpmap::PrivacyBudget;
use crate::rng::{derive_seed, rng_from_seed, sample_laplace};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegressionStrategy {
    Weighting,
    Sampling,
}

impl RegressionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            RegressionStrategy::Weighting => "weighting",
            RegressionStrategy::Sampling => "sampling",
        }
    }
}

impl std::str::FromStr for RegressionStrategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "weighting" => Ok(RegressionStrategy::Weighting),
            "sampling" => Ok(RegressionStrategy::Sampling),
            other => Err(Error::argument(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegressionHyper {
    pub clip_norm: f64,
    pub epochs: usize,
    pub rate: f64,
    pub seed: u64,
    /// Disable the per-step noise (testing / plain baselines).
    #[serde(default)]
    pub noiseless: bool,
    /// Budget threshold `t`; defaults to the maximum record budget.
    #[serde(default)]
    pub threshold: Option<f64>,
}

impl Default for RegressionHyper {
    fn default() -> Self {
        RegressionHyper {
            clip_norm: 1.0,
            epochs: 80,
            rate: 0.1,
            seed: 0,
            noiseless: false,
            threshold: None,
        }
    }
}

/// Train a linear model (with intercept) under per-record budgets.
/// `ids` ties sampling decisions to example identity; defaults to row
/// positions.
pub fn dp_regression(
    x: &[Vec<f64>],
    y: &[f64],
    budgets: &[f64],
    strategy: RegressionStrategy,
    hyper: &RegressionHyper,
    ids: Option<&[u64]>,
) -> Result<MechanismResult> {
    let n = x.len();
    if n == 0 {
        return Err(Error::argument("regression needs at least one example"));
    }
    if y.len() != n || budgets.len() != n {
        return Err(Error::argument(format!(
            "row mismatch: {} features, {} targets, {} budgets",
            n,
            y.len(),
            budgets.len()
        )));
    }
    let d = x[0].len();
    if x.iter().any(|row| row.len() != d) {
        return Err(Error::argument("feature rows must share one width"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) || y.iter().any(|v| !v.is_finite()) {
        return Err(Error::argument("features and targets must be finite"));
    }
    if budgets.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
        return Err(Error::argument("budgets must be positive"));
    }
    if !(hyper.clip_norm.is_finite() && hyper.clip_norm > 0.0 && hyper.rate.is_finite() && hyper.rate > 0.0) {
        return Err(Error::argument("clip_norm and rate must be positive"));
    }
    let default_ids: Vec<u64>;
    let ids = match ids {
        Some(v) => {
            if v.len() != n {
                return Err(Error::argument("ids length must match rows"));
            }
            v
        }
        None => {
            default_ids = (0..n as u64).collect();
            &default_ids
        }
    };

    let threshold = match hyper.threshold {
        Some(t) if t > 0.0 && t.is_finite() => t,
        Some(t) => return Err(Error::argument(format!("threshold must be positive, got {t}"))),
        None => budgets.iter().fold(0.0f64, |a, &b| a.max(b)),
    };
    let t_budget = PrivacyBudget::new(threshold)?;

    // Accumulate in ascending id order so row order cannot matter.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| ids[i]);

    let dim = d + 1; // intercept last
    let mut theta = vec![0.0f64; dim];
    let noise_scale = hyper.clip_norm / threshold;

    for step in 0..hyper.epochs {
        let mut grad_sum = vec![0.0f64; dim];
        for &i in &order {
            let weight = match strategy {
                RegressionStrategy::Weighting => (budgets[i] / threshold).min(1.0),
                RegressionStrategy::Sampling => {
                    let pi = sample_inclusion_probability(
                        PrivacyBudget::new(budgets[i])?,
                        t_budget,
                    )?;
                    let mut rng = rng_from_seed(derive_seed(
                        hyper.seed,
                        "include",
                        (ids[i] << 20) ^ step as u64,
                    ));
                    if rng.random::<f64>() < pi {
                        1.0
                    } else {
                        0.0
                    }
                }
            };
            if weight == 0.0 {
                continue;
            }
            // Residual gradient of 1/2 (theta.x - y)^2.
            let mut pred = theta[d];
            for (j, &v) in x[i].iter().enumerate() {
                pred += theta[j] * v;
            }
            let residual = pred - y[i];
            let mut grad: Vec<f64> = x[i].iter().map(|&v| residual * v).collect();
            grad.push(residual);
            let norm: f64 = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
            let scale = if norm > hyper.clip_norm {
                hyper.clip_norm / norm
            } else {
                1.0
            };
            for (gs, g) in grad_sum.iter_mut().zip(&grad) {
                *gs += weight * scale * g;
            }
        }
        if !hyper.noiseless {
            let mut rng = rng_from_seed(derive_seed(hyper.seed, "noise", step as u64));
            for gs in grad_sum.iter_mut() {
                *gs += sample_laplace(&mut rng, noise_scale);
            }
        }
        for (t, gs) in theta.iter_mut().zip(&grad_sum) {
            *t -= hyper.rate * gs / n as f64;
        }
    }

    Ok(MechanismResult {
        value: MechanismValue::Coefficients(theta),
        mechanism: format!("dp_regression+{}", strategy.name()),
        seed: hyper.seed,
        epsilon_spent: budgets.to_vec(),
    })
}

/// Predict with coefficients produced by [`dp_regression`] or [`ols`].
pub fn predict_linear(coefficients: &[f64], x: &[Vec<f64>]) -> Vec<f64> {
    let d = coefficients.len() - 1;
    x.iter()
        .map(|row| {
            let mut pred = coefficients[d];
            for (j, &v) in row.iter().take(d).enumerate() {
                pred += coefficients[j] * v;
            }
            pred
        })
        .collect()
}

/// Ordinary least squares with intercept, by normal equations with partial
/// pivoting. The non-private baseline.
pub fn ols(x: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    ridge(x, y, 0.0)
}

/// Least squares with an L2 penalty on the non-intercept coefficients.
/// A tiny `lambda` keeps exactly collinear feature blocks solvable.
#[allow(clippy::needless_range_loop)]
pub fn ridge(x: &[Vec<f64>], y: &[f64], lambda: f64) -> Result<Vec<f64>> {
    let n = x.len();
    if n == 0 || y.len() != n {
        return Err(Error::argument("ols needs matching nonempty inputs"));
    }
    let d = x[0].len();
    let dim = d + 1;
    // Gram matrix of [X | 1].
    let mut a = vec![vec![0.0f64; dim]; dim];
    let mut b = vec![0.0f64; dim];
    let augmented = |row: &Vec<f64>, j: usize| if j < d { row[j] } else { 1.0 };
    for (i, row) in x.iter().enumerate() {
        for p in 0..dim {
            b[p] += augmented(row, p) * y[i];
            for q in 0..dim {
                a[p][q] += augmented(row, p) * augmented(row, q);
            }
        }
    }
    for (j, row) in a.iter_mut().enumerate().take(d) {
        row[j] += lambda * n as f64;
    }
    solve_linear(&mut a, &mut b)?;
    Ok(b)
}

#[allow(clippy::needless_range_loop)]
fn solve_linear(a: &mut [Vec<f64>], b: &mut [f64]) -> Result<()> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).expect("finite"))
            .expect("nonempty");
        if a[pivot][col].abs() < 1e-12 {
            return Err(Error::argument("singular design matrix"));
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    for i in 0..n {
        b[i] /= a[i][i];
    }
    Ok(())
}

/// Coefficient of determination, unclamped.
pub fn r_squared(y_true: &[f64], y_pred: &[f64]) -> f64 {
    let n = y_true.len() as f64;
    let mean = y_true.iter().sum::<f64>() / n;
    let ss_tot: f64 = y_true.iter().map(|v| (v - mean) * (v - mean)).sum();
    let ss_res: f64 = y_true
        .iter()
        .zip(y_pred)
        .map(|(t, p)| (t - p) * (t - p))
        .sum();
    if ss_tot <= 0.0 {
        return 0.0;
    }
    1.0 - ss_res / ss_tot
}
