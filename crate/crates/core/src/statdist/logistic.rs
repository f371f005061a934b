//! Logistic regression by iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Coefficient magnitude that signals (quasi-)separation.
pub const SEPARATION_THRESHOLD: f64 = 15.0;
/// Ridge weight on non-intercept coefficients used after separation.
pub const SEPARATION_RIDGE: f64 = 1e-4;
/// Fitted probabilities are clamped to `[PROB_FLOOR, 1 - PROB_FLOOR]`.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LogisticModel {
    /// Intercept first, then one coefficient per feature column.
    pub coefficients: DVector<f64>,
    pub converged: bool,
    /// Set when separation forced the ridge-penalized refit.
    pub regularized: bool,
    pub iterations: usize,
}

impl LogisticModel {
    pub fn intercept(&self) -> f64 {
        self.coefficients[0]
    }

    pub fn linear_predictor(&self, features: &DMatrix<f64>) -> Vec<f64> {
        let beta = &self.coefficients;
        (0..features.nrows())
            .map(|i| {
                let mut eta = beta[0];
                for j in 0..features.ncols() {
                    eta += beta[j + 1] * features[(i, j)];
                }
                eta
            })
            .collect()
    }

    pub fn predict(&self, features: &DMatrix<f64>) -> Vec<f64> {
        self.linear_predictor(features)
            .into_iter()
            .map(|eta| sigmoid(eta).clamp(PROB_FLOOR, 1.0 - PROB_FLOOR))
            .collect()
    }
}

pub fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

// log(1 + exp(eta)) without overflow
fn softplus(eta: f64) -> f64 {
    if eta > 0.0 {
        eta + (-eta).exp().ln_1p()
    } else {
        eta.exp().ln_1p()
    }
}

fn with_intercept(features: &DMatrix<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(features.nrows(), features.ncols() + 1, |i, j| {
        if j == 0 {
            1.0
        } else {
            features[(i, j - 1)]
        }
    })
}

/// Penalized log-likelihood `sum(y*eta - log(1+e^eta)) - ridge/2 * |beta[1..]|^2`.
pub fn penalized_log_likelihood(design: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, ridge: f64) -> f64 {
    let eta = design * beta;
    let ll: f64 = eta.iter().zip(y.iter()).map(|(&e, &yi)| yi * e - softplus(e)).sum();
    ll - 0.5 * ridge * beta.rows(1, beta.len() - 1).norm_squared()
}

/// Gradient of [`penalized_log_likelihood`]; at an unpenalized optimum these
/// are the score equations `X^T (y - p) = 0`.
pub fn score_residuals(design: &DMatrix<f64>, y: &DVector<f64>, beta: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let eta = design * beta;
    let resid = DVector::from_iterator(y.len(), eta.iter().zip(y.iter()).map(|(&e, &yi)| yi - sigmoid(e)));
    let mut grad = design.tr_mul(&resid);
    for j in 1..grad.len() {
        grad[j] -= ridge * beta[j];
    }
    grad
}

fn newton_step(design: &DMatrix<f64>, beta: &DVector<f64>, grad: &DVector<f64>, ridge: f64) -> DVector<f64> {
    let eta = design * beta;
    let weights: Vec<f64> = eta
        .iter()
        .map(|&e| {
            let p = sigmoid(e);
            p * (1.0 - p)
        })
        .collect();
    let p = design.ncols();
    let mut hessian = DMatrix::<f64>::zeros(p, p);
    for (i, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let row = design.row(i);
        for a in 0..p {
            let wa = w * row[a];
            for b in a..p {
                hessian[(a, b)] += wa * row[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            hessian[(a, b)] = hessian[(b, a)];
        }
        if a > 0 {
            hessian[(a, a)] += ridge;
        }
    }
    if let Some(chol) = hessian.clone().cholesky() {
        return chol.solve(grad);
    }
    // Rank-deficient design: minimum-norm step.
    let svd = hessian.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    svd.solve(grad, cutoff).unwrap_or_else(|_| DVector::zeros(p))
}

struct Irls {
    beta: DVector<f64>,
    converged: bool,
    iterations: usize,
    separated: bool,
}

fn irls(design: &DMatrix<f64>, y: &DVector<f64>, ridge: f64, max_iter: usize, tol: f64) -> Irls {
    let mut beta = DVector::zeros(design.ncols());
    let mut objective = penalized_log_likelihood(design, y, &beta, ridge);
    for it in 0..max_iter {
        let grad = score_residuals(design, y, &beta, ridge);
        if grad.amax() < tol {
            return Irls { beta, converged: true, iterations: it, separated: false };
        }
        let mut step = newton_step(design, &beta, &grad, ridge);
        let mut candidate = &beta + &step;
        let mut value = penalized_log_likelihood(design, y, &candidate, ridge);
        let mut halvings = 0;
        while !(value >= objective - 1e-12 * objective.abs()) && halvings < 40 {
            step *= 0.5;
            candidate = &beta + &step;
            value = penalized_log_likelihood(design, y, &candidate, ridge);
            halvings += 1;
        }
        beta = candidate;
        objective = value;
        if ridge == 0.0 && beta.iter().any(|b| b.abs() > SEPARATION_THRESHOLD) {
            return Irls { beta, converged: false, iterations: it + 1, separated: true };
        }
    }
    let converged = score_residuals(design, y, &beta, ridge).amax() < tol;
    Irls { beta, converged, iterations: max_iter, separated: false }
}

/// Fits `P(label) = sigmoid(b0 + features * b)`.
///
/// `converged` is set once the largest absolute score residual drops below
/// `tol`. If any coefficient exceeds [`SEPARATION_THRESHOLD`] in magnitude the
/// data are treated as separated and the model is refit with a
/// [`SEPARATION_RIDGE`] penalty on the non-intercept coefficients.
pub fn fit_logistic(features: &DMatrix<f64>, labels: &[bool], max_iter: usize, tol: f64) -> Result<LogisticModel> {
    if features.nrows() != labels.len() {
        return Err(Error::dim(format!(
            "{} feature rows for {} labels",
            features.nrows(),
            labels.len()
        )));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(Error::Logistic("labels contain a single class".into()));
    }
    if features.iter().any(|v| !v.is_finite()) {
        return Err(Error::Logistic("non-finite feature value".into()));
    }
    let design = with_intercept(features);
    let y = DVector::from_iterator(labels.len(), labels.iter().map(|&l| if l { 1.0 } else { 0.0 }));
    let plain = irls(&design, &y, 0.0, max_iter, tol);
    if !plain.separated {
        return Ok(LogisticModel {
            coefficients: plain.beta,
            converged: plain.converged,
            regularized: false,
            iterations: plain.iterations,
        });
    }
    let ridged = irls(&design, &y, SEPARATION_RIDGE, max_iter, tol);
    Ok(LogisticModel {
        coefficients: ridged.beta,
        converged: ridged.converged,
        regularized: true,
        iterations: plain.iterations + ridged.iterations,
    })
}
