use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::solve_spd;

const MAX_ETA: f64 = 700.0;
const DIVERGENCE_NORM: f64 = 1e6;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct PoissonConfig {
    /// L2 penalty on the non-intercept coefficients.
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for PoissonConfig {
    fn default() -> Self {
        PoissonConfig {
            lambda: 1e-2,
            max_iter: 300,
            tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoissonModel {
    pub intercept: f64,
    pub coefficients: Vec<f64>,
    pub lambda: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Penalized objective after each accepted iteration, starting with the
    /// initial point.
    pub objective_trace: Vec<f64>,
}

impl PoissonModel {
    pub fn linear_predictor(&self, x: &[f64]) -> f64 {
        self.intercept + self.coefficients.iter().zip(x).map(|(b, v)| b * v).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.linear_predictor(x).min(MAX_ETA).exp()
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

fn eta(beta: &[f64], row: &[f64]) -> f64 {
    (beta[0] + beta[1..].iter().zip(row).map(|(b, v)| b * v).sum::<f64>()).min(MAX_ETA)
}

/// `sum(exp(eta) - y * eta) + lambda * |beta without intercept|^2`
pub fn poisson_objective(x: &[Vec<f64>], y: &[f64], beta: &[f64], lambda: f64) -> f64 {
    let nll: f64 = x
        .iter()
        .zip(y)
        .map(|(r, &yi)| {
            let e = eta(beta, r);
            e.exp() - yi * e
        })
        .sum();
    nll + lambda * beta[1..].iter().map(|b| b * b).sum::<f64>()
}

/// Penalized Poisson regression with a log link by iteratively reweighted
/// least squares (Newton's method on the penalized log-likelihood), with
/// step halving so the objective never increases.
pub fn fit_poisson_irls(x: &[Vec<f64>], y: &[f64], cfg: &PoissonConfig) -> Result<PoissonModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput("X and y must be non-empty and equal length".into()));
    }
    if y.iter().any(|&v| v < 0.0 || v.fract() != 0.0) {
        return Err(Error::InvalidInput("Poisson targets must be non-negative integers".into()));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("ragged design matrix".into()));
    }
    let p = d + 1;
    let mean_y = y.iter().sum::<f64>() / y.len() as f64;
    let mut beta = vec![0.0; p];
    beta[0] = mean_y.max(1e-10).ln();
    let mut obj = poisson_objective(x, y, &beta, cfg.lambda);
    let mut trace = vec![obj];
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..cfg.max_iter {
        iterations += 1;
        let mut grad = DVector::<f64>::zeros(p);
        let mut hess = DMatrix::<f64>::zeros(p, p);
        let mut z = vec![1.0; p];
        for (r, &yi) in x.iter().zip(y) {
            z[1..].copy_from_slice(r);
            let mu = eta(&beta, r).exp();
            let resid = mu - yi;
            for i in 0..p {
                grad[i] += resid * z[i];
                let wi = mu * z[i];
                for j in i..p {
                    hess[(i, j)] += wi * z[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                hess[(i, j)] = hess[(j, i)];
            }
        }
        for j in 1..p {
            grad[j] += 2.0 * cfg.lambda * beta[j];
            hess[(j, j)] += 2.0 * cfg.lambda;
        }
        let step = solve_spd(&hess, &grad, 1e-10)?;

        let mut t = 1.0;
        let mut accepted = None;
        for _ in 0..60 {
            let cand: Vec<f64> = beta.iter().zip(step.iter()).map(|(b, s)| b - t * s).collect();
            let cobj = poisson_objective(x, y, &cand, cfg.lambda);
            if cobj.is_finite() && cobj <= obj {
                accepted = Some((cand, cobj));
                break;
            }
            t *= 0.5;
        }
        let Some((cand, cobj)) = accepted else {
            // No descent possible from here: we are at the optimum to
            // working precision.
            converged = true;
            break;
        };
        let max_change = beta
            .iter()
            .zip(&cand)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        beta = cand;
        obj = cobj;
        trace.push(obj);
        if beta.iter().map(|b| b * b).sum::<f64>().sqrt() > DIVERGENCE_NORM {
            return Err(Error::Diverged(format!(
                "coefficient norm exceeded {DIVERGENCE_NORM:e}"
            )));
        }
        if max_change < cfg.tol {
            converged = true;
            break;
        }
    }
    Ok(PoissonModel {
        intercept: beta[0],
        coefficients: beta[1..].to_vec(),
        lambda: cfg.lambda,
        iterations,
        converged,
        objective_trace: trace,
    })
}
