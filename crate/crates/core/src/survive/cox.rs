use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{inverse_spd, pinv_psd, solve_psd_pinv};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Ties {
    #[default]
    Efron,
    Breslow,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CoxConfig {
    pub ties: Ties,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CoxConfig {
    fn default() -> Self {
        CoxConfig {
            ties: Ties::Efron,
            tol: 1e-8,
            max_iter: 100,
        }
    }
}

/// Proportional-hazards fit with covariates centered at their means and a
/// Breslow baseline hazard.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxModel {
    pub coefficients: Vec<f64>,
    /// NaN for covariates excluded because they were constant.
    pub standard_errors: Vec<f64>,
    pub means: Vec<f64>,
    /// Distinct event times with the baseline hazard increment at each.
    pub baseline_times: Vec<f64>,
    pub baseline_hazard: Vec<f64>,
    pub log_likelihood_trace: Vec<f64>,
    pub iterations: usize,
}

impl CoxModel {
    pub fn risk(&self, x: &[f64]) -> f64 {
        self.coefficients
            .iter()
            .zip(x.iter().zip(&self.means))
            .map(|(b, (v, m))| b * (v - m))
            .sum::<f64>()
            .exp()
    }

    /// Cumulative baseline hazard at `t` (right-continuous).
    pub fn cumulative_baseline(&self, t: f64) -> f64 {
        let k = self.baseline_times.partition_point(|&s| s <= t);
        self.baseline_hazard[..k].iter().sum()
    }

    /// S(t | x) at each of `times`.
    pub fn survival(&self, x: &[f64], times: &[f64]) -> Vec<f64> {
        let r = self.risk(x);
        times
            .iter()
            .map(|&t| (-self.cumulative_baseline(t) * r).exp())
            .collect()
    }
}

/// Event-time groups in ascending order: (time, event members, risk-set
/// members with time >= t).
struct RiskGroups {
    /// Sample indices sorted by time descending.
    order: Vec<usize>,
    /// For each distinct event time, ascending: (time, start of its block in
    /// `order`, end of its block, risk-set end in `order`).
    groups: Vec<(f64, usize, usize)>,
}

fn risk_groups(times: &[f64]) -> RiskGroups {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[b].total_cmp(&times[a]));
    let mut groups = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let t = times[order[i]];
        let start = i;
        while i < order.len() && times[order[i]] == t {
            i += 1;
        }
        groups.push((t, start, i));
    }
    RiskGroups { order, groups }
}

struct Evaluation {
    ll: f64,
    grad: Vec<f64>,
    info: Vec<Vec<f64>>,
}

fn evaluate(
    x: &[Vec<f64>],
    events: &[bool],
    rg: &RiskGroups,
    beta: &[f64],
    ties: Ties,
    derivatives: bool,
) -> Evaluation {
    let p = beta.len();
    let eta: Vec<f64> = x
        .iter()
        .map(|r| r.iter().zip(beta).map(|(a, b)| a * b).sum())
        .collect();
    let mut ll = 0.0;
    let mut grad = vec![0.0; p];
    let mut info = vec![vec![0.0; p]; p];
    // Running risk-set sums as the time threshold decreases.
    let mut s0 = 0.0;
    let mut s1 = vec![0.0; p];
    let mut s2 = vec![vec![0.0; p]; p];
    for &(_, start, end) in &rg.groups {
        let (mut d0, mut d1, mut d2) = (0.0, vec![0.0; p], vec![vec![0.0; p]; p]);
        let mut d = 0usize;
        for &i in &rg.order[start..end] {
            let w = eta[i].exp();
            s0 += w;
            if derivatives {
                for a in 0..p {
                    s1[a] += w * x[i][a];
                    for b in 0..=a {
                        s2[a][b] += w * x[i][a] * x[i][b];
                    }
                }
            }
            if events[i] {
                d += 1;
                ll += eta[i];
                d0 += w;
                if derivatives {
                    for a in 0..p {
                        grad[a] += x[i][a];
                        d1[a] += w * x[i][a];
                        for b in 0..=a {
                            d2[a][b] += w * x[i][a] * x[i][b];
                        }
                    }
                }
            }
        }
        for l in 0..d {
            let f = match ties {
                Ties::Efron => l as f64 / d as f64,
                Ties::Breslow => 0.0,
            };
            let phi = s0 - f * d0;
            ll -= phi.ln();
            if derivatives {
                let m1: Vec<f64> = (0..p).map(|a| s1[a] - f * d1[a]).collect();
                for a in 0..p {
                    grad[a] -= m1[a] / phi;
                    for b in 0..=a {
                        let m2 = s2[a][b] - f * d2[a][b];
                        info[a][b] += m2 / phi - m1[a] * m1[b] / (phi * phi);
                    }
                }
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            info[b][a] = info[a][b];
        }
    }
    Evaluation { ll, grad, info }
}

/// Partial log-likelihood of `beta` for centered covariates.
pub fn partial_log_likelihood(
    x_centered: &[Vec<f64>],
    times: &[f64],
    events: &[bool],
    beta: &[f64],
    ties: Ties,
) -> f64 {
    let rg = risk_groups(times);
    evaluate(x_centered, events, &rg, beta, ties, false).ll
}

const PINV_TOL: f64 = 1e-12;

fn well_conditioned(info: &DMatrix<f64>) -> bool {
    match info.clone().cholesky() {
        Some(ch) => {
            let d: Vec<f64> = ch.l_dirty().diagonal().iter().map(|v| v * v).collect();
            let top = d.iter().fold(0.0f64, |m, &v| m.max(v));
            d.iter().all(|&v| v > PINV_TOL * top)
        }
        None => false,
    }
}

/// Newton step. Collinear covariates leave the likelihood flat along some
/// directions; the step is taken with minimum norm there.
fn newton_solve(info: &DMatrix<f64>, grad: &DVector<f64>) -> Result<DVector<f64>> {
    if well_conditioned(info) {
        if let Some(ch) = info.clone().cholesky() {
            return Ok(ch.solve(grad));
        }
    }
    solve_psd_pinv(info, grad, PINV_TOL)
}

/// Newton-Raphson maximization of the partial likelihood with step halving.
/// Constant covariates are excluded and keep a zero coefficient.
pub fn fit_cox(x: &[Vec<f64>], times: &[f64], events: &[bool], cfg: &CoxConfig) -> Result<CoxModel> {
    let n = x.len();
    if n == 0 || times.len() != n || events.len() != n {
        return Err(Error::InvalidInput("cox inputs differ in length or are empty".into()));
    }
    if !events.iter().any(|&e| e) {
        return Err(Error::InvalidInput("cox fit needs at least one event".into()));
    }
    let p = x[0].len();
    if x.iter().any(|r| r.len() != p) {
        return Err(Error::InvalidInput("ragged covariate rows".into()));
    }
    let means: Vec<f64> = (0..p)
        .map(|j| x.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let active: Vec<usize> = (0..p)
        .filter(|&j| x.iter().any(|r| (r[j] - means[j]).abs() > 1e-12 * means[j].abs().max(1.0)))
        .collect();
    let xc: Vec<Vec<f64>> = x
        .iter()
        .map(|r| active.iter().map(|&j| r[j] - means[j]).collect())
        .collect();
    let q = active.len();
    let rg = risk_groups(times);
    let mut beta = vec![0.0; q];
    let mut cur = evaluate(&xc, events, &rg, &beta, cfg.ties, true);
    let mut trace = vec![cur.ll];
    let mut iterations = 0;
    let mut converged = q == 0;
    while !converged {
        if iterations == cfg.max_iter {
            return Err(Error::NoConvergence(cfg.max_iter));
        }
        iterations += 1;
        let info = DMatrix::from_fn(q, q, |a, b| cur.info[a][b]);
        let grad = DVector::from_column_slice(&cur.grad);
        let step: Vec<f64> = newton_solve(&info, &grad)?
            .iter()
            .copied()
            .collect();
        let decrement: f64 = step.iter().zip(&cur.grad).map(|(a, b)| a * b).sum();
        let mut scale = 1.0;
        let next = loop {
            let cand: Vec<f64> = beta.iter().zip(&step).map(|(b, s)| b + scale * s).collect();
            let e = evaluate(&xc, events, &rg, &cand, cfg.ties, true);
            if e.ll.is_finite() && e.ll >= cur.ll - 1e-12 * cur.ll.abs().max(1.0) {
                beta = cand;
                break e;
            }
            scale *= 0.5;
            if scale < 1e-10 {
                return Err(Error::Diverged("cox step halving exhausted".into()));
            }
        };
        cur = next;
        trace.push(cur.ll);
        converged = decrement.abs() < cfg.tol;
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Diverged("non-finite cox coefficient".into()));
    }
    let info = DMatrix::from_fn(q, q, |a, b| cur.info[a][b]);
    let cov = if well_conditioned(&info) {
        inverse_spd(&info)?
    } else {
        pinv_psd(&info, PINV_TOL)?
    };

    let mut coefficients = vec![0.0; p];
    let mut standard_errors = vec![f64::NAN; p];
    for (k, &j) in active.iter().enumerate() {
        coefficients[j] = beta[k];
        standard_errors[j] = cov[(k, k)].max(0.0).sqrt();
    }

    // Breslow baseline: deaths over risk-weighted risk set at each event time.
    let risk: Vec<f64> = xc
        .iter()
        .map(|r| r.iter().zip(&beta).map(|(a, b)| a * b).sum::<f64>().exp())
        .collect();
    let mut baseline_times = Vec::new();
    let mut baseline_hazard = Vec::new();
    let mut s0 = 0.0;
    for &(t, start, end) in &rg.groups {
        let mut d = 0usize;
        for &i in &rg.order[start..end] {
            s0 += risk[i];
            d += events[i] as usize;
        }
        if d > 0 {
            baseline_times.push(t);
            baseline_hazard.push(d as f64 / s0);
        }
    }
    baseline_times.reverse();
    baseline_hazard.reverse();
    Ok(CoxModel {
        coefficients,
        standard_errors,
        means,
        baseline_times,
        baseline_hazard,
        log_likelihood_trace: trace,
        iterations,
    })
}
