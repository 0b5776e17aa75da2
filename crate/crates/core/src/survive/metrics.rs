use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Product-limit estimate as a right-continuous step function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KaplanMeier {
    /// Distinct times at which the estimate drops (or could drop).
    pub times: Vec<f64>,
    /// Value on `[times[i], times[i+1])`.
    pub survival: Vec<f64>,
}

impl KaplanMeier {
    /// S(t): value at the largest step time `<= t`, 1 before the first.
    pub fn at(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s <= t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }

    /// S(t-): product over step times strictly before `t`.
    pub fn left_limit(&self, t: f64) -> f64 {
        match self.times.partition_point(|&s| s < t) {
            0 => 1.0,
            i => self.survival[i - 1],
        }
    }
}

pub fn kaplan_meier(durations: &[f64], events: &[bool]) -> Result<KaplanMeier> {
    if durations.is_empty() || durations.len() != events.len() {
        return Err(Error::InvalidInput("kaplan_meier needs matching, non-empty inputs".into()));
    }
    let mut order: Vec<usize> = (0..durations.len()).collect();
    order.sort_by(|&a, &b| durations[a].total_cmp(&durations[b]));
    let mut times = Vec::new();
    let mut survival = Vec::new();
    let mut s = 1.0;
    let mut at_risk = durations.len();
    let mut i = 0;
    while i < order.len() {
        let t = durations[order[i]];
        let (mut deaths, mut leaving) = (0usize, 0usize);
        while i < order.len() && durations[order[i]] == t {
            deaths += events[order[i]] as usize;
            leaving += 1;
            i += 1;
        }
        if deaths > 0 {
            s *= 1.0 - deaths as f64 / at_risk as f64;
        }
        times.push(t);
        survival.push(s);
        at_risk -= leaving;
    }
    Ok(KaplanMeier { times, survival })
}

fn check_curves(curves: &[Vec<f64>], durations: usize, events: usize) -> Result<()> {
    if curves.len() != durations || curves.len() != events {
        return Err(Error::InvalidInput("curves, durations and events differ in length".into()));
    }
    Ok(())
}

/// Time-dependent concordance. Over pairs with `T_i < T_j` and an observed
/// event for `i`, counts how often `S(T_i | x_i) < S(T_i | x_j)`, with ties
/// worth one half. `curves[i][t]` is the survival of sample `i` at grid
/// index `t`, and `durations` are grid indices.
pub fn concordance_td(curves: &[Vec<f64>], durations: &[usize], events: &[bool]) -> Result<f64> {
    check_curves(curves, durations.len(), events.len())?;
    // Counted in halves so the reduction is exact and order independent.
    let (halves, pairs) = (0..curves.len())
        .into_par_iter()
        .filter(|&i| events[i])
        .map(|i| {
            let t = durations[i];
            let si = curves[i][t];
            let mut halves = 0u64;
            let mut pairs = 0u64;
            for j in 0..curves.len() {
                if durations[j] > t {
                    pairs += 1;
                    let sj = curves[j][t];
                    if si < sj {
                        halves += 2;
                    } else if si == sj {
                        halves += 1;
                    }
                }
            }
            (halves, pairs)
        })
        .reduce(|| (0, 0), |a, b| (a.0 + b.0, a.1 + b.1));
    if pairs == 0 {
        return Err(Error::Undefined("concordance has no comparable pairs"));
    }
    Ok(halves as f64 / (2 * pairs) as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BrierResult {
    pub ibs: f64,
    /// Brier score at each grid time used.
    pub scores: Vec<f64>,
    /// True when integration stopped early because the censoring
    /// survival reached zero.
    pub truncated: bool,
}

/// Brier score at each grid time with inverse-probability-of-censoring
/// weights, averaged over the grid span by the rectangle rule.
/// `curves[i][k]` is the survival of sample `i` at `times[k]`.
pub fn integrated_brier(
    curves: &[Vec<f64>],
    durations: &[f64],
    events: &[bool],
    times: &[f64],
) -> Result<BrierResult> {
    check_curves(curves, durations.len(), events.len())?;
    if times.is_empty() || curves.iter().any(|c| c.len() < times.len()) {
        return Err(Error::InvalidInput("curves must cover every grid time".into()));
    }
    let censored: Vec<bool> = events.iter().map(|e| !e).collect();
    let g = kaplan_meier(durations, &censored)?;
    let n = curves.len() as f64;
    let mut scores = Vec::with_capacity(times.len());
    let mut truncated = false;
    for (k, &t) in times.iter().enumerate() {
        let gt = g.at(t);
        if gt <= 0.0 {
            truncated = true;
            break;
        }
        let mut sum = 0.0;
        for (i, c) in curves.iter().enumerate() {
            let s = c[k];
            if durations[i] <= t {
                if events[i] {
                    let gi = g.left_limit(durations[i]);
                    if gi > 0.0 {
                        sum += s * s / gi;
                    }
                }
            } else {
                sum += (1.0 - s) * (1.0 - s) / gt;
            }
        }
        scores.push(sum / n);
    }
    if scores.is_empty() {
        return Err(Error::Undefined("censoring survival is zero at the first grid time"));
    }
    let m = scores.len();
    let ibs = if m == 1 {
        scores[0]
    } else {
        let span = times[m - 1] - times[0];
        if span > 0.0 {
            (0..m - 1).map(|k| scores[k] * (times[k + 1] - times[k])).sum::<f64>() / span
        } else {
            scores[0]
        }
    };
    Ok(BrierResult {
        ibs,
        scores,
        truncated,
    })
}
