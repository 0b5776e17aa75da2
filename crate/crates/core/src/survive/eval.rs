use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::coding::SurvivalSample;
use super::cox::{fit_cox, CoxConfig};
use super::grid::{make_grid, DurationGrid};
use super::lh::{lh_train, LhConfig};
use super::metrics::{concordance_td, integrated_brier};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::featprep::{DesignTransform, Projection};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurvivalEvalConfig {
    pub runs: usize,
    pub train_fraction: f64,
    pub dev_fraction: f64,
    pub grid_size: usize,
    pub pcs: Vec<usize>,
    /// Components used for the reported Cox coefficient table.
    pub cox_table_pcs: usize,
    pub lh: LhConfig,
    pub cox: CoxConfig,
}

impl Default for SurvivalEvalConfig {
    fn default() -> Self {
        SurvivalEvalConfig {
            runs: 10,
            train_fraction: 0.8,
            dev_fraction: 0.1,
            grid_size: 100,
            pcs: vec![5, 10],
            cox_table_pcs: 10,
            lh: LhConfig::default(),
            cox: CoxConfig::default(),
        }
    }
}

/// Sample indices of a split in which no community appears in two sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommunitySplit {
    pub train: Vec<usize>,
    pub dev: Vec<usize>,
    pub test: Vec<usize>,
}

/// Shuffles the communities and assigns them to train/dev/test by count.
/// With at least three communities every set receives one.
pub fn community_split(
    samples: &[SurvivalSample],
    train_fraction: f64,
    dev_fraction: f64,
    seed_value: u64,
) -> Result<CommunitySplit> {
    let mut communities: Vec<&str> = samples
        .iter()
        .map(|s| s.community.as_str())
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let n = communities.len();
    if n < 3 {
        return Err(Error::InvalidInput(format!(
            "need at least 3 communities to split, found {n}"
        )));
    }
    communities.shuffle(&mut seed::rng(seed_value));
    let n_train = ((n as f64 * train_fraction).round() as usize).clamp(1, n - 2);
    let n_dev = ((n as f64 * dev_fraction).round() as usize).clamp(1, n - n_train - 1);
    let train: BTreeSet<&str> = communities[..n_train].iter().copied().collect();
    let dev: BTreeSet<&str> = communities[n_train..n_train + n_dev].iter().copied().collect();
    let mut split = CommunitySplit {
        train: vec![],
        dev: vec![],
        test: vec![],
    };
    for (i, s) in samples.iter().enumerate() {
        let c = s.community.as_str();
        if train.contains(c) {
            split.train.push(i);
        } else if dev.contains(c) {
            split.dev.push(i);
        } else {
            split.test.push(i);
        }
    }
    Ok(split)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalScore {
    pub model: String,
    pub concordance: f64,
    pub ibs: f64,
    /// Runs in which both metrics were defined.
    pub runs: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table3 {
    pub rows: Vec<SurvivalScore>,
}

fn fmt_metric(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        "NA".into()
    }
}

impl Table3 {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("model\tconcordance\tIBS\truns\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                r.model,
                fmt_metric(r.concordance),
                fmt_metric(r.ibs),
                r.runs
            ));
        }
        s
    }

    pub fn get(&self, model: &str) -> Option<&SurvivalScore> {
        self.rows.iter().find(|r| r.model == model)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoxRow {
    pub variable: String,
    pub coef: f64,
    pub exp_coef: f64,
    pub se: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table4 {
    pub rows: Vec<CoxRow>,
}

impl Table4 {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("variable\tcoef\texp_coef\tse\n");
        for r in &self.rows {
            s.push_str(&format!(
                "{}\t{:.6}\t{:.6}\t{}\n",
                r.variable,
                r.coef,
                r.exp_coef,
                fmt_metric(r.se)
            ));
        }
        s
    }
}

fn rows_of(samples: &[SurvivalSample], idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| samples[i].x.clone()).collect()
}

fn train_grid(samples: &[SurvivalSample], train: &[usize], k: usize) -> Result<DurationGrid> {
    let events: Vec<f64> = train
        .iter()
        .filter(|&&i| samples[i].event)
        .map(|&i| samples[i].duration as f64)
        .collect();
    let max = samples.iter().map(|s| s.duration).max().unwrap_or(0) as f64;
    Ok(make_grid(&events, k)?.covering(max))
}

struct Scored {
    concordance: f64,
    ibs: f64,
}

fn score(
    curves: &[Vec<f64>],
    samples: &[SurvivalSample],
    test: &[usize],
    grid: &DurationGrid,
) -> Result<Scored> {
    let idx: Vec<usize> = test.iter().map(|&i| grid.assign(samples[i].duration as f64)).collect();
    let events: Vec<bool> = test.iter().map(|&i| samples[i].event).collect();
    let durations: Vec<f64> = idx.iter().map(|&k| grid.cuts[k]).collect();
    let concordance = match concordance_td(curves, &idx, &events) {
        Ok(c) => c,
        Err(Error::Undefined(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    let ibs = match integrated_brier(curves, &durations, &events, &grid.cuts) {
        Ok(r) => r.ibs,
        Err(Error::Undefined(_)) => f64::NAN,
        Err(e) => return Err(e),
    };
    Ok(Scored { concordance, ibs })
}

fn model_list(pcs: &[usize]) -> Vec<(String, Option<(Projection, bool)>)> {
    let mut projections: Vec<Projection> = pcs.iter().map(|&k| Projection::Pcs(k)).collect();
    projections.push(Projection::Raw);
    let mut out = vec![("Random baseline".to_string(), None)];
    for p in &projections {
        out.push((format!("Cox ({})", p.label()), Some((*p, false))));
    }
    for p in &projections {
        out.push((format!("LH ({})", p.label()), Some((*p, true))));
    }
    out
}

fn run_once(
    samples: &[SurvivalSample],
    names: &[&str],
    cfg: &SurvivalEvalConfig,
    run_seed: u64,
) -> Result<Vec<Scored>> {
    let split = community_split(samples, cfg.train_fraction, cfg.dev_fraction, derive_seed!(run_seed, "split"))?;
    let grid = train_grid(samples, &split.train, cfg.grid_size)?;
    let g = grid.len();
    let xtr = rows_of(samples, &split.train);
    let xte = rows_of(samples, &split.test);
    let tau: Vec<usize> = split.train.iter().map(|&i| grid.assign(samples[i].duration as f64)).collect();
    let ev: Vec<bool> = split.train.iter().map(|&i| samples[i].event).collect();
    let mut out = Vec::new();
    for (k, (_, kind)) in model_list(&cfg.pcs).into_iter().enumerate() {
        let curves: Vec<Vec<f64>> = match kind {
            None => vec![vec![0.5; g]; xte.len()],
            Some((projection, neural)) => {
                let tf = DesignTransform::fit(&xtr, names, projection)?;
                let (a, b) = (tf.transform(&xtr), tf.transform(&xte));
                if neural {
                    lh_train(&a, &tau, &ev, g, &cfg.lh, derive_seed!(run_seed, "lh", k))?.predict_survival(&b)?
                } else {
                    let times: Vec<f64> = tau.iter().map(|&t| t as f64).collect();
                    let m = fit_cox(&a, &times, &ev, &cfg.cox)?;
                    let grid_idx: Vec<f64> = (0..g).map(|t| t as f64).collect();
                    b.iter().map(|r| m.survival(r, &grid_idx)).collect()
                }
            }
        };
        out.push(score(&curves, samples, &split.test, &grid)?);
    }
    Ok(out)
}

/// Repeated community-disjoint evaluation of the constant-survival
/// baseline, Cox and Logistic Hazard models on whitened PCs and on
/// standardized features. `samples[i].x` holds log-transformed features.
pub fn evaluate_survival_models(
    samples: &[SurvivalSample],
    names: &[&str],
    cfg: &SurvivalEvalConfig,
    seed_value: u64,
) -> Result<Table3> {
    let runs: Vec<Result<Vec<Scored>>> = (0..cfg.runs)
        .into_par_iter()
        .map(|r| run_once(samples, names, cfg, derive_seed!(seed_value, "survive", r)))
        .collect();
    let models = model_list(&cfg.pcs);
    let mut acc = vec![(0.0, 0.0, 0usize); models.len()];
    for run in runs {
        for (a, s) in acc.iter_mut().zip(run?) {
            if s.concordance.is_finite() && s.ibs.is_finite() {
                a.0 += s.concordance;
                a.1 += s.ibs;
                a.2 += 1;
            }
        }
    }
    Ok(Table3 {
        rows: models
            .into_iter()
            .zip(acc)
            .map(|((model, _), (c, b, n))| SurvivalScore {
                model,
                concordance: if n > 0 { c / n as f64 } else { f64::NAN },
                ibs: if n > 0 { b / n as f64 } else { f64::NAN },
                runs: n,
            })
            .collect(),
    })
}

/// Cox coefficients on the first `cfg.cox_table_pcs` whitened components,
/// fitted on every sample.
pub fn cox_table(samples: &[SurvivalSample], names: &[&str], cfg: &SurvivalEvalConfig) -> Result<Table4> {
    let all: Vec<usize> = (0..samples.len()).collect();
    let grid = train_grid(samples, &all, cfg.grid_size)?;
    let x = rows_of(samples, &all);
    let tf = DesignTransform::fit(&x, names, Projection::Pcs(cfg.cox_table_pcs))?;
    let z = tf.transform(&x);
    let times: Vec<f64> = samples.iter().map(|s| grid.assign(s.duration as f64) as f64).collect();
    let ev: Vec<bool> = samples.iter().map(|s| s.event).collect();
    let m = fit_cox(&z, &times, &ev, &cfg.cox)?;
    Ok(Table4 {
        rows: m
            .coefficients
            .iter()
            .zip(&m.standard_errors)
            .enumerate()
            .map(|(j, (&c, &se))| CoxRow {
                variable: format!("PC{}", j + 1),
                coef: c,
                exp_coef: c.exp(),
                se,
            })
            .collect(),
    })
}

/// Assigns every sample's grid index using event durations of all samples.
pub fn assign_duration_indices(samples: &mut [SurvivalSample], k: usize) -> Result<DurationGrid> {
    let all: Vec<usize> = (0..samples.len()).collect();
    let grid = train_grid(samples, &all, k)?;
    for s in samples.iter_mut() {
        s.duration_index = grid.assign(s.duration as f64);
    }
    Ok(grid)
}
