//! Dissemination of lexicon words across communities and the monthly
//! levelling series.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::MonthlyUsageTable;
use crate::error::{Error, Result};
use crate::graph::SnapshotGraph;
use crate::month::MonthKey;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DisseminationRecord {
    pub word: String,
    pub month: MonthKey,
    /// Communities using the word this month.
    pub communities: u32,
    /// `communities` over the communities retained this month.
    pub fraction: f64,
}

/// One record per (word, month) with at least one use, ordered by month
/// then word.
pub fn dissemination(tables: &[MonthlyUsageTable]) -> Vec<DisseminationRecord> {
    let mut active: BTreeMap<MonthKey, u32> = BTreeMap::new();
    let mut users: BTreeMap<(MonthKey, &str), u32> = BTreeMap::new();
    for t in tables {
        *active.entry(t.month).or_default() += 1;
        for (w, &c) in &t.word_counts {
            if c > 0 {
                *users.entry((t.month, w.as_str())).or_default() += 1;
            }
        }
    }
    users
        .into_iter()
        .map(|((month, word), n)| DisseminationRecord {
            word: word.to_string(),
            month,
            communities: n,
            fraction: n as f64 / active[&month] as f64,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PowerLawFit {
    pub alpha: f64,
    pub x_min: f64,
    /// Samples at or above `x_min` used in the fit.
    pub n: usize,
}

/// Continuous maximum-likelihood exponent `1 + n / sum(ln(x / x_min))`.
/// `x_min` defaults to the smallest positive sample.
pub fn fit_powerlaw_alpha(samples: &[f64], x_min: Option<f64>) -> Result<PowerLawFit> {
    if samples.is_empty() {
        return Err(Error::InvalidInput("power-law fit needs samples".into()));
    }
    let x_min = match x_min {
        Some(m) => m,
        None => samples
            .iter()
            .copied()
            .filter(|&v| v > 0.0)
            .min_by(f64::total_cmp)
            .ok_or_else(|| Error::InvalidInput("no positive samples".into()))?,
    };
    if !(x_min > 0.0) {
        return Err(Error::InvalidInput("x_min must be positive".into()));
    }
    if let Some(v) = samples.iter().find(|&&v| !(v >= x_min)) {
        return Err(Error::InvalidInput(format!("sample {v} below x_min {x_min}")));
    }
    let s: f64 = samples.iter().map(|v| (v / x_min).ln()).sum();
    if s <= 0.0 {
        return Err(Error::Undefined("every sample equals x_min"));
    }
    Ok(PowerLawFit {
        alpha: 1.0 + samples.len() as f64 / s,
        x_min,
        n: samples.len(),
    })
}

/// Fits the tail above each distinct candidate `x_min` and keeps the one
/// whose fitted CDF is closest to the empirical tail in KS distance.
pub fn fit_powerlaw_ks(samples: &[f64], min_tail: usize) -> Result<PowerLawFit> {
    let mut sorted: Vec<f64> = samples.iter().copied().filter(|&v| v > 0.0).collect();
    sorted.sort_by(f64::total_cmp);
    let mut candidates = sorted.clone();
    candidates.dedup();
    let mut best: Option<(f64, PowerLawFit)> = None;
    for &xm in &candidates {
        let start = sorted.partition_point(|&v| v < xm);
        let tail = &sorted[start..];
        if tail.len() < min_tail.max(2) {
            break;
        }
        let Ok(fit) = fit_powerlaw_alpha(tail, Some(xm)) else {
            continue;
        };
        let n = tail.len() as f64;
        let ks = tail
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let model = 1.0 - (v / xm).powf(1.0 - fit.alpha);
                let hi = (i + 1) as f64 / n;
                let lo = i as f64 / n;
                (model - hi).abs().max((model - lo).abs())
            })
            .fold(0.0, f64::max);
        if best.as_ref().is_none_or(|(d, _)| ks < *d) {
            best = Some((ks, fit));
        }
    }
    best.map(|(_, f)| f)
        .ok_or(Error::Undefined("no x_min candidate leaves a usable tail"))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevellingConfig {
    /// Words above this dissemination fraction count as widespread. A word
    /// used by a single community is niche, never widespread.
    pub widespread_threshold: f64,
    /// Months with fewer dissemination samples report no exponent.
    pub min_alpha_samples: usize,
    pub ks_x_min: bool,
}

impl Default for LevellingConfig {
    fn default() -> Self {
        LevellingConfig {
            widespread_threshold: 0.60,
            min_alpha_samples: 10,
            ks_x_min: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevellingRow {
    pub month: MonthKey,
    pub mean_inter_degree: Option<f64>,
    pub alpha: Option<f64>,
    pub widespread_count: usize,
    pub niche_count: usize,
    pub n_words: usize,
}

pub fn mean_degree(g: &SnapshotGraph) -> Option<f64> {
    (g.n_nodes() > 0).then(|| 2.0 * g.n_edges() as f64 / g.n_nodes() as f64)
}

/// One row per month present in either input, in month order.
pub fn levelling_report(
    inter_graphs: &BTreeMap<MonthKey, SnapshotGraph>,
    records: &[DisseminationRecord],
    cfg: &LevellingConfig,
) -> Vec<LevellingRow> {
    let mut by_month: BTreeMap<MonthKey, Vec<&DisseminationRecord>> = BTreeMap::new();
    for m in inter_graphs.keys() {
        by_month.entry(*m).or_default();
    }
    for r in records {
        by_month.entry(r.month).or_default().push(r);
    }
    let months: Vec<(MonthKey, Vec<&DisseminationRecord>)> = by_month.into_iter().collect();
    months
        .into_par_iter()
        .map(|(month, recs)| {
            let fractions: Vec<f64> = recs.iter().map(|r| r.fraction).collect();
            let alpha = if fractions.len() >= cfg.min_alpha_samples {
                let fit = if cfg.ks_x_min {
                    fit_powerlaw_ks(&fractions, cfg.min_alpha_samples)
                } else {
                    fit_powerlaw_alpha(&fractions, None)
                };
                fit.ok().map(|f| f.alpha)
            } else {
                None
            };
            LevellingRow {
                month,
                mean_inter_degree: inter_graphs.get(&month).and_then(mean_degree),
                alpha,
                widespread_count: recs
                    .iter()
                    .filter(|r| r.fraction > cfg.widespread_threshold && r.communities > 1)
                    .count(),
                niche_count: recs.iter().filter(|r| r.communities == 1).count(),
                n_words: recs.len(),
            }
        })
        .collect()
}

fn opt(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |x| format!("{x:.6}"))
}

pub fn levelling_tsv(rows: &[LevellingRow]) -> String {
    let mut s = String::from("year\tmonth\tmean_inter_degree\talpha\twidespread_count\tniche_count\tn_words\n");
    for r in rows {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
            r.month.year,
            r.month.month,
            opt(r.mean_inter_degree),
            opt(r.alpha),
            r.widespread_count,
            r.niche_count,
            r.n_words
        ));
    }
    s
}

pub fn dissemination_tsv(records: &[DisseminationRecord]) -> String {
    let mut s = String::from("year\tmonth\tword\tcommunities\tfraction\n");
    for r in records {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{:.6}\n",
            r.month.year, r.month.month, r.word, r.communities, r.fraction
        ));
    }
    s
}
