use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::MonthlyUsageTable;
use crate::month::MonthKey;

/// Which months a word's feature vector is averaged over.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureAveraging {
    /// Months in which the word was used.
    #[default]
    ActiveMonths,
    /// Every month from first to last use.
    CalendarSpan,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CodingConfig {
    pub min_duration: u32,
    /// Words last used within this many final months are censored.
    pub buffer_months: u32,
    /// Communities must span more than this many months.
    pub min_community_lifespan: u32,
    pub averaging: FeatureAveraging,
}

impl Default for CodingConfig {
    fn default() -> Self {
        CodingConfig {
            min_duration: 3,
            buffer_months: 3,
            min_community_lifespan: 6,
            averaging: FeatureAveraging::ActiveMonths,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurvivalSample {
    pub word: String,
    pub community: String,
    pub x: Vec<f64>,
    pub duration: u32,
    /// True when the word's death was observed.
    pub event: bool,
    pub duration_index: usize,
}

/// (community, word) -> months with at least one use.
pub type WordTimelines = BTreeMap<(String, String), BTreeSet<MonthKey>>;

pub fn word_timelines(tables: &[MonthlyUsageTable]) -> WordTimelines {
    let mut out = WordTimelines::new();
    for t in tables {
        for (w, &c) in &t.word_counts {
            if c > 0 {
                out.entry((t.community.clone(), w.clone()))
                    .or_default()
                    .insert(t.month);
            }
        }
    }
    out
}

pub fn community_months(tables: &[MonthlyUsageTable]) -> BTreeMap<String, BTreeSet<MonthKey>> {
    let mut out: BTreeMap<String, BTreeSet<MonthKey>> = BTreeMap::new();
    for t in tables {
        out.entry(t.community.clone()).or_default().insert(t.month);
    }
    out
}

/// Calendar span in months, inclusive.
pub fn lifespan(months: &BTreeSet<MonthKey>) -> u32 {
    match (months.first(), months.last()) {
        (Some(a), Some(b)) => (b.ordinal() - a.ordinal() + 1) as u32,
        _ => 0,
    }
}

/// Duration and event flag for one timeline, or `None` when it is too
/// short or empty.
pub fn code_timeline(
    active: &BTreeSet<MonthKey>,
    data_end: MonthKey,
    cfg: &CodingConfig,
) -> Option<(u32, bool)> {
    let last = *active.last()?;
    let duration = active.len() as u32;
    if duration < cfg.min_duration {
        return None;
    }
    let censored = data_end.ordinal() - last.ordinal() < cfg.buffer_months as i64;
    Some((duration, !censored))
}

/// Codes every (community, word) timeline of a sufficiently long-lived
/// community. `features` maps (community, month) to a feature vector;
/// timelines without any usable feature month are skipped.
pub fn code_survival(
    timelines: &WordTimelines,
    community_months: &BTreeMap<String, BTreeSet<MonthKey>>,
    features: &BTreeMap<(String, MonthKey), Vec<f64>>,
    data_end: MonthKey,
    cfg: &CodingConfig,
) -> Vec<SurvivalSample> {
    let mut out = Vec::new();
    for ((community, word), active) in timelines {
        let long_lived = community_months
            .get(community)
            .is_some_and(|m| lifespan(m) > cfg.min_community_lifespan);
        if !long_lived {
            continue;
        }
        let Some((duration, event)) = code_timeline(active, data_end, cfg) else {
            continue;
        };
        let months: Vec<MonthKey> = match cfg.averaging {
            FeatureAveraging::ActiveMonths => active.iter().copied().collect(),
            FeatureAveraging::CalendarSpan => {
                let (a, b) = (active.first().unwrap(), active.last().unwrap());
                (a.ordinal()..=b.ordinal()).map(MonthKey::from_ordinal).collect()
            }
        };
        let rows: Vec<&Vec<f64>> = months
            .iter()
            .filter_map(|m| features.get(&(community.clone(), *m)))
            .collect();
        let Some(first) = rows.first() else {
            log::debug!("no feature months for {word} in {community}");
            continue;
        };
        let mut x = vec![0.0; first.len()];
        for r in &rows {
            for (a, v) in x.iter_mut().zip(r.iter()) {
                *a += v;
            }
        }
        x.iter_mut().for_each(|a| *a /= rows.len() as f64);
        out.push(SurvivalSample {
            word: word.clone(),
            community: community.clone(),
            x,
            duration,
            event,
            duration_index: 0,
        });
    }
    out
}

pub fn samples_tsv(samples: &[SurvivalSample]) -> String {
    let k = samples.first().map_or(0, |s| s.x.len());
    let mut s = String::from("word\tcommunity\tduration\tevent\tduration_index");
    for j in 1..=k {
        s.push_str(&format!("\tx{j}"));
    }
    s.push('\n');
    for r in samples {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}",
            r.word, r.community, r.duration, r.event as u8, r.duration_index
        ));
        for v in &r.x {
            s.push_str(&format!("\t{v:.10}"));
        }
        s.push('\n');
    }
    s
}
