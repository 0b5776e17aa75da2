//! Seeded synthetic corpus with planted word timelines, used for
//! end-to-end runs and as a ground-truth oracle.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{default_stopwords, CommentRecord};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::month::MonthKey;
use crate::seed;

/// How words are born, spread and die.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdoptionModel {
    /// Monthly probability that a word stops being used in a community.
    pub death_rate: f64,
    /// Probability that each other community adopts a word.
    pub spread_rate: f64,
    /// Monthly probability of a skipped month while a word is alive.
    pub gap_rate: f64,
    /// Uses of a word in each month it is active, inclusive range.
    pub uses_per_month: (u32, u32),
    /// Lexicon words used fewer times than the global frequency cutoff.
    pub rare_words: usize,
    /// Timelines placed exactly as given, in addition to sampled ones.
    pub planted: Vec<PlantedTimeline>,
}

impl Default for AdoptionModel {
    fn default() -> Self {
        AdoptionModel {
            death_rate: 0.15,
            spread_rate: 0.3,
            gap_rate: 0.1,
            uses_per_month: (5, 9),
            rare_words: 3,
            planted: Vec::new(),
        }
    }
}

/// A word used in `community` during the listed month offsets.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlantedTimeline {
    pub word: String,
    pub community: usize,
    pub months: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SynthParams {
    pub communities: usize,
    pub months: usize,
    /// Regular users per community.
    pub users: usize,
    /// Mean comments per active user per month.
    pub comment_rate: f64,
    pub lexicon_size: usize,
    pub adoption_model: AdoptionModel,
    pub start: MonthKey,
    /// Lower bound on cleaned tokens per community-month.
    pub min_cell_tokens: usize,
}

impl Default for SynthParams {
    fn default() -> Self {
        SynthParams {
            communities: 6,
            months: 24,
            users: 40,
            comment_rate: 1.5,
            lexicon_size: 80,
            adoption_model: AdoptionModel::default(),
            start: MonthKey { year: 2008, month: 1 },
            min_cell_tokens: 600,
        }
    }
}

/// Maps with composite keys are stored as `[key, value]` lists in JSON.
mod pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(m: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(m.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}

/// What the pipeline should recover from the generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub data_end: MonthKey,
    /// Lexicon words whose global frequency falls below the cutoff.
    pub dropped_words: BTreeSet<String>,
    /// (community, word) -> months with at least one use.
    #[serde(with = "pairs")]
    pub active_months: BTreeMap<(String, String), BTreeSet<MonthKey>>,
    #[serde(with = "pairs")]
    pub first_introductions: BTreeMap<(String, String), MonthKey>,
    /// Every (community, month) cell, zeros included.
    #[serde(with = "pairs")]
    pub innovation_counts: BTreeMap<(String, MonthKey), u64>,
    /// (community, word) -> (duration, event) for codable timelines.
    #[serde(with = "pairs")]
    pub survival: BTreeMap<(String, String), (u32, bool)>,
    /// Comments by retained authors in each cell.
    #[serde(with = "pairs")]
    pub comments_per_cell: BTreeMap<(String, MonthKey), usize>,
    pub filtered_comments: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticCorpus {
    pub records: Vec<CommentRecord>,
    pub lexicon: Vec<String>,
    pub truth: GroundTruth,
}

impl SyntheticCorpus {
    pub fn comments_jsonl(&self) -> String {
        let mut s = String::new();
        for r in &self.records {
            s.push_str(&r.to_json_line());
            s.push('\n');
        }
        s
    }

    pub fn lexicon_text(&self) -> String {
        let mut s = String::from("# synthetic lexicon\n");
        for w in &self.lexicon {
            s.push_str(w);
            s.push('\n');
        }
        s
    }

    /// Writes `comments.jsonl`, `lexicon.txt` and `truth.json` into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let write = |name: &str, body: String| {
            let p = dir.join(name);
            fs::write(&p, body).map_err(|e| Error::io(&p, e))
        };
        write("comments.jsonl", self.comments_jsonl())?;
        write("lexicon.txt", self.lexicon_text())?;
        write("truth.json", serde_json::to_string_pretty(&self.truth)?)
    }
}

const VOWELS: &[u8] = b"aeiou";
const FILLER_CONSONANTS: &[u8] = b"bdfgklmnprst";
const LEXICON_CONSONANTS: &[u8] = b"bdfgklmnprstqxzvj";
const MARKERS: &[u8] = b"qxzvj";

fn make_word(rng: &mut ChaCha8Rng, consonants: &[u8], len: usize) -> String {
    (0..len)
        .map(|i| {
            let set = if i % 2 == 0 { consonants } else { VOWELS };
            *set.choose(rng).unwrap() as char
        })
        .collect()
}

fn vocabulary(
    rng: &mut ChaCha8Rng,
    n: usize,
    consonants: &[u8],
    accept: impl Fn(&str) -> bool,
    taken: &mut HashSet<String>,
) -> Vec<String> {
    let mut out = Vec::with_capacity(n);
    while out.len() < n {
        let len = rng.random_range(5..=8);
        let w = make_word(rng, consonants, len);
        if accept(&w) && taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

/// Active month offsets of a word adopted at `start`: consecutive months
/// with random gaps until a geometric death or the end of the data.
fn sample_life(rng: &mut ChaCha8Rng, start: usize, months: usize, m: &AdoptionModel, min_active: usize) -> Vec<usize> {
    let mut active = vec![start];
    let mut t = start + 1;
    while t < months {
        if active.len() >= min_active && rng.random::<f64>() < m.death_rate {
            break;
        }
        if active.len() >= min_active && rng.random::<f64>() < m.gap_rate {
            t += 1;
            continue;
        }
        active.push(t);
        t += 1;
    }
    active
}

struct Comment {
    id: String,
    thread: String,
    author: String,
    parent: Option<String>,
    tokens: Vec<String>,
}

/// Generates a corpus in which every community-month cell is retained and
/// the planted word usage survives cleaning unchanged.
pub fn generate_synthetic_corpus(seed_value: u64, params: &SynthParams) -> Result<SyntheticCorpus> {
    let p = params;
    let am = &p.adoption_model;
    if p.communities < 2 || p.months < 2 || p.users == 0 || p.comment_rate <= 0.0 {
        return Err(Error::Config(
            "synthetic corpus needs >=2 communities, >=2 months, users and a positive comment rate".into(),
        ));
    }
    if am.uses_per_month.0 == 0 || am.uses_per_month.0 > am.uses_per_month.1 {
        return Err(Error::Config("uses_per_month must be a positive range".into()));
    }
    for pl in &am.planted {
        if pl.community >= p.communities || pl.months.iter().any(|&m| m >= p.months) || pl.months.is_empty() {
            return Err(Error::Config(format!("planted timeline for {} is out of range", pl.word)));
        }
    }
    let mut rng = seed::rng(derive_seed!(seed_value, "synth"));
    let stop = default_stopwords();
    let mut taken: HashSet<String> = am.planted.iter().map(|t| t.word.clone()).collect();
    let lexicon_words = vocabulary(
        &mut rng,
        p.lexicon_size + am.rare_words,
        LEXICON_CONSONANTS,
        |w| w.bytes().any(|b| MARKERS.contains(&b)) && !stop.contains(w),
        &mut taken,
    );
    let filler = vocabulary(&mut rng, 300, FILLER_CONSONANTS, |w| !stop.contains(w), &mut taken);
    let community_names: Vec<String> = (0..p.communities).map(|c| format!("sub{c:02}")).collect();
    let month_keys: Vec<MonthKey> = (0..p.months).map(|i| p.start.plus(i as i64)).collect();

    // usage[(community, month)][word] = uses
    let mut usage: BTreeMap<(usize, usize), BTreeMap<String, u32>> = BTreeMap::new();
    let uses = |rng: &mut ChaCha8Rng| rng.random_range(am.uses_per_month.0..=am.uses_per_month.1);
    let (regular, rare) = lexicon_words.split_at(p.lexicon_size);
    for w in regular {
        let home = rng.random_range(0..p.communities);
        let birth = rng.random_range(0..p.months - 1);
        // Two active home months guarantee the global cutoff is met.
        for t in sample_life(&mut rng, birth, p.months, am, 2) {
            usage.entry((home, t)).or_default().insert(w.clone(), uses(&mut rng));
        }
        for c in 0..p.communities {
            if c != home && rng.random::<f64>() < am.spread_rate {
                let start = rng.random_range(birth..p.months);
                for t in sample_life(&mut rng, start, p.months, am, 1) {
                    usage.entry((c, t)).or_default().insert(w.clone(), uses(&mut rng));
                }
            }
        }
    }
    for pl in &am.planted {
        for &t in &pl.months {
            usage.entry((pl.community, t)).or_default().insert(pl.word.clone(), uses(&mut rng));
        }
    }
    for w in rare {
        let c = rng.random_range(0..p.communities);
        let t = rng.random_range(0..p.months);
        usage.entry((c, t)).or_default().insert(w.clone(), 9);
    }

    let mut records = Vec::new();
    let mut counter = 0u64;
    let mut next_id = |prefix: &str| {
        counter += 1;
        format!("{prefix}{counter:06}")
    };
    let mut comments_per_cell = BTreeMap::new();
    let mut filtered_comments = 0usize;
    // Threads of the previous month per community, as (thread, comment ids).
    let mut previous: Vec<Vec<(String, Vec<String>)>> = vec![Vec::new(); p.communities];

    for (mi, &month) in month_keys.iter().enumerate() {
        // Bridges link neighbouring communities; wanderers visit a random
        // pair. Each visit is 2 to 5 comments, so higher activity thresholds
        // keep a shrinking subset of the cross-community links.
        let mut visitors: Vec<Vec<String>> = vec![Vec::new(); p.communities];
        for c in 0..p.communities {
            let next = (c + 1) % p.communities;
            visitors[c].push(format!("bridge{c:02}"));
            if next != c {
                visitors[next].push(format!("bridge{c:02}"));
            }
        }
        for k in 0..p.communities {
            let pair: Vec<usize> = (0..p.communities).collect::<Vec<_>>().choose_multiple(&mut rng, 2).copied().collect();
            for &c in &pair {
                visitors[c].push(format!("wanderer{k:02}"));
            }
        }

        let mut current: Vec<Vec<(String, Vec<String>)>> = vec![Vec::new(); p.communities];
        for c in 0..p.communities {
            let mut authors: Vec<String> = Vec::new();
            for u in 0..p.users {
                if rng.random::<f64>() < 0.8 {
                    let n = 1 + (rng.random::<f64>() * 2.0 * (p.comment_rate - 1.0).max(0.0)).round() as usize;
                    authors.extend(std::iter::repeat_n(format!("u{c:02}x{u:03}"), n));
                }
            }
            for v in &visitors[c] {
                let n = rng.random_range(2..=5);
                authors.extend(std::iter::repeat_n(v.clone(), n));
            }
            authors.shuffle(&mut rng);

            let mut comments: Vec<Comment> = Vec::new();
            let mut threads: Vec<(String, Vec<String>)> = Vec::new();
            for author in authors {
                let id = next_id("c");
                let roll: f64 = rng.random();
                let (thread, parent) = if roll < 0.1 && !previous[c].is_empty() {
                    let (t, ids) = previous[c].choose(&mut rng).unwrap();
                    (t.clone(), Some(ids.choose(&mut rng).unwrap().clone()))
                } else if roll < 0.3 || threads.is_empty() {
                    let t = next_id("t");
                    threads.push((t.clone(), Vec::new()));
                    (t, None)
                } else {
                    let k = rng.random_range(0..threads.len());
                    let (t, ids) = &threads[k];
                    let parent = if ids.is_empty() { None } else { Some(ids.choose(&mut rng).unwrap().clone()) };
                    (t.clone(), parent)
                };
                if let Some(entry) = threads.iter_mut().find(|(t, _)| *t == thread) {
                    entry.1.push(id.clone());
                }
                comments.push(Comment {
                    id,
                    thread,
                    author,
                    parent,
                    tokens: Vec::new(),
                });
            }

            let mut tokens: Vec<String> = Vec::new();
            if let Some(words) = usage.get(&(c, mi)) {
                for (w, &n) in words {
                    tokens.extend(std::iter::repeat_n(w.clone(), n as usize));
                }
            }
            let target = p.min_cell_tokens.max(3 * comments.len()) + rng.random_range(0..200);
            while tokens.len() < target {
                tokens.push(filler.choose(&mut rng).unwrap().clone());
            }
            tokens.shuffle(&mut rng);
            let n_comments = comments.len();
            for (i, t) in tokens.into_iter().enumerate() {
                // Round-robin over a shuffled order keeps every body non-empty.
                let k = if i < n_comments { i } else { rng.random_range(0..n_comments) };
                comments[k].tokens.push(t);
            }

            let mut extras = Vec::new();
            // Filtered authors whose words must not be counted.
            for author in ["AutoModerator", "[deleted]"] {
                let body: Vec<String> = (0..5).map(|_| lexicon_words.choose(&mut rng).unwrap().clone()).collect();
                let (thread, parent) = match comments.choose(&mut rng) {
                    Some(cm) => (cm.thread.clone(), Some(cm.id.clone())),
                    None => (next_id("t"), None),
                };
                extras.push(Comment {
                    id: next_id("c"),
                    thread,
                    author: author.to_string(),
                    parent,
                    tokens: body,
                });
            }
            comments_per_cell.insert((community_names[c].clone(), month), comments.len());
            filtered_comments += extras.len();
            comments.extend(extras);

            let start = month.start_unix();
            let span = month.succ().start_unix() - start - 120;
            let step = span / comments.len().max(1) as i64;
            for (i, cm) in comments.into_iter().enumerate() {
                let body = decorate(&mut rng, &cm.tokens);
                records.push(CommentRecord {
                    id: cm.id,
                    author: cm.author,
                    created_utc: start + 60 + step * i as i64,
                    parent_id: cm.parent,
                    thread_id: cm.thread,
                    community: community_names[c].clone(),
                    body,
                });
            }
            current[c] = threads;
        }
        previous = current;
    }

    let truth = ground_truth(p, &usage, &community_names, &month_keys, comments_per_cell, filtered_comments);
    let mut lexicon: Vec<String> = lexicon_words;
    lexicon.extend(am.planted.iter().map(|t| t.word.clone()));
    lexicon.sort();
    lexicon.dedup();
    Ok(SyntheticCorpus {
        records,
        lexicon,
        truth,
    })
}

/// Surface noise that cleaning removes: capitals, punctuation, stopwords,
/// numbers and links.
fn decorate(rng: &mut ChaCha8Rng, tokens: &[String]) -> String {
    let mut parts: Vec<String> = Vec::with_capacity(tokens.len() + 4);
    for (i, t) in tokens.iter().enumerate() {
        let mut w = t.clone();
        if i == 0 || rng.random::<f64>() < 0.05 {
            w[..1].make_ascii_uppercase();
        }
        if rng.random::<f64>() < 0.08 {
            w.push(*[',', '.', '!', '?'].choose(rng).unwrap());
        }
        parts.push(w);
        let r: f64 = rng.random();
        if r < 0.1 {
            parts.push(["the", "and", "of", "to"].choose(rng).unwrap().to_string());
        } else if r < 0.12 {
            parts.push(rng.random_range(1..2000).to_string());
        } else if r < 0.13 {
            parts.push("https://example.org/x".to_string());
        }
    }
    parts.join(" ")
}

fn ground_truth(
    p: &SynthParams,
    usage: &BTreeMap<(usize, usize), BTreeMap<String, u32>>,
    communities: &[String],
    months: &[MonthKey],
    comments_per_cell: BTreeMap<(String, MonthKey), usize>,
    filtered_comments: usize,
) -> GroundTruth {
    let mut totals: BTreeMap<&str, u64> = BTreeMap::new();
    for words in usage.values() {
        for (w, &n) in words {
            *totals.entry(w.as_str()).or_default() += n as u64;
        }
    }
    let dropped_words: BTreeSet<String> = totals
        .iter()
        .filter(|(_, &n)| n < 10)
        .map(|(w, _)| w.to_string())
        .collect();
    let mut active_months: BTreeMap<(String, String), BTreeSet<MonthKey>> = BTreeMap::new();
    for (&(c, t), words) in usage {
        for w in words.keys() {
            if !dropped_words.contains(w) {
                active_months
                    .entry((communities[c].clone(), w.clone()))
                    .or_default()
                    .insert(months[t]);
            }
        }
    }
    let first_introductions: BTreeMap<(String, String), MonthKey> = active_months
        .iter()
        .map(|(k, m)| (k.clone(), *m.first().unwrap()))
        .collect();
    let mut innovation_counts: BTreeMap<(String, MonthKey), u64> = BTreeMap::new();
    for c in communities {
        for m in months {
            innovation_counts.insert((c.clone(), *m), 0);
        }
    }
    for ((c, _), m) in &first_introductions {
        *innovation_counts.get_mut(&(c.clone(), *m)).unwrap() += 1;
    }
    let data_end = *months.last().unwrap();
    // Every community is active in every month, so its lifespan is the
    // number of months.
    let mut survival = BTreeMap::new();
    if p.months > 6 {
        for (k, m) in &active_months {
            let duration = m.len() as u32;
            let last = m.last().unwrap();
            if duration >= 3 {
                survival.insert(k.clone(), (duration, data_end.ordinal() - last.ordinal() >= 3));
            }
        }
    }
    GroundTruth {
        data_end,
        dropped_words,
        active_months,
        first_introductions,
        innovation_counts,
        survival,
        comments_per_cell,
        filtered_comments,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{build_monthly_corpora, parse_comments, CorpusConfig, Lexicon};
    use crate::innovate::count_innovations;

    fn small() -> SynthParams {
        SynthParams {
            communities: 3,
            months: 8,
            users: 10,
            lexicon_size: 15,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_synthetic_corpus(3, &small()).unwrap();
        let b = generate_synthetic_corpus(3, &small()).unwrap();
        assert_eq!(a.comments_jsonl(), b.comments_jsonl());
        assert_eq!(a.truth, b.truth);
        let c = generate_synthetic_corpus(4, &small()).unwrap();
        assert_ne!(a.comments_jsonl(), c.comments_jsonl());
    }

    #[test]
    fn truth_round_trips_through_json() {
        let a = generate_synthetic_corpus(3, &small()).unwrap();
        let text = serde_json::to_string(&a.truth).unwrap();
        let back: GroundTruth = serde_json::from_str(&text).unwrap();
        assert_eq!(back, a.truth);
    }

    #[test]
    fn record_count_matches_truth() {
        let p = SynthParams {
            communities: 2,
            months: 3,
            users: 3,
            comment_rate: 1.0,
            lexicon_size: 4,
            ..Default::default()
        };
        let s = generate_synthetic_corpus(1, &p).unwrap();
        let n: usize = s.truth.comments_per_cell.values().sum();
        assert_eq!(s.records.len(), n + s.truth.filtered_comments);
    }

    #[test]
    fn pipeline_tables_match_planted_usage() {
        let s = generate_synthetic_corpus(7, &small()).unwrap();
        let report = parse_comments(s.comments_jsonl().as_bytes()).unwrap();
        assert_eq!(report.filtered, s.truth.filtered_comments);
        assert_eq!(report.malformed, 0);
        let lex = Lexicon::from_lines(s.lexicon.iter().map(String::as_str));
        let tables = build_monthly_corpora(&report.records, &lex, &default_stopwords(), &CorpusConfig::default()).unwrap();
        assert_eq!(tables.len(), 3 * 8);
        let counts: BTreeMap<(String, MonthKey), u64> = count_innovations(&tables, &lex)
            .into_iter()
            .map(|x| ((x.community, x.month), x.y))
            .collect();
        assert_eq!(counts, s.truth.innovation_counts);
        assert_eq!(s.truth.dropped_words.len(), 3);
    }

    #[test]
    fn planted_timeline_is_recorded() {
        let mut p = small();
        p.adoption_model.planted.push(PlantedTimeline {
            word: "zzplant".into(),
            community: 1,
            months: vec![1, 2, 4],
        });
        let s = generate_synthetic_corpus(2, &p).unwrap();
        let key = ("sub01".to_string(), "zzplant".to_string());
        assert_eq!(s.truth.survival[&key], (3, true));
        assert_eq!(s.truth.first_introductions[&key], p.start.plus(1));
    }
}
