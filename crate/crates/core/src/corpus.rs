//! Comment ingestion, tokenization, lexicon loading and monthly usage tables.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::month::MonthKey;

/// Authors whose comments are discarded at parse time.
pub const FILTERED_AUTHORS: [&str; 2] = ["[deleted]", "AutoModerator"];

const DEFAULT_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CommentRecord {
    pub id: String,
    pub author: String,
    pub created_utc: i64,
    pub parent_id: Option<String>,
    pub thread_id: String,
    pub community: String,
    pub body: String,
}

impl CommentRecord {
    pub fn month(&self) -> Result<MonthKey> {
        MonthKey::from_unix(self.created_utc)
    }

    /// One line of the comment input format.
    pub fn to_json_line(&self) -> String {
        let wire = WireComment {
            id: self.id.clone(),
            author: self.author.clone(),
            created_utc: WireTime::Int(self.created_utc),
            parent_id: self.parent_id.clone(),
            link_id: self.thread_id.clone(),
            subreddit: self.community.clone(),
            body: self.body.clone(),
        };
        serde_json::to_string(&wire).expect("comment serializes")
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum WireTime {
    Int(i64),
    Str(String),
}

#[derive(Serialize, Deserialize)]
struct WireComment {
    id: String,
    author: String,
    created_utc: WireTime,
    #[serde(default)]
    parent_id: Option<String>,
    link_id: String,
    subreddit: String,
    body: String,
}

impl WireComment {
    fn into_record(self) -> Option<CommentRecord> {
        let created_utc = match self.created_utc {
            WireTime::Int(v) => v,
            WireTime::Str(s) => s.trim().parse().ok()?,
        };
        if self.id.is_empty() || self.link_id.is_empty() || self.subreddit.is_empty() {
            return None;
        }
        // Reddit dumps prefix comment parents with `t1_` and point top-level
        // comments at the submission with `t3_`.
        let parent_id = match self.parent_id {
            Some(p) if p.starts_with("t3_") || p.is_empty() => None,
            Some(p) => Some(p.strip_prefix("t1_").map(str::to_string).unwrap_or(p)),
            None => None,
        };
        Some(CommentRecord {
            id: self.id,
            author: self.author,
            created_utc,
            parent_id,
            thread_id: self.link_id,
            community: self.subreddit,
            body: self.body,
        })
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct ParseReport {
    pub records: Vec<CommentRecord>,
    pub malformed: usize,
    pub filtered: usize,
}

/// Parses newline-delimited comment objects. Blank lines are ignored;
/// malformed lines are counted and skipped.
pub fn parse_comments<R: Read>(reader: R) -> Result<ParseReport> {
    let mut report = ParseReport::default();
    let mut lines = 0usize;
    for line in BufReader::new(reader).lines() {
        let line = line.map_err(|e| Error::io("<comment stream>", e))?;
        if line.trim().is_empty() {
            continue;
        }
        lines += 1;
        let rec = serde_json::from_str::<WireComment>(&line)
            .ok()
            .and_then(WireComment::into_record);
        match rec {
            None => report.malformed += 1,
            Some(r) if FILTERED_AUTHORS.contains(&r.author.as_str()) => report.filtered += 1,
            Some(r) => report.records.push(r),
        }
    }
    if lines > 0 && report.malformed * 2 > lines {
        return Err(Error::Config(format!(
            "{} of {} comment lines are malformed; is this the right input format?",
            report.malformed, lines
        )));
    }
    if report.malformed > 0 {
        log::warn!("skipped {} malformed comment lines", report.malformed);
    }
    Ok(report)
}

pub fn read_comments(path: &Path) -> Result<ParseReport> {
    let f = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_comments(f)
}

fn is_emoji(c: char) -> bool {
    matches!(c as u32,
        0x1F000..=0x1FAFF
        | 0x2600..=0x27BF
        | 0x2B00..=0x2BFF
        | 0xFE00..=0xFE0F
        | 0x200D
        | 0x20E3
        | 0xE0020..=0xE007F)
}

fn is_url(tok: &str) -> bool {
    let lower = tok.to_lowercase();
    lower.contains("://") || lower.starts_with("www.")
}

/// Punctuation that may appear inside a token (`tl;dr`, `f'tang`, `w/e`, `x-post`).
fn is_inner_punct(c: char) -> bool {
    matches!(c, '\'' | ';' | '/' | '-' | '\u{2019}')
}

/// Lowercase tokens with numbers, emoji, URLs, punctuation and stopwords
/// removed.
///
/// Whitespace-separated chunks that look like URLs or contain emoji are
/// dropped whole. Remaining chunks are split on punctuation other than
/// `' ; / -`, trimmed of leading and trailing non-alphanumerics, and dropped
/// if they contain a digit or are stopwords.
pub fn clean_tokens(body: &str, stopwords: &HashSet<String>) -> Vec<String> {
    let mut out = Vec::new();
    for chunk in body.split_whitespace() {
        if is_url(chunk) || chunk.chars().any(is_emoji) {
            continue;
        }
        let lower = chunk.to_lowercase();
        for piece in lower.split(|c: char| !(c.is_alphanumeric() || is_inner_punct(c))) {
            let tok = piece.trim_matches(|c: char| !c.is_alphanumeric());
            if tok.is_empty() || tok.chars().any(char::is_numeric) {
                continue;
            }
            let tok = tok.replace('\u{2019}', "'");
            if stopwords.contains(&tok) {
                continue;
            }
            out.push(tok);
        }
    }
    out
}

pub fn default_stopwords() -> HashSet<String> {
    parse_word_list(DEFAULT_STOPWORDS)
}

pub fn load_stopwords(path: &Path) -> Result<HashSet<String>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Ok(parse_word_list(&text))
}

fn parse_word_list(text: &str) -> HashSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_lowercase)
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lexicon {
    pub terms: BTreeSet<String>,
}

impl Lexicon {
    /// Applies the dictionary filters: lowercase, single word, alphabetic
    /// apart from apostrophes, semicolons and slashes.
    pub fn from_lines<'a>(lines: impl IntoIterator<Item = &'a str>) -> Self {
        let mut terms = BTreeSet::new();
        for line in lines {
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') || t.chars().any(char::is_whitespace) {
                continue;
            }
            let t = t.to_lowercase();
            let ok = t.chars().any(char::is_alphabetic)
                && t
                    .chars()
                    .all(|c| c.is_alphabetic() || matches!(c, '\'' | ';' | '/'))
                && !t.chars().any(is_emoji);
            if ok {
                terms.insert(t);
            }
        }
        Lexicon { terms }
    }

    pub fn contains(&self, t: &str) -> bool {
        self.terms.contains(t)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Loads and merges lexicon files. Unreadable files are skipped with a
/// warning; it is an error if none can be read.
pub fn load_lexicon<P: AsRef<Path>>(paths: &[P]) -> Result<Lexicon> {
    let mut texts = Vec::new();
    let mut last_err = None;
    for p in paths {
        let p = p.as_ref();
        match fs::read_to_string(p) {
            Ok(t) => texts.push(t),
            Err(e) => {
                log::warn!("cannot read lexicon {}: {e}", p.display());
                last_err = Some(Error::io(p, e));
            }
        }
    }
    if texts.is_empty() {
        return Err(last_err.unwrap_or_else(|| Error::Config("no lexicon files given".into())));
    }
    Ok(Lexicon::from_lines(texts.iter().flat_map(|t| t.lines())))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RetentionRule {
    /// Keep a cell when either threshold is exceeded.
    #[default]
    Any,
    /// Keep a cell only when both thresholds are exceeded.
    All,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct CorpusConfig {
    pub min_global_freq: u64,
    /// A cell needs more than this many tokens (instances, not types).
    pub min_tokens: u64,
    /// ... or more than this many distinct users.
    pub min_users: u64,
    pub retention_rule: RetentionRule,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        CorpusConfig {
            min_global_freq: 10,
            min_tokens: 500,
            min_users: 50,
            retention_rule: RetentionRule::Any,
        }
    }
}

impl CorpusConfig {
    pub fn retains(&self, tokens: u64, users: u64) -> bool {
        let t = tokens > self.min_tokens;
        let u = users > self.min_users;
        match self.retention_rule {
            RetentionRule::Any => t || u,
            RetentionRule::All => t && u,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonthlyUsageTable {
    pub community: String,
    pub month: MonthKey,
    pub word_counts: BTreeMap<String, u64>,
    pub distinct_users: u64,
    pub total_tokens: u64,
}

/// Counts accumulated for one (community, month) cell before filtering.
/// Merging is associative and order independent.
#[derive(Debug, Clone, Default)]
pub struct CellCounts {
    pub word_counts: BTreeMap<String, u64>,
    pub users: BTreeSet<String>,
    pub total_tokens: u64,
}

impl CellCounts {
    pub fn merge(&mut self, other: CellCounts) {
        for (w, c) in other.word_counts {
            *self.word_counts.entry(w).or_insert(0) += c;
        }
        self.users.extend(other.users);
        self.total_tokens += other.total_tokens;
    }
}

pub type CellMap = BTreeMap<(String, MonthKey), CellCounts>;

/// Tokenizes every record and accumulates per-cell counts of lexicon terms.
pub fn accumulate_cells(
    records: &[CommentRecord],
    lexicon: &Lexicon,
    stopwords: &HashSet<String>,
) -> Result<CellMap> {
    use rayon::prelude::*;
    let shards: Vec<Result<CellMap>> = records
        .par_chunks(4096)
        .map(|chunk| {
            let mut cells = CellMap::new();
            for r in chunk {
                let month = r.month()?;
                let cell = cells.entry((r.community.clone(), month)).or_default();
                let toks = clean_tokens(&r.body, stopwords);
                cell.total_tokens += toks.len() as u64;
                cell.users.insert(r.author.clone());
                for t in toks {
                    if lexicon.contains(&t) {
                        *cell.word_counts.entry(t).or_insert(0) += 1;
                    }
                }
            }
            Ok(cells)
        })
        .collect();
    let mut merged = CellMap::new();
    for shard in shards {
        for (k, v) in shard? {
            merged.entry(k).or_default().merge(v);
        }
    }
    Ok(merged)
}

/// Global lexicon-term frequencies over every cell, before thresholding.
pub fn global_counts(cells: &CellMap) -> BTreeMap<String, u64> {
    let mut g = BTreeMap::new();
    for c in cells.values() {
        for (w, n) in &c.word_counts {
            *g.entry(w.clone()).or_insert(0) += n;
        }
    }
    g
}

/// Builds the retained usage tables, sorted by (community, month).
pub fn build_monthly_corpora(
    records: &[CommentRecord],
    lexicon: &Lexicon,
    stopwords: &HashSet<String>,
    cfg: &CorpusConfig,
) -> Result<Vec<MonthlyUsageTable>> {
    let cells = accumulate_cells(records, lexicon, stopwords)?;
    let global = global_counts(&cells);
    let frequent: BTreeSet<&String> = global
        .iter()
        .filter(|(_, &n)| n >= cfg.min_global_freq)
        .map(|(w, _)| w)
        .collect();

    let mut out = Vec::new();
    for ((community, month), cell) in cells {
        let users = cell.users.len() as u64;
        if !cfg.retains(cell.total_tokens, users) {
            continue;
        }
        let word_counts = cell
            .word_counts
            .into_iter()
            .filter(|(w, _)| frequent.contains(w))
            .collect();
        out.push(MonthlyUsageTable {
            community,
            month,
            word_counts,
            distinct_users: users,
            total_tokens: cell.total_tokens,
        });
    }
    Ok(out)
}

/// Per month, per user, per community comment counts.
pub type UserActivity = BTreeMap<MonthKey, BTreeMap<String, BTreeMap<String, u32>>>;

pub fn user_activity(records: &[CommentRecord]) -> Result<UserActivity> {
    let mut act = UserActivity::new();
    for r in records {
        *act.entry(r.month()?)
            .or_default()
            .entry(r.author.clone())
            .or_default()
            .entry(r.community.clone())
            .or_insert(0) += 1;
    }
    Ok(act)
}

/// `community\tyear\tmonth\tterm\tcount` rows with a header line.
pub fn usage_tsv(tables: &[MonthlyUsageTable]) -> String {
    let mut s = String::from("community\tyear\tmonth\tterm\tcount\n");
    for t in tables {
        for (w, c) in &t.word_counts {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\n",
                t.community, t.month.year, t.month.month, w, c
            ));
        }
    }
    s
}

/// `community\tyear\tmonth\ttokens\tusers` rows with a header line.
pub fn summary_tsv(tables: &[MonthlyUsageTable]) -> String {
    let mut s = String::from("community\tyear\tmonth\ttokens\tusers\n");
    for t in tables {
        s.push_str(&format!(
            "{}\t{}\t{}\t{}\t{}\n",
            t.community, t.month.year, t.month.month, t.total_tokens, t.distinct_users
        ));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sw(words: &[&str]) -> HashSet<String> {
        words.iter().map(|s| s.to_string()).collect()
    }

    fn line(id: &str, author: &str, link: &str) -> String {
        format!(
            r#"{{"id":"{id}","author":"{author}","created_utc":1262304000,"parent_id":null,"link_id":"{link}","subreddit":"c","body":"hi"}}"#
        )
    }

    #[test]
    fn parses_well_formed_lines() {
        let text = [line("a", "u1", "t"), line("b", "u2", "t"), line("c", "u3", "t")].join("\n");
        let rep = parse_comments(text.as_bytes()).unwrap();
        assert_eq!(rep.records.len(), 3);
        assert_eq!(rep.malformed, 0);
        assert_eq!(rep.records[1].id, "b");
    }

    #[test]
    fn drops_automoderator() {
        let text = [
            line("a", "u1", "t"),
            line("b", "AutoModerator", "t"),
            line("c", "[deleted]", "t"),
            line("d", "u4", "t"),
        ]
        .join("\n");
        let rep = parse_comments(text.as_bytes()).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.filtered, 2);
    }

    #[test]
    fn missing_thread_id_is_skipped() {
        let bad = r#"{"id":"x","author":"u","created_utc":1262304000,"subreddit":"c","body":"b"}"#;
        let text = [line("a", "u1", "t"), bad.to_string(), line("c", "u3", "t")].join("\n");
        let rep = parse_comments(text.as_bytes()).unwrap();
        assert_eq!(rep.records.len(), 2);
        assert_eq!(rep.malformed, 1);
    }

    #[test]
    fn mostly_malformed_is_a_config_error() {
        let text = ["garbage", "also garbage", &line("a", "u", "t")].join("\n");
        assert!(matches!(
            parse_comments(text.as_bytes()),
            Err(Error::Config(_))
        ));
    }

    #[test]
    fn string_timestamps_and_reddit_prefixes() {
        let l = r#"{"id":"b","author":"u","created_utc":"1262304000","parent_id":"t1_a","link_id":"t3_x","subreddit":"c","body":"b"}"#;
        let top = r#"{"id":"a","author":"u","created_utc":1262304000,"parent_id":"t3_x","link_id":"t3_x","subreddit":"c","body":"b"}"#;
        let rep = parse_comments(format!("{l}\n{top}").as_bytes()).unwrap();
        assert_eq!(rep.records[0].parent_id.as_deref(), Some("a"));
        assert_eq!(rep.records[0].created_utc, 1262304000);
        assert_eq!(rep.records[1].parent_id, None);
    }

    #[test]
    fn json_line_round_trip() {
        let r = CommentRecord {
            id: "a".into(),
            author: "u".into(),
            created_utc: 5,
            parent_id: Some("p".into()),
            thread_id: "t".into(),
            community: "c".into(),
            body: "x \"y\"".into(),
        };
        let rep = parse_comments(r.to_json_line().as_bytes()).unwrap();
        assert_eq!(rep.records, vec![r]);
    }

    #[test]
    fn clean_examples() {
        assert_eq!(
            clean_tokens("LOL check https://x.y !!", &sw(&["check"])),
            vec!["lol"]
        );
        assert!(clean_tokens("", &sw(&[])).is_empty());
        assert_eq!(
            clean_tokens("tl;dr it's 2018", &sw(&["it's"])),
            vec!["tl;dr"]
        );
    }

    #[test]
    fn clean_handles_emoji_www_and_inner_punctuation() {
        let toks = clean_tokens(
            "Yes!! www.foo.com f'tang, (hello)...world 😂 ok👍 a2b x-post",
            &sw(&[]),
        );
        assert_eq!(toks, vec!["yes", "f'tang", "hello", "world", "x-post"]);
    }

    #[test]
    fn lexicon_filters() {
        assert_eq!(
            Lexicon::from_lines(["LOL", "lol", "tl;dr"]).terms,
            ["lol", "tl;dr"].iter().map(|s| s.to_string()).collect()
        );
        assert!(Lexicon::from_lines(["two words"]).is_empty());
        assert!(Lexicon::from_lines(["a2b"]).is_empty());
        assert!(Lexicon::from_lines(["# comment", "x-post", "w/e"]).terms.contains("w/e"));
        assert_eq!(Lexicon::from_lines(["x-post"]).len(), 0);
    }

    #[test]
    fn load_lexicon_needs_one_readable_file() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("lex.txt");
        fs::write(&p, "yeet\n#c\nLOL\n").unwrap();
        let missing = dir.path().join("nope.txt");
        let lex = load_lexicon(&[&p, &missing]).unwrap();
        assert_eq!(lex.len(), 2);
        assert!(load_lexicon(&[&missing]).is_err());
    }

    fn rec(id: usize, author: &str, community: &str, month: MonthKey, body: &str) -> CommentRecord {
        CommentRecord {
            id: format!("c{id}"),
            author: author.into(),
            created_utc: month.start_unix() + 100,
            parent_id: None,
            thread_id: format!("t{id}"),
            community: community.into(),
            body: body.into(),
        }
    }

    #[test]
    fn retention_boundary_and_frequency_cutoff() {
        let m = MonthKey::new(2012, 5).unwrap();
        let lex = Lexicon::from_lines(["yeet", "rare"]);
        let mut records = Vec::new();
        // 10 users, 501 tokens total: 500 filler + 1 "rare"; "yeet" 10 times
        // inside the filler budget.
        let mut id = 0;
        for u in 0..10 {
            let mut words: Vec<&str> = vec!["blah"; 49];
            words.push("yeet");
            records.push(rec(id, &format!("u{u}"), "big", m, &words.join(" ")));
            id += 1;
        }
        records.push(rec(id, "u0", "big", m, "rare"));
        id += 1;
        // A small cell with exactly 500 tokens and 10 users: dropped.
        for u in 0..10 {
            records.push(rec(id, &format!("u{u}"), "small", m, &vec!["blah"; 50].join(" ")));
            id += 1;
        }
        let tables =
            build_monthly_corpora(&records, &lex, &sw(&[]), &CorpusConfig::default()).unwrap();
        assert_eq!(tables.len(), 1);
        let t = &tables[0];
        assert_eq!(t.community, "big");
        assert_eq!(t.total_tokens, 501);
        assert_eq!(t.distinct_users, 10);
        assert_eq!(t.word_counts.get("yeet"), Some(&10));
        assert_eq!(t.word_counts.get("rare"), None);

        let strict = CorpusConfig {
            retention_rule: RetentionRule::All,
            ..Default::default()
        };
        assert!(build_monthly_corpora(&records, &lex, &sw(&[]), &strict)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn empty_records_give_empty_tables() {
        let t = build_monthly_corpora(&[], &Lexicon::default(), &sw(&[]), &CorpusConfig::default())
            .unwrap();
        assert!(t.is_empty());
    }

    #[test]
    fn summary_and_usage_tsv() {
        let t = MonthlyUsageTable {
            community: "c".into(),
            month: MonthKey::new(2009, 2).unwrap(),
            word_counts: [("lol".to_string(), 4)].into_iter().collect(),
            distinct_users: 3,
            total_tokens: 700,
        };
        assert_eq!(
            usage_tsv(std::slice::from_ref(&t)),
            "community\tyear\tmonth\tterm\tcount\nc\t2009\t2\tlol\t4\n"
        );
        assert_eq!(
            summary_tsv(&[t]),
            "community\tyear\tmonth\ttokens\tusers\nc\t2009\t2\t700\t3\n"
        );
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn cleaning_is_idempotent(body in "\\PC{0,80}") {
                let stop = default_stopwords();
                let once = clean_tokens(&body, &stop);
                let twice = clean_tokens(&once.join(" "), &stop);
                prop_assert_eq!(once, twice);
            }

            #[test]
            fn tokens_are_lowercase_without_digits(body in "[a-zA-Z0-9 ;'.,!?/-]{0,80}") {
                for t in clean_tokens(&body, &HashSet::new()) {
                    prop_assert_eq!(t.to_lowercase(), t.clone());
                    prop_assert!(!t.chars().any(|c| c.is_numeric()));
                    prop_assert!(!t.is_empty());
                }
            }
        }
    }
}
