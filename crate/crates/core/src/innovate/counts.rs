use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::corpus::{Lexicon, MonthlyUsageTable};
use crate::month::MonthKey;

/// Target of the innovation model for one (community, month).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InnovationSample {
    pub community: String,
    pub month: MonthKey,
    pub y: u64,
}

/// First month each lexicon term was used in each community.
pub fn first_introductions(
    tables: &[MonthlyUsageTable],
    lexicon: &Lexicon,
) -> BTreeMap<(String, String), MonthKey> {
    let mut first: BTreeMap<(String, String), MonthKey> = BTreeMap::new();
    for t in tables {
        for (w, &c) in &t.word_counts {
            if c == 0 || !lexicon.contains(w) {
                continue;
            }
            first
                .entry((t.community.clone(), w.clone()))
                .and_modify(|m| *m = (*m).min(t.month))
                .or_insert(t.month);
        }
    }
    first
}

/// Number of terms introduced into each community in each month. Every
/// table yields a sample, including months with no innovations; later uses
/// of a term never count again.
pub fn count_innovations(tables: &[MonthlyUsageTable], lexicon: &Lexicon) -> Vec<InnovationSample> {
    let first = first_introductions(tables, lexicon);
    let mut y: BTreeMap<(String, MonthKey), u64> = BTreeMap::new();
    for ((community, _), m) in &first {
        *y.entry((community.clone(), *m)).or_insert(0) += 1;
    }
    let cells: BTreeSet<(String, MonthKey)> = tables
        .iter()
        .map(|t| (t.community.clone(), t.month))
        .collect();
    cells
        .into_iter()
        .map(|(community, month)| {
            let n = y.get(&(community.clone(), month)).copied().unwrap_or(0);
            InnovationSample { community, month, y: n }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(c: &str, m: u32, words: &[&str]) -> MonthlyUsageTable {
        MonthlyUsageTable {
            community: c.into(),
            month: MonthKey::new(2011, m).unwrap(),
            word_counts: words.iter().map(|w| (w.to_string(), 3)).collect(),
            distinct_users: 60,
            total_tokens: 1000,
        }
    }

    #[test]
    fn only_first_use_counts() {
        let lex = Lexicon::from_lines(["w", "v", "u"]);
        let tables = vec![
            table("c", 5, &["w"]),
            table("c", 6, &["w"]),
            table("c", 7, &[]),
            table("c", 9, &["w"]),
        ];
        let ys: Vec<u64> = count_innovations(&tables, &lex).iter().map(|s| s.y).collect();
        assert_eq!(ys, vec![1, 0, 0, 0]);
    }

    #[test]
    fn two_words_same_month() {
        let lex = Lexicon::from_lines(["w", "v"]);
        let tables = vec![table("c", 1, &[]), table("c", 2, &["w", "v"]), table("d", 2, &["w"])];
        let s = count_innovations(&tables, &lex);
        assert_eq!(s.len(), 3);
        assert_eq!(s[1].y, 2);
        assert_eq!((s[2].community.as_str(), s[2].y), ("d", 1));
    }
}
