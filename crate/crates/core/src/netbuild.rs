//! Monthly interaction graphs.
//!
//! Intra-community graphs connect authors whose comments sit close together in
//! a thread's reply tree. An interaction belongs to the month of the later of
//! its two comments, and both endpoints become nodes of that month even if one
//! of them posted nothing else then. Only comments are nodes; the submission
//! that roots a thread is not, so two top-level comments are not siblings.
//!
//! Inter-community graphs connect communities that share active users.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{CommentRecord, UserActivity};
use crate::error::Result;
use crate::graph::{GraphKey, SnapshotGraph, INTER_SCOPE};
use crate::month::MonthKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GraphVariantKind {
    /// Reply-tree distance at most two: parent, grandparent, or a sibling
    /// under the same parent comment.
    #[default]
    Proximity2,
    /// Direct replies only.
    Drg,
    /// Any two authors in the same thread.
    Tg,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq, Eq)]
pub struct BuildStats {
    pub orphans: usize,
    pub cyclic_threads: usize,
}

struct Thread<'a> {
    comments: Vec<&'a CommentRecord>,
    parent: Vec<Option<usize>>,
}

fn index_thread<'a>(mut comments: Vec<&'a CommentRecord>, stats: &mut BuildStats) -> Option<Thread<'a>> {
    comments.sort_by(|a, b| (a.created_utc, &a.id).cmp(&(b.created_utc, &b.id)));
    let pos: HashMap<&str, usize> = comments
        .iter()
        .enumerate()
        .map(|(i, c)| (c.id.as_str(), i))
        .collect();
    let parent: Vec<Option<usize>> = comments
        .iter()
        .map(|c| match &c.parent_id {
            None => None,
            Some(p) => match pos.get(p.as_str()) {
                Some(&i) => Some(i),
                None => {
                    stats.orphans += 1;
                    log::debug!("comment {} has no parent {} in its thread", c.id, p);
                    None
                }
            },
        })
        .collect();

    // Reject threads whose parent links loop.
    for start in 0..comments.len() {
        let mut cur = parent[start];
        let mut steps = 0;
        while let Some(p) = cur {
            steps += 1;
            if steps > comments.len() {
                stats.cyclic_threads += 1;
                log::warn!("thread {} has cyclic parent links", comments[0].thread_id);
                return None;
            }
            cur = parent[p];
        }
    }
    Some(Thread { comments, parent })
}

/// Comment index pairs (i, j) whose reply-tree relation matches `kind`.
fn interacting_pairs(t: &Thread<'_>, kind: GraphVariantKind) -> Vec<(usize, usize)> {
    let n = t.comments.len();
    let mut pairs = Vec::new();
    match kind {
        GraphVariantKind::Tg => {
            for i in 0..n {
                for j in (i + 1)..n {
                    pairs.push((i, j));
                }
            }
        }
        GraphVariantKind::Drg => {
            for (c, p) in t.parent.iter().enumerate() {
                if let Some(p) = p {
                    pairs.push((*p, c));
                }
            }
        }
        GraphVariantKind::Proximity2 => {
            let mut children: Vec<Vec<usize>> = vec![Vec::new(); n];
            for (c, p) in t.parent.iter().enumerate() {
                if let Some(p) = p {
                    pairs.push((*p, c));
                    if let Some(gp) = t.parent[*p] {
                        pairs.push((gp, c));
                    }
                    children[*p].push(c);
                }
            }
            for sibs in &children {
                for a in 0..sibs.len() {
                    for b in (a + 1)..sibs.len() {
                        pairs.push((sibs[a], sibs[b]));
                    }
                }
            }
        }
    }
    pairs
}

/// Builds every monthly intra graph of one community in a single pass.
///
/// Only comments whose community matches are used. The result is keyed by
/// month and is independent of the input order.
pub fn build_intra_graphs(
    comments: &[CommentRecord],
    community: &str,
    kind: GraphVariantKind,
) -> Result<(BTreeMap<MonthKey, SnapshotGraph>, BuildStats)> {
    let mut threads: BTreeMap<&str, Vec<&CommentRecord>> = BTreeMap::new();
    for c in comments.iter().filter(|c| c.community == community) {
        threads.entry(c.thread_id.as_str()).or_default().push(c);
    }
    let mut stats = BuildStats::default();
    let mut graphs: BTreeMap<MonthKey, SnapshotGraph> = BTreeMap::new();
    let key = |month| GraphKey {
        scope: community.to_string(),
        month,
    };

    for (_, cs) in threads {
        let Some(t) = index_thread(cs, &mut stats) else {
            continue;
        };
        for c in &t.comments {
            let m = c.month()?;
            graphs
                .entry(m)
                .or_insert_with(|| SnapshotGraph::new(key(m)))
                .add_node(&c.author);
        }
        for (i, j) in interacting_pairs(&t, kind) {
            let (a, b) = (t.comments[i], t.comments[j]);
            let later = if a.created_utc >= b.created_utc { a } else { b };
            let m = later.month()?;
            graphs
                .entry(m)
                .or_insert_with(|| SnapshotGraph::new(key(m)))
                .add_edge(&a.author, &b.author, None);
        }
    }
    Ok((graphs, stats))
}

/// The intra graph of one community for one month.
pub fn build_intra_graph(
    comments: &[CommentRecord],
    community: &str,
    month: MonthKey,
    kind: GraphVariantKind,
) -> Result<SnapshotGraph> {
    let (mut all, _) = build_intra_graphs(comments, community, kind)?;
    Ok(all.remove(&month).unwrap_or_else(|| {
        SnapshotGraph::new(GraphKey {
            scope: community.to_string(),
            month,
        })
    }))
}

/// Community graph for one month. Nodes are `communities`; an edge joins
/// two communities when at least one user posted `active_threshold` or more
/// comments in each, weighted by the number of such users.
pub fn build_inter_graph(
    activity: &UserActivity,
    communities: &BTreeSet<String>,
    month: MonthKey,
    active_threshold: u32,
) -> SnapshotGraph {
    let mut g = SnapshotGraph::new(GraphKey {
        scope: INTER_SCOPE.to_string(),
        month,
    });
    for c in communities {
        g.add_node(c);
    }
    let mut weights: BTreeMap<(&str, &str), u32> = BTreeMap::new();
    if let Some(users) = activity.get(&month) {
        for per_comm in users.values() {
            let active: Vec<&str> = per_comm
                .iter()
                .filter(|(c, &n)| n >= active_threshold && communities.contains(*c))
                .map(|(c, _)| c.as_str())
                .collect();
            for i in 0..active.len() {
                for j in (i + 1)..active.len() {
                    *weights.entry((active[i], active[j])).or_insert(0) += 1;
                }
            }
        }
    }
    for ((a, b), w) in weights {
        g.add_edge(a, b, Some(w));
    }
    g
}

#[cfg(test)]
mod tests {
    use super::*;

    fn month(m: u32) -> MonthKey {
        MonthKey::new(2015, m).unwrap()
    }

    fn c(id: &str, author: &str, parent: Option<&str>, m: u32) -> CommentRecord {
        CommentRecord {
            id: id.into(),
            author: author.into(),
            created_utc: month(m).start_unix() + id[1..].parse::<i64>().unwrap() * 60,
            parent_id: parent.map(str::to_string),
            thread_id: "t".into(),
            community: "c".into(),
            body: String::new(),
        }
    }

    fn chain() -> Vec<CommentRecord> {
        vec![
            c("c1", "u1", None, 1),
            c("c2", "u2", Some("c1"), 1),
            c("c3", "u3", Some("c2"), 1),
            c("c4", "u4", Some("c3"), 1),
        ]
    }

    fn edge_set(g: &SnapshotGraph) -> BTreeSet<(String, String)> {
        g.edges.keys().cloned().collect()
    }

    fn pairs(list: &[(&str, &str)]) -> BTreeSet<(String, String)> {
        list.iter()
            .map(|(a, b)| (a.to_string(), b.to_string()))
            .collect()
    }

    #[test]
    fn chain_variants() {
        let cs = chain();
        let p2 = build_intra_graph(&cs, "c", month(1), GraphVariantKind::Proximity2).unwrap();
        assert_eq!(
            edge_set(&p2),
            pairs(&[("u1", "u2"), ("u1", "u3"), ("u2", "u3"), ("u2", "u4"), ("u3", "u4")])
        );
        let drg = build_intra_graph(&cs, "c", month(1), GraphVariantKind::Drg).unwrap();
        assert_eq!(edge_set(&drg), pairs(&[("u1", "u2"), ("u2", "u3"), ("u3", "u4")]));
        let tg = build_intra_graph(&cs, "c", month(1), GraphVariantKind::Tg).unwrap();
        assert_eq!(tg.n_edges(), 6);
    }

    #[test]
    fn siblings_are_within_two() {
        let cs = vec![
            c("c1", "u1", None, 1),
            c("c2", "u2", Some("c1"), 1),
            c("c3", "u3", Some("c1"), 1),
            c("c4", "u4", None, 1),
        ];
        let g = build_intra_graph(&cs, "c", month(1), GraphVariantKind::Proximity2).unwrap();
        assert_eq!(
            edge_set(&g),
            pairs(&[("u1", "u2"), ("u1", "u3"), ("u2", "u3")])
        );
        assert!(g.nodes.contains("u4"));
    }

    #[test]
    fn single_comment_thread() {
        let g = build_intra_graph(&[c("c1", "u1", None, 1)], "c", month(1), GraphVariantKind::Proximity2)
            .unwrap();
        assert_eq!((g.n_nodes(), g.n_edges()), (1, 0));
    }

    #[test]
    fn late_reply_lands_in_later_month() {
        let cs = vec![c("c1", "u1", None, 1), c("c2", "u2", Some("c1"), 2)];
        let (graphs, _) = build_intra_graphs(&cs, "c", GraphVariantKind::Proximity2).unwrap();
        assert_eq!(graphs[&month(1)].n_edges(), 0);
        assert_eq!(graphs[&month(1)].n_nodes(), 1);
        let feb = &graphs[&month(2)];
        assert!(feb.has_edge("u1", "u2"));
        assert!(feb.nodes.contains("u1"));
    }

    #[test]
    fn missing_parent_is_top_level() {
        let cs = vec![c("c1", "u1", None, 1), c("c2", "u2", Some("gone"), 1)];
        let (graphs, stats) = build_intra_graphs(&cs, "c", GraphVariantKind::Proximity2).unwrap();
        assert_eq!(stats.orphans, 1);
        assert_eq!(graphs[&month(1)].n_edges(), 0);
        assert_eq!(graphs[&month(1)].n_nodes(), 2);
    }

    #[test]
    fn cyclic_thread_rejected() {
        let cs = vec![c("c1", "u1", Some("c2"), 1), c("c2", "u2", Some("c1"), 1)];
        let (graphs, stats) = build_intra_graphs(&cs, "c", GraphVariantKind::Proximity2).unwrap();
        assert_eq!(stats.cyclic_threads, 1);
        assert!(graphs.is_empty());
    }

    #[test]
    fn same_author_adds_no_loop() {
        let cs = vec![c("c1", "u1", None, 1), c("c2", "u1", Some("c1"), 1)];
        let g = build_intra_graph(&cs, "c", month(1), GraphVariantKind::Proximity2).unwrap();
        assert_eq!((g.n_nodes(), g.n_edges()), (1, 0));
    }

    fn activity(rows: &[(&str, &str, u32)]) -> UserActivity {
        let mut a = UserActivity::new();
        for (u, comm, n) in rows {
            a.entry(month(1))
                .or_default()
                .entry(u.to_string())
                .or_default()
                .insert(comm.to_string(), *n);
        }
        a
    }

    #[test]
    fn inter_graph_threshold() {
        let comms: BTreeSet<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let act = activity(&[("u1", "A", 3), ("u1", "B", 2), ("u2", "A", 1), ("u2", "B", 5)]);
        let g = build_inter_graph(&act, &comms, month(1), 2);
        assert_eq!(g.edges.get(&("A".into(), "B".into())), Some(&Some(1)));

        let act = activity(&[("u1", "A", 3), ("u2", "B", 5)]);
        let g = build_inter_graph(&act, &comms, month(1), 2);
        assert_eq!(g.n_edges(), 0);
        assert_eq!(g.n_nodes(), 2);
    }

    #[test]
    fn inter_graph_ignores_unretained_communities() {
        let comms: BTreeSet<String> = ["A", "B"].iter().map(|s| s.to_string()).collect();
        let act = activity(&[("u1", "A", 3), ("u1", "Z", 3)]);
        let g = build_inter_graph(&act, &comms, month(1), 2);
        assert_eq!(g.n_edges(), 0);
        assert!(!g.nodes.contains("Z"));
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::seq::SliceRandom;
        use rand::{Rng, SeedableRng};

        fn random_thread(seed: u64, n: usize) -> Vec<CommentRecord> {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut out: Vec<CommentRecord> = Vec::new();
            for i in 0..n {
                let parent = if i == 0 || rng.random_bool(0.2) {
                    None
                } else {
                    Some(format!("c{}", rng.random_range(0..i)))
                };
                let m = 1 + (i / 6) as u32;
                let mut rec = c(&format!("c{i}"), &format!("u{}", rng.random_range(0..8)), None, m.min(12));
                rec.parent_id = parent;
                out.push(rec);
            }
            out
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            #[test]
            fn drg_within_proximity_within_tg(seed in any::<u64>(), n in 1usize..30) {
                let cs = random_thread(seed, n);
                let (drg, _) = build_intra_graphs(&cs, "c", GraphVariantKind::Drg).unwrap();
                let (p2, _) = build_intra_graphs(&cs, "c", GraphVariantKind::Proximity2).unwrap();
                let (tg, _) = build_intra_graphs(&cs, "c", GraphVariantKind::Tg).unwrap();
                for (m, g) in &drg {
                    for e in g.edges.keys() {
                        prop_assert!(p2[m].edges.contains_key(e));
                    }
                }
                for (m, g) in &p2 {
                    for e in g.edges.keys() {
                        prop_assert!(tg[m].edges.contains_key(e));
                    }
                    for (a, b) in g.edges.keys() {
                        prop_assert!(g.nodes.contains(a) && g.nodes.contains(b));
                    }
                }
            }

            #[test]
            fn order_independent(seed in any::<u64>(), n in 1usize..30) {
                let cs = random_thread(seed, n);
                let mut shuffled = cs.clone();
                shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed ^ 1));
                let (a, _) = build_intra_graphs(&cs, "c", GraphVariantKind::Proximity2).unwrap();
                let (b, _) = build_intra_graphs(&shuffled, "c", GraphVariantKind::Proximity2).unwrap();
                prop_assert_eq!(a, b);
            }
        }
    }
}
