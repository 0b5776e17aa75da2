use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::month::MonthKey;

/// Scope name used for the community-level graph.
pub const INTER_SCOPE: &str = "INTER";

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GraphKey {
    /// Community name, or [`INTER_SCOPE`].
    pub scope: String,
    pub month: MonthKey,
}

/// Undirected snapshot graph. Edges are stored with the lexicographically
/// smaller endpoint first; intra graphs carry no weights, inter graphs carry
/// positive integer weights.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnapshotGraph {
    pub key: GraphKey,
    pub nodes: BTreeSet<String>,
    pub edges: BTreeMap<(String, String), Option<u32>>,
}

impl SnapshotGraph {
    pub fn new(key: GraphKey) -> Self {
        SnapshotGraph {
            key,
            nodes: BTreeSet::new(),
            edges: BTreeMap::new(),
        }
    }

    pub fn add_node(&mut self, n: &str) {
        if !self.nodes.contains(n) {
            self.nodes.insert(n.to_string());
        }
    }

    /// Adds an undirected edge; self-loops are ignored. Returns whether the
    /// edge is new.
    pub fn add_edge(&mut self, a: &str, b: &str, weight: Option<u32>) -> bool {
        if a == b {
            return false;
        }
        self.add_node(a);
        self.add_node(b);
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.edges.insert(key, weight).is_none()
    }

    pub fn n_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: &str, b: &str) -> bool {
        let key = if a < b {
            (a.to_string(), b.to_string())
        } else {
            (b.to_string(), a.to_string())
        };
        self.edges.contains_key(&key)
    }

    pub fn degree_multiset(&self) -> Vec<usize> {
        let idx = self.to_indexed();
        let mut d: Vec<usize> = idx.adj.iter().map(Vec::len).collect();
        d.sort_unstable();
        d
    }

    pub fn to_indexed(&self) -> IndexedGraph {
        let names: Vec<String> = self.nodes.iter().cloned().collect();
        let pos: HashMap<&str, usize> = names
            .iter()
            .enumerate()
            .map(|(i, n)| (n.as_str(), i))
            .collect();
        let mut adj = vec![Vec::new(); names.len()];
        let mut weights = vec![Vec::new(); names.len()];
        for ((a, b), w) in &self.edges {
            let (i, j) = (pos[a.as_str()], pos[b.as_str()]);
            let w = w.map(f64::from).unwrap_or(1.0);
            adj[i].push(j);
            adj[j].push(i);
            weights[i].push(w);
            weights[j].push(w);
        }
        IndexedGraph {
            names,
            adj,
            weights,
        }
    }

    /// Edge-list text: a `# scope month nodes edges` header, sorted `u v [w]`
    /// lines, then an `# isolated` section listing zero-degree nodes.
    pub fn to_edge_list(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "# {} {} {} {}",
            self.key.scope,
            self.key.month,
            self.n_nodes(),
            self.n_edges()
        );
        let mut touched = BTreeSet::new();
        for ((a, b), w) in &self.edges {
            touched.insert(a.as_str());
            touched.insert(b.as_str());
            match w {
                Some(w) => writeln!(out, "{a} {b} {w}"),
                None => writeln!(out, "{a} {b}"),
            }
            .expect("write to string");
        }
        out.push_str("# isolated\n");
        for n in &self.nodes {
            if !touched.contains(n.as_str()) {
                out.push_str(n);
                out.push('\n');
            }
        }
        out
    }

    pub fn from_edge_list(text: &str) -> crate::Result<Self> {
        let bad = |msg: &str| crate::Error::InvalidInput(format!("edge list: {msg}"));
        let mut lines = text.lines();
        let header = lines.next().ok_or_else(|| bad("empty"))?;
        let fields: Vec<&str> = header
            .strip_prefix("# ")
            .ok_or_else(|| bad("missing header"))?
            .split(' ')
            .collect();
        if fields.len() != 4 {
            return Err(bad("header needs 4 fields"));
        }
        let mut g = SnapshotGraph::new(GraphKey {
            scope: fields[0].to_string(),
            month: fields[1].parse()?,
        });
        let mut isolated = false;
        for line in lines {
            if line == "# isolated" {
                isolated = true;
                continue;
            }
            if isolated {
                g.add_node(line);
                continue;
            }
            let parts: Vec<&str> = line.split(' ').collect();
            match parts.as_slice() {
                [a, b] => {
                    g.add_edge(a, b, None);
                }
                [a, b, w] => {
                    let w = w.parse().map_err(|_| bad("bad weight"))?;
                    g.add_edge(a, b, Some(w));
                }
                _ => return Err(bad("bad edge line")),
            }
        }
        Ok(g)
    }
}

/// Adjacency-list view with dense node indices (sorted by name).
#[derive(Debug, Clone)]
pub struct IndexedGraph {
    pub names: Vec<String>,
    pub adj: Vec<Vec<usize>>,
    pub weights: Vec<Vec<f64>>,
}

impl IndexedGraph {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Self {
        let mut adj = vec![Vec::new(); n];
        let mut weights = vec![Vec::new(); n];
        for &(a, b) in edges {
            adj[a].push(b);
            adj[b].push(a);
            weights[a].push(1.0);
            weights[b].push(1.0);
        }
        IndexedGraph {
            names: (0..n).map(|i| i.to_string()).collect(),
            adj,
            weights,
        }
    }

    pub fn n(&self) -> usize {
        self.adj.len()
    }

    pub fn n_edges(&self) -> usize {
        self.adj.iter().map(Vec::len).sum::<usize>() / 2
    }

    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.n_edges());
        for (i, nb) in self.adj.iter().enumerate() {
            for &j in nb {
                if i < j {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn key() -> GraphKey {
        GraphKey {
            scope: "c".into(),
            month: MonthKey::new(2010, 1).unwrap(),
        }
    }

    #[test]
    fn no_self_loops_or_duplicates() {
        let mut g = SnapshotGraph::new(key());
        assert!(!g.add_edge("a", "a", None));
        assert!(g.add_edge("b", "a", None));
        assert!(!g.add_edge("a", "b", None));
        assert_eq!(g.n_edges(), 1);
        assert!(g.has_edge("a", "b"));
    }

    #[test]
    fn edge_list_is_sorted_and_parses_back() {
        let mut g = SnapshotGraph::new(key());
        g.add_edge("zed", "amy", Some(3));
        g.add_edge("bob", "amy", Some(1));
        g.add_node("loner");
        let text = g.to_edge_list();
        assert_eq!(
            text,
            "# c 2010-01 4 2\namy bob 1\namy zed 3\n# isolated\nloner\n"
        );
        assert_eq!(SnapshotGraph::from_edge_list(&text).unwrap(), g);
    }
}
