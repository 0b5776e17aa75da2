//! Node centralities on the community graph. Path-based measures use hop
//! counts; eigenvector and PageRank use edge weights.

use std::collections::{BTreeMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::graph::{IndexedGraph, SnapshotGraph};

const TOL: f64 = 1e-10;
const MAX_ITER: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterCentralities {
    pub degree: f64,
    pub closeness: f64,
    pub eigenvector: f64,
    pub betweenness: f64,
    pub pagerank: f64,
}

pub fn degree_centrality(g: &IndexedGraph) -> Vec<f64> {
    let n = g.n();
    if n <= 1 {
        return vec![0.0; n];
    }
    g.adj
        .iter()
        .map(|nb| nb.len() as f64 / (n - 1) as f64)
        .collect()
}

fn bfs(g: &IndexedGraph, s: usize) -> Vec<Option<usize>> {
    let mut dist = vec![None; g.n()];
    dist[s] = Some(0);
    let mut q = VecDeque::from([s]);
    while let Some(v) = q.pop_front() {
        let dv = dist[v].unwrap();
        for &u in &g.adj[v] {
            if dist[u].is_none() {
                dist[u] = Some(dv + 1);
                q.push_back(u);
            }
        }
    }
    dist
}

/// Reachable-node count over total hop distance, within the node's component.
pub fn closeness(g: &IndexedGraph) -> Vec<f64> {
    (0..g.n())
        .map(|s| {
            let dist = bfs(g, s);
            let (reach, total) = dist
                .iter()
                .enumerate()
                .filter(|(v, _)| *v != s)
                .filter_map(|(_, d)| *d)
                .fold((0usize, 0usize), |(r, t), d| (r + 1, t + d));
            if total == 0 {
                0.0
            } else {
                reach as f64 / total as f64
            }
        })
        .collect()
}

/// Brandes accumulation over unweighted shortest paths, normalised by the
/// number of unordered pairs excluding the node, `(N-1)(N-2)/2`.
pub fn betweenness(g: &IndexedGraph) -> Vec<f64> {
    let n = g.n();
    let mut cb = vec![0.0; n];
    for s in 0..n {
        let mut stack = Vec::with_capacity(n);
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); n];
        let mut sigma = vec![0.0f64; n];
        let mut dist = vec![-1i64; n];
        sigma[s] = 1.0;
        dist[s] = 0;
        let mut q = VecDeque::from([s]);
        while let Some(v) = q.pop_front() {
            stack.push(v);
            for &w in &g.adj[v] {
                if dist[w] < 0 {
                    dist[w] = dist[v] + 1;
                    q.push_back(w);
                }
                if dist[w] == dist[v] + 1 {
                    sigma[w] += sigma[v];
                    preds[w].push(v);
                }
            }
        }
        let mut delta = vec![0.0f64; n];
        while let Some(w) = stack.pop() {
            for &v in &preds[w] {
                delta[v] += sigma[v] / sigma[w] * (1.0 + delta[w]);
            }
            if w != s {
                cb[w] += delta[w];
            }
        }
    }
    if n < 3 {
        return vec![0.0; n];
    }
    // Each unordered pair was counted from both ends.
    let scale = 1.0 / ((n - 1) as f64 * (n - 2) as f64);
    cb.iter().map(|c| c * scale).collect()
}

/// Principal eigenvector of the weighted adjacency matrix, unit Euclidean
/// norm. Iterates `x <- (A + I) x`, which has the same eigenvectors and
/// converges on bipartite graphs too.
pub fn eigenvector(g: &IndexedGraph) -> Vec<f64> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    for _ in 0..MAX_ITER {
        let mut next = x.clone();
        for v in 0..n {
            for (k, &u) in g.adj[v].iter().enumerate() {
                next[v] += g.weights[v][k] * x[u];
            }
        }
        let norm = next.iter().map(|v| v * v).sum::<f64>().sqrt();
        for v in next.iter_mut() {
            *v /= norm;
        }
        let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if diff < n as f64 * TOL {
            break;
        }
    }
    x
}

/// Weighted PageRank with uniform teleportation; dangling mass is spread
/// uniformly.
pub fn pagerank(g: &IndexedGraph, damping: f64) -> Vec<f64> {
    let n = g.n();
    if n == 0 {
        return Vec::new();
    }
    let nf = n as f64;
    let strength: Vec<f64> = g.weights.iter().map(|w| w.iter().sum()).collect();
    let mut x = vec![1.0 / nf; n];
    for _ in 0..MAX_ITER {
        let dangling: f64 = (0..n).filter(|&v| strength[v] == 0.0).map(|v| x[v]).sum();
        let base = (1.0 - damping) / nf + damping * dangling / nf;
        let mut next = vec![base; n];
        for v in 0..n {
            if strength[v] == 0.0 {
                continue;
            }
            let share = damping * x[v] / strength[v];
            for (k, &u) in g.adj[v].iter().enumerate() {
                next[u] += share * g.weights[v][k];
            }
        }
        let diff: f64 = next.iter().zip(&x).map(|(a, b)| (a - b).abs()).sum();
        x = next;
        if diff < TOL {
            break;
        }
    }
    x
}

/// All five centralities for every community in the graph.
pub fn inter_centralities(g: &SnapshotGraph, damping: f64) -> BTreeMap<String, InterCentralities> {
    let ig = g.to_indexed();
    let dc = degree_centrality(&ig);
    let cc = closeness(&ig);
    let ec = eigenvector(&ig);
    let bc = betweenness(&ig);
    let pr = pagerank(&ig, damping);
    ig.names
        .iter()
        .enumerate()
        .map(|(i, name)| {
            (
                name.clone(),
                InterCentralities {
                    degree: dc[i],
                    closeness: cc[i],
                    eigenvector: ec[i],
                    betweenness: bc[i],
                    pagerank: pr[i],
                },
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKey;
    use crate::month::MonthKey;

    #[test]
    fn c5_pagerank_uniform() {
        let g = IndexedGraph::from_edges(5, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 0)]);
        for p in pagerank(&g, 0.85) {
            assert!((p - 0.2).abs() < 1e-12);
        }
    }

    #[test]
    fn star_degree_centrality() {
        let g = IndexedGraph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]);
        let d = degree_centrality(&g);
        assert_eq!(d[0], 1.0);
        assert!(d[1..].iter().all(|&x| x == 0.25));
        let b = betweenness(&g);
        assert!((b[0] - 1.0).abs() < 1e-12);
        assert!(b[1..].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn path_closeness() {
        let g = IndexedGraph::from_edges(3, &[(0, 1), (1, 2)]);
        let c = closeness(&g);
        assert!((c[0] - 2.0 / 3.0).abs() < 1e-12);
        assert!((c[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn isolated_nodes_and_components() {
        let g = IndexedGraph::from_edges(4, &[(0, 1)]);
        let c = closeness(&g);
        assert_eq!(c[2], 0.0);
        assert_eq!(c[0], 1.0);
        let pr = pagerank(&g, 0.85);
        assert!((pr.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert!(pr.iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn empty_graph_gives_empty_map() {
        let g = SnapshotGraph::new(GraphKey {
            scope: "INTER".into(),
            month: MonthKey::new(2010, 1).unwrap(),
        });
        assert!(inter_centralities(&g, 0.85).is_empty());
    }

    #[test]
    fn weights_shift_pagerank() {
        let mut g = SnapshotGraph::new(GraphKey {
            scope: "INTER".into(),
            month: MonthKey::new(2010, 1).unwrap(),
        });
        g.add_edge("a", "b", Some(10));
        g.add_edge("b", "c", Some(1));
        let c = inter_centralities(&g, 0.85);
        assert!(c["a"].pagerank > c["c"].pagerank);
        assert!(c["a"].eigenvector > c["c"].eigenvector);
        // hop-based measures ignore weights
        assert_eq!(c["a"].closeness, c["c"].closeness);
    }
}
