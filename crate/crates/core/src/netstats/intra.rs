use serde::{Deserialize, Serialize};

use super::rank::pearson;
use super::rewire::rewire_null;
use crate::derive_seed;
use crate::graph::IndexedGraph;

/// Number of rewired baselines behind each adjusted metric.
pub const NULL_BASELINES: usize = 5;
pub const ADJUST_EPS: f64 = 1e-9;

/// Unadjusted structure of one graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RawStructure {
    pub n_nodes: usize,
    pub n_edges: usize,
    pub density: f64,
    pub avg_degree: f64,
    pub max_degree: usize,
    pub lcc_fraction: f64,
    pub singleton_fraction: f64,
    pub local_clustering: f64,
    pub transitivity: f64,
    pub assortativity: f64,
    /// Fewer than two nodes: density reported as 0.
    pub degenerate_density: bool,
    /// No edges or zero degree variance: assortativity reported as 0.
    pub degenerate_assortativity: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NullModelSummary {
    pub metric: String,
    pub null_mean: f64,
    pub null_values: Vec<f64>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntraFeatures {
    pub n_nodes: f64,
    pub n_edges: f64,
    pub density: f64,
    pub avg_degree: f64,
    pub max_degree: f64,
    pub lcc_fraction: f64,
    pub singleton_fraction: f64,
    pub adj_local_clustering: f64,
    pub adj_transitivity: f64,
    pub adj_assortativity: f64,
    pub raw: RawStructure,
    pub nulls: Vec<NullModelSummary>,
    pub unrewirable: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AdjustMode {
    /// `(raw - mean_null) / (|mean_null| + eps)`
    #[default]
    RelativeToNull,
    /// `(raw - mean_null) / (|raw| + eps)`
    RelativeToRaw,
}

pub fn adjust(raw: f64, null_mean: f64, mode: AdjustMode) -> f64 {
    match mode {
        AdjustMode::RelativeToNull => (raw - null_mean) / (null_mean.abs() + ADJUST_EPS),
        AdjustMode::RelativeToRaw => (raw - null_mean) / (raw.abs() + ADJUST_EPS),
    }
}

/// Triangles through each node, using sorted adjacency lists.
fn triangles_per_node(g: &IndexedGraph) -> Vec<usize> {
    let mut sorted: Vec<Vec<usize>> = g.adj.clone();
    for nb in sorted.iter_mut() {
        nb.sort_unstable();
    }
    let mut tri = vec![0usize; g.n()];
    for v in 0..g.n() {
        let mut count = 0;
        for &u in &sorted[v] {
            // |N(v) ∩ N(u)| by merge
            let (a, b) = (&sorted[v], &sorted[u]);
            let (mut i, mut j) = (0, 0);
            while i < a.len() && j < b.len() {
                match a[i].cmp(&b[j]) {
                    std::cmp::Ordering::Less => i += 1,
                    std::cmp::Ordering::Greater => j += 1,
                    std::cmp::Ordering::Equal => {
                        count += 1;
                        i += 1;
                        j += 1;
                    }
                }
            }
        }
        tri[v] = count / 2;
    }
    tri
}

/// Mean over all nodes of the neighbour-pair triangle density; nodes with
/// degree below two contribute 0.
pub fn local_clustering(g: &IndexedGraph) -> f64 {
    if g.n() == 0 {
        return 0.0;
    }
    let tri = triangles_per_node(g);
    let total: f64 = (0..g.n())
        .map(|v| {
            let d = g.adj[v].len();
            if d < 2 {
                0.0
            } else {
                tri[v] as f64 / (d * (d - 1) / 2) as f64
            }
        })
        .sum();
    total / g.n() as f64
}

/// `3 * triangles / connected triples`, 0 when there are no triples.
pub fn transitivity(g: &IndexedGraph) -> f64 {
    let tri: usize = triangles_per_node(g).iter().sum();
    let triples: usize = g
        .adj
        .iter()
        .map(|nb| nb.len() * nb.len().saturating_sub(1) / 2)
        .sum();
    if triples == 0 {
        0.0
    } else {
        tri as f64 / triples as f64
    }
}

/// Degree assortativity; `None` when undefined.
pub fn assortativity(g: &IndexedGraph) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for (v, nb) in g.adj.iter().enumerate() {
        for &u in nb {
            xs.push(g.adj[v].len() as f64);
            ys.push(g.adj[u].len() as f64);
        }
    }
    if xs.is_empty() {
        return None;
    }
    pearson(&xs, &ys).ok()
}

fn component_sizes(g: &IndexedGraph) -> Vec<usize> {
    let mut seen = vec![false; g.n()];
    let mut sizes = Vec::new();
    for s in 0..g.n() {
        if seen[s] {
            continue;
        }
        seen[s] = true;
        let mut stack = vec![s];
        let mut size = 0;
        while let Some(v) = stack.pop() {
            size += 1;
            for &u in &g.adj[v] {
                if !seen[u] {
                    seen[u] = true;
                    stack.push(u);
                }
            }
        }
        sizes.push(size);
    }
    sizes
}

pub fn structure(g: &IndexedGraph) -> RawStructure {
    let n = g.n();
    let m = g.n_edges();
    let nf = n as f64;
    let degenerate_density = n < 2;
    let density = if degenerate_density {
        0.0
    } else {
        2.0 * m as f64 / (nf * (nf - 1.0))
    };
    let sizes = component_sizes(g);
    let assort = assortativity(g);
    RawStructure {
        n_nodes: n,
        n_edges: m,
        density,
        avg_degree: if n == 0 { 0.0 } else { 2.0 * m as f64 / nf },
        max_degree: g.adj.iter().map(Vec::len).max().unwrap_or(0),
        lcc_fraction: if n == 0 {
            0.0
        } else {
            *sizes.iter().max().unwrap_or(&0) as f64 / nf
        },
        singleton_fraction: if n == 0 {
            0.0
        } else {
            g.adj.iter().filter(|nb| nb.is_empty()).count() as f64 / nf
        },
        local_clustering: local_clustering(g),
        transitivity: transitivity(g),
        assortativity: assort.unwrap_or(0.0),
        degenerate_density,
        degenerate_assortativity: assort.is_none(),
    }
}

/// Size, fragmentation and connectedness features of an intra graph, with
/// clustering, transitivity and assortativity expressed relative to five
/// degree-preserving rewired baselines.
pub fn intra_features(g: &IndexedGraph, seed: u64, mode: AdjustMode) -> IntraFeatures {
    let raw = structure(g);
    let mut lc = Vec::with_capacity(NULL_BASELINES);
    let mut tr = Vec::with_capacity(NULL_BASELINES);
    let mut asr = Vec::with_capacity(NULL_BASELINES);
    let mut unrewirable = false;
    for b in 0..NULL_BASELINES {
        let out = rewire_null(g, derive_seed!(seed, "null", b));
        unrewirable |= out.unrewirable;
        lc.push(local_clustering(&out.graph));
        tr.push(transitivity(&out.graph));
        asr.push(assortativity(&out.graph).unwrap_or(0.0));
    }
    let summary = |metric: &str, vals: Vec<f64>| NullModelSummary {
        metric: metric.to_string(),
        null_mean: vals.iter().sum::<f64>() / vals.len() as f64,
        null_values: vals,
        seed,
    };
    let nulls = vec![
        summary("local_clustering", lc),
        summary("transitivity", tr),
        summary("assortativity", asr),
    ];
    IntraFeatures {
        n_nodes: raw.n_nodes as f64,
        n_edges: raw.n_edges as f64,
        density: raw.density,
        avg_degree: raw.avg_degree,
        max_degree: raw.max_degree as f64,
        lcc_fraction: raw.lcc_fraction,
        singleton_fraction: raw.singleton_fraction,
        adj_local_clustering: adjust(raw.local_clustering, nulls[0].null_mean, mode),
        adj_transitivity: adjust(raw.transitivity, nulls[1].null_mean, mode),
        adj_assortativity: adjust(raw.assortativity, nulls[2].null_mean, mode),
        raw,
        nulls,
        unrewirable,
    }
}
