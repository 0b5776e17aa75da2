//! Structural features of snapshot graphs.

mod centrality;
mod intra;
mod rank;
mod rewire;

pub use centrality::{
    betweenness, closeness, degree_centrality, eigenvector, inter_centralities, pagerank,
    InterCentralities,
};
pub use intra::{
    adjust, assortativity, intra_features, local_clustering, structure, transitivity,
    AdjustMode, IntraFeatures, NullModelSummary, RawStructure, ADJUST_EPS, NULL_BASELINES,
};
pub use rank::{average_ranks, kendall_tau, pearson, spearman_rho};
pub use rewire::{double_edge_swap, rewire_null, RewireOutcome};

use serde::{Deserialize, Serialize};

use crate::month::MonthKey;

/// Column order of the feature table.
pub const FEATURE_NAMES: [&str; 15] = [
    "n_nodes",
    "n_edges",
    "density",
    "avg_degree",
    "max_degree",
    "lcc_fraction",
    "singleton_fraction",
    "adj_local_clustering",
    "adj_transitivity",
    "adj_assortativity",
    "degree_centrality",
    "closeness_centrality",
    "eigenvector_centrality",
    "betweenness_centrality",
    "pagerank",
];

/// The fifteen features of one (community, month). Inter-community features
/// are `None` when the community is absent from that month's community graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub community: String,
    pub month: MonthKey,
    pub intra: IntraFeatures,
    pub inter: Option<InterCentralities>,
}

impl FeatureVector {
    pub fn values(&self) -> [Option<f64>; 15] {
        let i = &self.intra;
        let (dc, cc, ec, bc, pr) = match &self.inter {
            Some(c) => (
                Some(c.degree),
                Some(c.closeness),
                Some(c.eigenvector),
                Some(c.betweenness),
                Some(c.pagerank),
            ),
            None => (None, None, None, None, None),
        };
        [
            Some(i.n_nodes),
            Some(i.n_edges),
            Some(i.density),
            Some(i.avg_degree),
            Some(i.max_degree),
            Some(i.lcc_fraction),
            Some(i.singleton_fraction),
            Some(i.adj_local_clustering),
            Some(i.adj_transitivity),
            Some(i.adj_assortativity),
            dc,
            cc,
            ec,
            bc,
            pr,
        ]
    }

    /// All fifteen values, or `None` if any is missing.
    pub fn complete(&self) -> Option<Vec<f64>> {
        self.values().into_iter().collect()
    }
}

/// Tab-separated feature table; missing values are written as `NA`.
pub fn feature_table_tsv(rows: &[FeatureVector]) -> String {
    let mut s = String::from("community\tyear\tmonth");
    for n in FEATURE_NAMES {
        s.push('\t');
        s.push_str(n);
    }
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{}\t{}\t{}", r.community, r.month.year, r.month.month));
        for v in r.values() {
            match v {
                Some(v) => s.push_str(&format!("\t{v}")),
                None => s.push_str("\tNA"),
            }
        }
        s.push('\n');
    }
    s
}
