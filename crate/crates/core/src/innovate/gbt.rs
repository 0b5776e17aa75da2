//! Histogram gradient boosted regression trees with Poisson loss on the log
//! link. Features are quantile-binned once; each tree is grown depth-first on
//! Newton gradients and hessians of the Poisson deviance.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const MAX_RAW: f64 = 700.0;
const MIN_HESSIAN: f64 = 1e-3;
const INIT_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default)]
pub struct GbtConfig {
    pub n_trees: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub max_bins: usize,
    pub min_samples_leaf: usize,
    pub l2: f64,
}

impl Default for GbtConfig {
    fn default() -> Self {
        GbtConfig {
            n_trees: 100,
            learning_rate: 0.1,
            max_depth: 5,
            max_bins: 256,
            min_samples_leaf: 20,
            l2: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TreeNode {
    Split {
        feature: usize,
        /// Rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                TreeNode::Leaf { value } => return *value,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if x[*feature] <= *threshold { *left } else { *right };
                }
            }
        }
    }

    fn scale_leaves(&mut self, f: f64) {
        for n in self.nodes.iter_mut() {
            if let TreeNode::Leaf { value } = n {
                *value *= f;
            }
        }
    }

    pub fn root_split(&self) -> Option<(usize, f64)> {
        match self.nodes.first() {
            Some(TreeNode::Split {
                feature, threshold, ..
            }) => Some((*feature, *threshold)),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbtModel {
    /// Initial raw (log-mean) prediction.
    pub init: f64,
    pub trees: Vec<Tree>,
    pub learning_rate: f64,
    pub n_features: usize,
    /// Training Poisson deviance (up to a constant) after each tree,
    /// starting with the initial prediction.
    pub train_loss_trace: Vec<f64>,
}

impl GbtModel {
    pub fn raw_predict(&self, x: &[f64]) -> f64 {
        self.init + self.trees.iter().map(|t| t.predict(x)).sum::<f64>()
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.raw_predict(x).min(MAX_RAW).exp()
    }

    pub fn predict(&self, rows: &[Vec<f64>]) -> Vec<f64> {
        rows.iter().map(|r| self.predict_row(r)).collect()
    }
}

/// Quantile bin edges of one feature: bin `b` holds values in
/// `(edges[b-1], edges[b]]`. Edges are observed values, so the binning
/// depends only on the ranks of the data.
fn bin_edges(values: &[f64], max_bins: usize) -> Vec<f64> {
    let mut sorted: Vec<f64> = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if distinct.len() <= max_bins {
        return distinct;
    }
    let n = sorted.len();
    let mut edges: Vec<f64> = (1..=max_bins)
        .map(|b| sorted[((b * n).div_ceil(max_bins)).clamp(1, n) - 1])
        .collect();
    edges.dedup();
    edges
}

fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|e| *e < x).min(edges.len() - 1)
}

/// `sum(mu - y * raw)`, the Poisson negative log-likelihood up to a constant.
fn poisson_loss(raw: &[f64], y: &[f64]) -> f64 {
    raw.iter()
        .zip(y)
        .map(|(r, yi)| r.min(MAX_RAW).exp() - yi * r)
        .sum()
}

struct Grower<'a> {
    binned: &'a [Vec<u16>],
    edges: &'a [Vec<f64>],
    grad: &'a [f64],
    hess: &'a [f64],
    cfg: &'a GbtConfig,
    nodes: Vec<TreeNode>,
}

impl Grower<'_> {
    fn leaf_value(&self, rows: &[usize]) -> f64 {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        -g / (h.max(MIN_HESSIAN) + self.cfg.l2) * self.cfg.learning_rate
    }

    fn best_split(&self, rows: &[usize]) -> Option<(usize, usize, f64)> {
        let g_tot: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_tot: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let l2 = self.cfg.l2;
        let parent = g_tot * g_tot / (h_tot + l2).max(MIN_HESSIAN);
        let mut best: Option<(usize, usize, f64)> = None;
        for (f, edges) in self.edges.iter().enumerate() {
            let nb = edges.len();
            if nb < 2 {
                continue;
            }
            let mut hg = vec![0.0; nb];
            let mut hh = vec![0.0; nb];
            let mut hc = vec![0usize; nb];
            for &i in rows {
                let b = self.binned[f][i] as usize;
                hg[b] += self.grad[i];
                hh[b] += self.hess[i];
                hc[b] += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                gl += hg[b];
                hl += hh[b];
                cl += hc[b];
                let cr = rows.len() - cl;
                if cl < self.cfg.min_samples_leaf || cr < self.cfg.min_samples_leaf {
                    continue;
                }
                if hc[b] == 0 {
                    continue;
                }
                let (gr, hr) = (g_tot - gl, h_tot - hl);
                let gain = gl * gl / (hl + l2).max(MIN_HESSIAN)
                    + gr * gr / (hr + l2).max(MIN_HESSIAN)
                    - parent;
                if gain > 1e-12 && best.is_none_or(|(_, _, g)| gain > g) {
                    best = Some((f, b, gain));
                }
            }
        }
        best
    }

    fn grow(&mut self, rows: Vec<usize>, depth: usize) -> usize {
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf { value: 0.0 });
        let split = if depth < self.cfg.max_depth && rows.len() >= 2 * self.cfg.min_samples_leaf {
            self.best_split(&rows)
        } else {
            None
        };
        match split {
            None => {
                self.nodes[id] = TreeNode::Leaf {
                    value: self.leaf_value(&rows),
                };
            }
            Some((f, b, _)) => {
                let (l, r): (Vec<usize>, Vec<usize>) =
                    rows.iter().partition(|&&i| self.binned[f][i] as usize <= b);
                let left = self.grow(l, depth + 1);
                let right = self.grow(r, depth + 1);
                self.nodes[id] = TreeNode::Split {
                    feature: f,
                    threshold: self.edges[f][b],
                    left,
                    right,
                };
            }
        }
        id
    }
}

/// Fits boosted trees to non-negative counts. Each tree's contribution is
/// halved until the training loss does not increase, so the loss trace is
/// monotone.
pub fn fit_gbt_poisson(x: &[Vec<f64>], y: &[f64], cfg: &GbtConfig) -> Result<GbtModel> {
    if x.len() != y.len() || x.is_empty() {
        return Err(Error::InvalidInput("X and y must be non-empty and equal length".into()));
    }
    if y.iter().any(|&v| v < 0.0 || !v.is_finite()) {
        return Err(Error::InvalidInput("Poisson targets must be non-negative".into()));
    }
    if cfg.max_bins < 2 || cfg.max_bins > u16::MAX as usize {
        return Err(Error::InvalidInput("max_bins must be in 2..=65535".into()));
    }
    let d = x[0].len();
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("ragged design matrix".into()));
    }
    let n = x.len();
    let edges: Vec<Vec<f64>> = (0..d)
        .map(|f| bin_edges(&x.iter().map(|r| r[f]).collect::<Vec<_>>(), cfg.max_bins))
        .collect();
    let binned: Vec<Vec<u16>> = (0..d)
        .map(|f| x.iter().map(|r| bin_of(&edges[f], r[f]) as u16).collect())
        .collect();

    let mean = y.iter().sum::<f64>() / n as f64;
    let init = (mean + INIT_EPS).ln();
    let mut raw = vec![init; n];
    let mut loss = poisson_loss(&raw, y);
    let mut trace = vec![loss];
    let mut trees = Vec::with_capacity(cfg.n_trees);

    for _ in 0..cfg.n_trees {
        let mu: Vec<f64> = raw.iter().map(|r| r.min(MAX_RAW).exp()).collect();
        let grad: Vec<f64> = mu.iter().zip(y).map(|(m, yi)| m - yi).collect();
        let mut grower = Grower {
            binned: &binned,
            edges: &edges,
            grad: &grad,
            hess: &mu,
            cfg,
            nodes: Vec::new(),
        };
        grower.grow((0..n).collect(), 0);
        let mut tree = Tree {
            nodes: grower.nodes,
        };
        let contrib: Vec<f64> = x.iter().map(|r| tree.predict(r)).collect();
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let cand: Vec<f64> = raw.iter().zip(&contrib).map(|(r, c)| r + scale * c).collect();
            let cl = poisson_loss(&cand, y);
            if cl <= loss {
                raw = cand;
                loss = cl;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
        if scale != 1.0 {
            tree.scale_leaves(scale);
        }
        trace.push(loss);
        trees.push(tree);
    }
    Ok(GbtModel {
        init,
        trees,
        learning_rate: cfg.learning_rate,
        n_features: d,
        train_loss_trace: trace,
    })
}
