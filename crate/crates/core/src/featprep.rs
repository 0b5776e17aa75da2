//! Log transform, standardization and PCA whitening of feature matrices.
//!
//! Matrices are row-major `&[Vec<f64>]`, one row per sample.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::jacobi_eigen;
use crate::netstats::FEATURE_NAMES;

pub const LOG_OFFSET: f64 = 1e-6;

/// Features that are heavily skewed and get `ln(x + 1e-6)`.
pub const LOG_FEATURES: [&str; 10] = [
    "n_nodes",
    "n_edges",
    "density",
    "avg_degree",
    "max_degree",
    "degree_centrality",
    "closeness_centrality",
    "pagerank",
    "betweenness_centrality",
    "eigenvector_centrality",
];

const JACOBI_TOL: f64 = 1e-12;

/// Applies the log transform to the listed columns of a row laid out in
/// [`FEATURE_NAMES`] order.
pub fn log_transform(row: &[f64]) -> Result<Vec<f64>> {
    log_transform_named(row, &FEATURE_NAMES)
}

pub fn log_transform_named(row: &[f64], names: &[&str]) -> Result<Vec<f64>> {
    if row.len() != names.len() {
        return Err(Error::InvalidInput(format!(
            "row has {} values for {} feature names",
            row.len(),
            names.len()
        )));
    }
    row.iter()
        .zip(names)
        .map(|(&x, name)| {
            if !LOG_FEATURES.contains(name) {
                Ok(x)
            } else if x < 0.0 {
                Err(Error::InvalidInput(format!(
                    "negative value {x} in log-transformed feature {name}"
                )))
            } else {
                Ok((x + LOG_OFFSET).ln())
            }
        })
        .collect()
}

fn check_rect(rows: &[Vec<f64>]) -> Result<usize> {
    let d = rows.first().map(Vec::len).unwrap_or(0);
    if rows.iter().any(|r| r.len() != d) {
        return Err(Error::InvalidInput("ragged matrix".into()));
    }
    Ok(d)
}

/// Per-column mean and sample standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub names: Vec<String>,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl Standardizer {
    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.stds))
            .map(|(x, (m, s))| (x - m) / s)
            .collect()
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }
}

/// Centres each column and scales it to unit sample standard deviation.
/// `names` label the columns in errors; pass an empty slice for `col{i}`.
pub fn fit_standardize(rows: &[Vec<f64>], names: &[&str]) -> Result<(Standardizer, Vec<Vec<f64>>)> {
    let d = check_rect(rows)?;
    if rows.len() < 2 {
        return Err(Error::InvalidInput("standardization needs at least 2 rows".into()));
    }
    let names: Vec<String> = (0..d)
        .map(|j| {
            names
                .get(j)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("col{j}"))
        })
        .collect();
    let n = rows.len() as f64;
    let mut means = vec![0.0; d];
    let mut stds = vec![0.0; d];
    for j in 0..d {
        let m = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - m).powi(2)).sum::<f64>() / (n - 1.0);
        if var <= f64::EPSILON * m.abs().max(1.0) * 1e-3 {
            return Err(Error::ZeroVariance(names[j].clone()));
        }
        means[j] = m;
        stds[j] = var.sqrt();
    }
    let st = Standardizer { names, means, stds };
    let out = st.transform(rows);
    Ok((st, out))
}

/// Fitted standardization plus whitened principal components.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    pub standardizer: Standardizer,
    /// `k` rows, one unit-norm loading vector per component.
    pub loadings: Vec<Vec<f64>>,
    /// Eigenvalues of the retained components (sample covariance scale).
    pub eigenvalues: Vec<f64>,
    /// Explained-variance ratio of every component (not only retained ones).
    pub explained_variance_ratio: Vec<f64>,
    pub k: usize,
}

/// Principal components of a standardized matrix, whitened to unit variance.
///
/// Components are sorted by eigenvalue, and each is signed so that its
/// largest-magnitude loading is positive.
pub fn fit_pca_whiten(standardizer: Standardizer, standardized: &[Vec<f64>], k: usize) -> Result<PcaModel> {
    let d = check_rect(standardized)?;
    let n = standardized.len();
    if k == 0 || k > d {
        return Err(Error::InvalidInput(format!("k = {k} must be in 1..={d}")));
    }
    if n < 2 {
        return Err(Error::InvalidInput("PCA needs at least 2 rows".into()));
    }
    let means: Vec<f64> = (0..d)
        .map(|j| standardized.iter().map(|r| r[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for r in standardized {
        for i in 0..d {
            let ci = r[i] - means[i];
            for j in i..d {
                cov[i][j] += ci * (r[j] - means[j]);
            }
        }
    }
    for i in 0..d {
        for j in i..d {
            cov[i][j] /= (n - 1) as f64;
            cov[j][i] = cov[i][j];
        }
    }
    let (vals, vecs) = jacobi_eigen(&cov, JACOBI_TOL);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| vals[b].total_cmp(&vals[a]));

    let total: f64 = vals.iter().map(|v| v.max(0.0)).sum();
    let top = vals[order[0]].max(0.0);
    let rank = order
        .iter()
        .filter(|&&i| vals[i] > top * 1e-10 && vals[i] > 0.0)
        .count();
    if k > rank {
        return Err(Error::RankDeficient { requested: k, rank });
    }
    let explained_variance_ratio = order.iter().map(|&i| vals[i].max(0.0) / total).collect();
    let mut loadings = Vec::with_capacity(k);
    let mut eigenvalues = Vec::with_capacity(k);
    for &c in order.iter().take(k) {
        let mut v: Vec<f64> = (0..d).map(|r| vecs[r][c]).collect();
        let lead = v
            .iter()
            .copied()
            .max_by(|a, b| a.abs().total_cmp(&b.abs()))
            .unwrap_or(0.0);
        if lead < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        loadings.push(v);
        eigenvalues.push(vals[c]);
    }
    Ok(PcaModel {
        standardizer,
        loadings,
        eigenvalues,
        explained_variance_ratio,
        k,
    })
}

impl PcaModel {
    /// Standardizes and then fits on raw rows.
    pub fn fit(rows: &[Vec<f64>], names: &[&str], k: usize) -> Result<Self> {
        let (st, z) = fit_standardize(rows, names)?;
        fit_pca_whiten(st, &z, k)
    }

    /// Whitened scores of already-standardized rows.
    pub fn project_standardized(&self, z: &[f64]) -> Vec<f64> {
        self.loadings
            .iter()
            .zip(&self.eigenvalues)
            .map(|(l, ev)| l.iter().zip(z).map(|(a, b)| a * b).sum::<f64>() / ev.sqrt())
            .collect()
    }

    /// Whitened scores of raw rows.
    pub fn apply(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| self.project_standardized(&self.standardizer.transform_row(r)))
            .collect()
    }

    /// Maps whitened scores back to standardized feature space.
    pub fn reconstruct_standardized(&self, scores: &[f64]) -> Vec<f64> {
        let d = self.standardizer.means.len();
        let mut out = vec![0.0; d];
        for ((s, l), ev) in scores.iter().zip(&self.loadings).zip(&self.eigenvalues) {
            let a = s * ev.sqrt();
            for (o, li) in out.iter_mut().zip(l) {
                *o += a * li;
            }
        }
        out
    }

    pub fn cumulative_explained(&self, k: usize) -> f64 {
        self.explained_variance_ratio.iter().take(k).sum()
    }

    /// `component\t<feature>...` table of loadings.
    pub fn loadings_tsv(&self) -> String {
        let mut s = String::from("component");
        for n in &self.standardizer.names {
            s.push('\t');
            s.push_str(n);
        }
        s.push('\n');
        for (i, l) in self.loadings.iter().enumerate() {
            s.push_str(&format!("PC{}", i + 1));
            for v in l {
                s.push_str(&format!("\t{v}"));
            }
            s.push('\n');
        }
        s
    }

    pub fn explained_tsv(&self) -> String {
        let mut s = String::from("component\tratio\tcumulative\n");
        let mut cum = 0.0;
        for (i, r) in self.explained_variance_ratio.iter().enumerate() {
            cum += r;
            s.push_str(&format!("PC{}\t{r}\t{cum}\n", i + 1));
        }
        s
    }
}

/// How model inputs are derived from feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Projection {
    /// Standardized features.
    Raw,
    /// The first `k` whitened principal components.
    Pcs(usize),
}

impl Projection {
    pub fn label(&self) -> String {
        match self {
            Projection::Raw => "raw".to_string(),
            Projection::Pcs(k) => format!("PCs={k}"),
        }
    }
}

/// Standardization (and optionally PCA) fitted on training rows. Columns
/// that are constant in the training rows are dropped, and the number of
/// components is capped at the rank of what remains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesignTransform {
    pub kept: Vec<usize>,
    pub standardizer: Standardizer,
    pub pca: Option<PcaModel>,
}

impl DesignTransform {
    pub fn fit(rows: &[Vec<f64>], names: &[&str], projection: Projection) -> Result<Self> {
        let d = check_rect(rows)?;
        if rows.len() < 2 {
            return Err(Error::InvalidInput("need at least 2 rows".into()));
        }
        let kept: Vec<usize> = (0..d)
            .filter(|&j| {
                let first = rows[0][j];
                rows.iter().any(|r| (r[j] - first).abs() > 1e-12 * first.abs().max(1.0))
            })
            .collect();
        if kept.is_empty() {
            return Err(Error::InvalidInput("every feature column is constant".into()));
        }
        if kept.len() < d {
            log::debug!("dropping {} constant feature columns", d - kept.len());
        }
        let sub: Vec<Vec<f64>> = rows.iter().map(|r| kept.iter().map(|&j| r[j]).collect()).collect();
        let sub_names: Vec<&str> = kept
            .iter()
            .map(|&j| names.get(j).copied().unwrap_or("?"))
            .collect();
        let (standardizer, z) = fit_standardize(&sub, &sub_names)?;
        let pca = match projection {
            Projection::Raw => None,
            Projection::Pcs(k) => {
                let k = k.min(kept.len());
                match fit_pca_whiten(standardizer.clone(), &z, k) {
                    Ok(m) => Some(m),
                    Err(Error::RankDeficient { rank, .. }) if rank > 0 => {
                        log::debug!("capping components at rank {rank}");
                        Some(fit_pca_whiten(standardizer.clone(), &z, rank)?)
                    }
                    Err(e) => return Err(e),
                }
            }
        };
        Ok(DesignTransform {
            kept,
            standardizer,
            pca,
        })
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        let sub: Vec<f64> = self.kept.iter().map(|&j| row[j]).collect();
        let z = self.standardizer.transform_row(&sub);
        match &self.pca {
            None => z,
            Some(p) => p.project_standardized(&z),
        }
    }

    pub fn transform(&self, rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn output_dim(&self) -> usize {
        match &self.pca {
            None => self.kept.len(),
            Some(p) => p.k,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn sample_cov(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let n = rows.len() as f64;
        let d = rows[0].len();
        let m: Vec<f64> = (0..d).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| rows.iter().map(|r| (r[i] - m[i]) * (r[j] - m[j])).sum::<f64>() / (n - 1.0))
                    .collect()
            })
            .collect()
    }

    #[test]
    fn log_examples() {
        let mut row = vec![0.0; 15];
        row[0] = 765.0;
        row[8] = -0.3;
        let out = log_transform(&row).unwrap();
        assert_eq!(out[0], (765.0f64 + 1e-6).ln());
        assert_eq!(out[8], -0.3);
        assert!((out[1] - (-13.815510557964274)).abs() < 1e-9);
        row[1] = -1.0;
        assert!(log_transform(&row).is_err());
    }

    #[test]
    fn standardize_symmetric_column() {
        let rows = vec![vec![1.0], vec![2.0], vec![3.0]];
        let (_, z) = fit_standardize(&rows, &[]).unwrap();
        assert_eq!(z, vec![vec![-1.0], vec![0.0], vec![1.0]]);
        let (_, z2) = fit_standardize(&z, &[]).unwrap();
        for (a, b) in z.iter().zip(&z2) {
            assert!((a[0] - b[0]).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_variance_names_the_column() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0]];
        match fit_standardize(&rows, &["a", "flat"]) {
            Err(Error::ZeroVariance(c)) => assert_eq!(c, "flat"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn random_matrix_is_centred() {
        let mut rng = crate::seed::rng(2);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| (0..15).map(|j| rng.random::<f64>() * (j + 1) as f64 + j as f64).collect())
            .collect();
        let (_, z) = fit_standardize(&rows, &[]).unwrap();
        for j in 0..15 {
            let m: f64 = z.iter().map(|r| r[j]).sum::<f64>() / 100.0;
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn line_has_one_component() {
        let rows: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 2.0 * i as f64 + 1.0]).collect();
        let m = PcaModel::fit(&rows, &[], 1).unwrap();
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
        assert!(PcaModel::fit(&rows, &[], 2).is_err());
    }

    #[test]
    fn isotropic_whitening_large_sample() {
        let mut rng = crate::seed::rng(5);
        let rows: Vec<Vec<f64>> = (0..10_000)
            .map(|_| vec![rng.sample(StandardNormal), rng.sample(StandardNormal)])
            .collect();
        let m = PcaModel::fit(&rows, &[], 2).unwrap();
        let cov = sample_cov(&m.apply(&rows));
        for i in 0..2 {
            for j in 0..2 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((cov[i][j] - target).abs() < 1e-2);
            }
        }
    }

    #[test]
    fn ratios_sorted_and_signs_fixed() {
        let mut rng = crate::seed::rng(8);
        let rows: Vec<Vec<f64>> = (0..200)
            .map(|_| {
                let a: f64 = rng.sample(StandardNormal);
                let b: f64 = rng.sample(StandardNormal);
                vec![a, a + 0.1 * b, -a + 0.5 * b, b, rng.sample(StandardNormal)]
            })
            .collect();
        // five columns but only three independent directions
        assert!(matches!(
            PcaModel::fit(&rows, &[], 5),
            Err(Error::RankDeficient { rank: 3, .. })
        ));
        let m = PcaModel::fit(&rows, &[], 3).unwrap();
        let r = &m.explained_variance_ratio;
        assert!(r.windows(2).all(|w| w[0] >= w[1]));
        assert!(r.iter().sum::<f64>() <= 1.0 + 1e-9);
        for l in &m.loadings {
            let lead = l.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
            assert!(lead > 0.0);
            assert!((l.iter().map(|x| x * x).sum::<f64>() - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn full_reconstruction() {
        let mut rng = crate::seed::rng(13);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..15).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let m = PcaModel::fit(&rows, &[], 15).unwrap();
        let z = m.standardizer.transform(&rows);
        for (raw, zr) in m.apply(&rows).iter().zip(&z) {
            let back = m.reconstruct_standardized(raw);
            for (a, b) in back.iter().zip(zr) {
                assert!((a - b).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn design_transform_drops_constant_columns() {
        let mut rng = crate::seed::rng(31);
        let rows: Vec<Vec<f64>> = (0..40)
            .map(|_| vec![rng.sample(StandardNormal), 7.0, rng.sample(StandardNormal)])
            .collect();
        let raw = DesignTransform::fit(&rows, &["a", "b", "c"], Projection::Raw).unwrap();
        assert_eq!(raw.kept, vec![0, 2]);
        assert_eq!(raw.output_dim(), 2);
        let pcs = DesignTransform::fit(&rows, &[], Projection::Pcs(10)).unwrap();
        assert_eq!(pcs.output_dim(), 2);
        let cov = sample_cov(&pcs.transform(&rows));
        assert!((cov[0][0] - 1.0).abs() < 1e-9 && cov[0][1].abs() < 1e-9);
    }

    #[test]
    fn row_order_does_not_matter() {
        let mut rng = crate::seed::rng(21);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| (0..4).map(|_| rng.sample(StandardNormal)).collect())
            .collect();
        let mut rev = rows.clone();
        rev.reverse();
        let a = PcaModel::fit(&rows, &[], 3).unwrap();
        let b = PcaModel::fit(&rev, &[], 3).unwrap();
        for (la, lb) in a.loadings.iter().zip(&b.loadings) {
            for (x, y) in la.iter().zip(lb) {
                assert!((x - y).abs() < 1e-9);
            }
        }
    }
}
