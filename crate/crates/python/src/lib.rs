//! Python bindings for the lexnet pipeline and its estimators.

use std::collections::BTreeMap;
use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use lexnet::featprep;
use lexnet::graph::{GraphKey, IndexedGraph, SnapshotGraph};
use lexnet::innovate;
use lexnet::levelling;
use lexnet::month::MonthKey;
use lexnet::netstats;
use lexnet::pipeline::{Pipeline, RunConfig, Stage, StageOutcome};
use lexnet::survive;
use lexnet::synth;
use lexnet::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyOSError::new_err(e.to_string()),
        Error::Config(_) | Error::InvalidInput(_) | Error::MissingPrerequisite { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn indexed(n: usize, edges: &[(usize, usize)]) -> PyResult<IndexedGraph> {
    if let Some(&(a, b)) = edges.iter().find(|(a, b)| *a >= n || *b >= n || a == b) {
        return Err(PyValueError::new_err(format!("invalid edge ({a}, {b}) for {n} nodes")));
    }
    let mut seen: Vec<(usize, usize)> = edges.iter().map(|&(a, b)| (a.min(b), a.max(b))).collect();
    seen.sort_unstable();
    seen.dedup();
    Ok(IndexedGraph::from_edges(n, &seen))
}

/// Unadjusted structure of an undirected graph on nodes `0..n`.
#[pyfunction]
fn graph_structure(n: usize, edges: Vec<(usize, usize)>) -> PyResult<BTreeMap<String, f64>> {
    let s = netstats::structure(&indexed(n, &edges)?);
    Ok(BTreeMap::from([
        ("n_nodes".into(), s.n_nodes as f64),
        ("n_edges".into(), s.n_edges as f64),
        ("density".into(), s.density),
        ("avg_degree".into(), s.avg_degree),
        ("max_degree".into(), s.max_degree as f64),
        ("lcc_fraction".into(), s.lcc_fraction),
        ("singleton_fraction".into(), s.singleton_fraction),
        ("local_clustering".into(), s.local_clustering),
        ("transitivity".into(), s.transitivity),
        ("assortativity".into(), s.assortativity),
    ]))
}

/// The ten intra-community features, with clustering, transitivity and
/// assortativity adjusted against rewired baselines drawn from `seed`.
#[pyfunction]
fn intra_features(n: usize, edges: Vec<(usize, usize)>, seed: u64) -> PyResult<BTreeMap<String, f64>> {
    let f = netstats::intra_features(&indexed(n, &edges)?, seed, netstats::AdjustMode::default());
    Ok(BTreeMap::from([
        ("n_nodes".into(), f.n_nodes),
        ("n_edges".into(), f.n_edges),
        ("density".into(), f.density),
        ("avg_degree".into(), f.avg_degree),
        ("max_degree".into(), f.max_degree),
        ("lcc_fraction".into(), f.lcc_fraction),
        ("singleton_fraction".into(), f.singleton_fraction),
        ("adj_local_clustering".into(), f.adj_local_clustering),
        ("adj_transitivity".into(), f.adj_transitivity),
        ("adj_assortativity".into(), f.adj_assortativity),
    ]))
}

/// Degree, closeness, eigenvector, betweenness and PageRank for every node
/// of a weighted graph given as `(a, b, weight)` triples.
#[pyfunction]
#[pyo3(signature = (edges, nodes=Vec::new(), damping=0.85))]
fn centralities(
    edges: Vec<(String, String, u32)>,
    nodes: Vec<String>,
    damping: f64,
) -> PyResult<BTreeMap<String, BTreeMap<String, f64>>> {
    let key = GraphKey {
        scope: lexnet::graph::INTER_SCOPE.to_string(),
        month: MonthKey::new(2000, 1).map_err(py_err)?,
    };
    let mut g = SnapshotGraph::new(key);
    for n in &nodes {
        g.add_node(n);
    }
    for (a, b, w) in &edges {
        g.add_edge(a, b, Some(*w));
    }
    Ok(netstats::inter_centralities(&g, damping)
        .into_iter()
        .map(|(name, c)| {
            let m = BTreeMap::from([
                ("degree".to_string(), c.degree),
                ("closeness".to_string(), c.closeness),
                ("eigenvector".to_string(), c.eigenvector),
                ("betweenness".to_string(), c.betweenness),
                ("pagerank".to_string(), c.pagerank),
            ]);
            (name, m)
        })
        .collect())
}

#[pyfunction]
fn kendall_tau(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    netstats::kendall_tau(&xs, &ys).map_err(py_err)
}

#[pyfunction]
fn spearman_rho(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    netstats::spearman_rho(&xs, &ys).map_err(py_err)
}

#[pyfunction]
fn mae(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    innovate::mae(&y, &yhat).map_err(py_err)
}

#[pyfunction]
fn mean_poisson_deviance(y: Vec<f64>, yhat: Vec<f64>) -> PyResult<f64> {
    innovate::mean_poisson_deviance(&y, &yhat).map_err(py_err)
}

/// Logistic Hazard negative log-likelihood of one sample.
#[pyfunction]
fn lh_loss(hazards: Vec<f64>, tau: usize, event: bool) -> PyResult<f64> {
    if tau >= hazards.len() {
        return Err(PyValueError::new_err("tau must index into the hazards"));
    }
    Ok(survive::lh_loss(&hazards, tau, event))
}

#[pyfunction]
fn survival_curve(hazards: Vec<f64>) -> Vec<f64> {
    survive::survival_curve(&hazards)
}

#[pyfunction]
fn concordance_td(curves: Vec<Vec<f64>>, durations: Vec<usize>, events: Vec<bool>) -> PyResult<f64> {
    if curves.iter().zip(&durations).any(|(c, &t)| t >= c.len()) {
        return Err(PyValueError::new_err("every duration must index into its curve"));
    }
    survive::concordance_td(&curves, &durations, &events).map_err(py_err)
}

#[pyfunction]
fn integrated_brier(curves: Vec<Vec<f64>>, durations: Vec<f64>, events: Vec<bool>, times: Vec<f64>) -> PyResult<f64> {
    survive::integrated_brier(&curves, &durations, &events, &times)
        .map(|r| r.ibs)
        .map_err(py_err)
}

/// Continuous power-law exponent; returns `(alpha, x_min, n)`.
#[pyfunction]
#[pyo3(signature = (samples, x_min=None))]
fn fit_powerlaw_alpha(samples: Vec<f64>, x_min: Option<f64>) -> PyResult<(f64, f64, usize)> {
    let f = levelling::fit_powerlaw_alpha(&samples, x_min).map_err(py_err)?;
    Ok((f.alpha, f.x_min, f.n))
}

/// Standardization followed by whitened principal components.
#[pyclass(module = "pylexnet")]
struct PcaModel {
    inner: featprep::PcaModel,
}

#[pymethods]
impl PcaModel {
    #[staticmethod]
    fn fit(rows: Vec<Vec<f64>>, k: usize) -> PyResult<Self> {
        let d = rows.first().map_or(0, Vec::len);
        let names: Vec<String> = (1..=d).map(|i| format!("x{i}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        featprep::PcaModel::fit(&rows, &refs, k)
            .map(|inner| PcaModel { inner })
            .map_err(py_err)
    }

    fn transform(&self, rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
        self.inner.apply(&rows)
    }

    #[getter]
    fn explained_variance_ratio(&self) -> Vec<f64> {
        self.inner.explained_variance_ratio.clone()
    }

    #[getter]
    fn loadings(&self) -> Vec<Vec<f64>> {
        self.inner.loadings.clone()
    }
}

/// L2-penalized Poisson regression fitted by IRLS.
#[pyclass(module = "pylexnet")]
struct PoissonModel {
    inner: innovate::PoissonModel,
}

#[pymethods]
impl PoissonModel {
    #[staticmethod]
    #[pyo3(signature = (x, y, l2=1e-2))]
    fn fit(x: Vec<Vec<f64>>, y: Vec<f64>, l2: f64) -> PyResult<Self> {
        let cfg = innovate::PoissonConfig {
            lambda: l2,
            ..Default::default()
        };
        innovate::fit_poisson_irls(&x, &y, &cfg)
            .map(|inner| PoissonModel { inner })
            .map_err(py_err)
    }

    fn predict(&self, x: Vec<Vec<f64>>) -> Vec<f64> {
        self.inner.predict(&x)
    }

    #[getter]
    fn intercept(&self) -> f64 {
        self.inner.intercept
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn objective_trace(&self) -> Vec<f64> {
        self.inner.objective_trace.clone()
    }
}

/// Cox proportional hazards with Efron ties and a Breslow baseline.
#[pyclass(module = "pylexnet")]
struct CoxModel {
    inner: survive::CoxModel,
}

#[pymethods]
impl CoxModel {
    #[staticmethod]
    fn fit(x: Vec<Vec<f64>>, times: Vec<f64>, events: Vec<bool>) -> PyResult<Self> {
        survive::fit_cox(&x, &times, &events, &survive::CoxConfig::default())
            .map(|inner| CoxModel { inner })
            .map_err(py_err)
    }

    fn survival(&self, x: Vec<f64>, times: Vec<f64>) -> Vec<f64> {
        self.inner.survival(&x, &times)
    }

    #[getter]
    fn coefficients(&self) -> Vec<f64> {
        self.inner.coefficients.clone()
    }

    #[getter]
    fn standard_errors(&self) -> Vec<f64> {
        self.inner.standard_errors.clone()
    }
}

/// Discrete-time Logistic Hazard network.
#[pyclass(module = "pylexnet")]
struct LhModel {
    inner: survive::LhModel,
}

#[pymethods]
impl LhModel {
    #[staticmethod]
    #[pyo3(signature = (x, tau, events, grid_size, seed=0, epochs=3, hidden=256, learning_rate=1e-3))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        py: Python<'_>,
        x: Vec<Vec<f64>>,
        tau: Vec<usize>,
        events: Vec<bool>,
        grid_size: usize,
        seed: u64,
        epochs: usize,
        hidden: usize,
        learning_rate: f64,
    ) -> PyResult<Self> {
        let cfg = survive::LhConfig {
            epochs,
            hidden,
            learning_rate,
            ..Default::default()
        };
        py.detach(|| survive::lh_train(&x, &tau, &events, grid_size, &cfg, seed))
            .map(|inner| LhModel { inner })
            .map_err(py_err)
    }

    fn predict_survival(&self, x: Vec<Vec<f64>>) -> PyResult<Vec<Vec<f64>>> {
        self.inner.predict_survival(&x).map_err(py_err)
    }

    #[getter]
    fn loss_trace(&self) -> Vec<f64> {
        self.inner.loss_trace.clone()
    }
}

/// Writes `comments.jsonl`, `lexicon.txt` and `truth.json` for a seeded
/// synthetic corpus; returns the number of comments.
#[pyfunction]
fn generate_synthetic(seed: u64, out_dir: PathBuf) -> PyResult<usize> {
    let corpus = synth::generate_synthetic_corpus(seed, &synth::SynthParams::default()).map_err(py_err)?;
    corpus.write_to(&out_dir).map_err(py_err)?;
    Ok(corpus.records.len())
}

/// Runs one stage, or all of them, and reports `(stage, "ran" | "up to date")`.
#[pyfunction]
#[pyo3(signature = (config=None, out_dir=None, stage=None, seed=None, force=false))]
fn run_pipeline(
    py: Python<'_>,
    config: Option<PathBuf>,
    out_dir: Option<PathBuf>,
    stage: Option<String>,
    seed: Option<u64>,
    force: bool,
) -> PyResult<Vec<(String, String)>> {
    let mut cfg = match config {
        Some(p) => RunConfig::load(&p).map_err(py_err)?,
        None => RunConfig::default(),
    };
    if let Some(o) = out_dir {
        cfg.out_dir = o;
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    let target = match stage.as_deref() {
        None | Some("all") => None,
        Some(s) => Some(s.parse::<Stage>().map_err(py_err)?),
    };
    let pipeline = Pipeline::new(cfg).map_err(py_err)?;
    let done = py.detach(|| pipeline.run(target, force)).map_err(py_err)?;
    Ok(done
        .into_iter()
        .map(|(s, o)| {
            let what = match o {
                StageOutcome::Ran => "ran",
                StageOutcome::UpToDate => "up to date",
            };
            (s.name().to_string(), what.to_string())
        })
        .collect())
}

#[pymodule]
fn pylexnet(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(graph_structure, m)?)?;
    m.add_function(wrap_pyfunction!(intra_features, m)?)?;
    m.add_function(wrap_pyfunction!(centralities, m)?)?;
    m.add_function(wrap_pyfunction!(kendall_tau, m)?)?;
    m.add_function(wrap_pyfunction!(spearman_rho, m)?)?;
    m.add_function(wrap_pyfunction!(mae, m)?)?;
    m.add_function(wrap_pyfunction!(mean_poisson_deviance, m)?)?;
    m.add_function(wrap_pyfunction!(lh_loss, m)?)?;
    m.add_function(wrap_pyfunction!(survival_curve, m)?)?;
    m.add_function(wrap_pyfunction!(concordance_td, m)?)?;
    m.add_function(wrap_pyfunction!(integrated_brier, m)?)?;
    m.add_function(wrap_pyfunction!(fit_powerlaw_alpha, m)?)?;
    m.add_function(wrap_pyfunction!(generate_synthetic, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    m.add_class::<PcaModel>()?;
    m.add_class::<PoissonModel>()?;
    m.add_class::<CoxModel>()?;
    m.add_class::<LhModel>()?;
    m.add("FEATURE_NAMES", netstats::FEATURE_NAMES.to_vec())?;
    Ok(())
}
