use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gbt::{fit_gbt_poisson, GbtConfig};
use super::metrics::{mae, mean_poisson_deviance};
use super::poisson::{fit_poisson_irls, PoissonConfig};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::featprep::{DesignTransform, Projection};
use crate::seed;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub repetitions: usize,
    pub test_fraction: f64,
    pub pcs: Vec<usize>,
    pub poisson: PoissonConfig,
    pub gbt: GbtConfig,
    /// Drop samples whose target exceeds this quantile of all targets.
    pub clip_quantile: Option<f64>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            repetitions: 20,
            test_fraction: 0.1,
            pcs: vec![5, 10],
            poisson: PoissonConfig::default(),
            gbt: GbtConfig::default(),
            clip_quantile: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelScore {
    pub model: String,
    pub mae: f64,
    pub mpd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Table2 {
    pub rows: Vec<ModelScore>,
    pub n_samples: usize,
    pub repetitions: usize,
}

impl Table2 {
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("model\tMAE\tMPD\n");
        for r in &self.rows {
            s.push_str(&format!("{}\t{:.6}\t{:.6}\n", r.model, r.mae, r.mpd));
        }
        s
    }

    pub fn get(&self, model: &str) -> Option<&ModelScore> {
        self.rows.iter().find(|r| r.model == model)
    }
}

fn model_names(pcs: &[usize]) -> Vec<(String, Option<Projection>, bool)> {
    let mut projections: Vec<Projection> = pcs.iter().map(|&k| Projection::Pcs(k)).collect();
    projections.push(Projection::Raw);
    let mut out = vec![("Baseline (mean)".to_string(), None, false)];
    for p in &projections {
        out.push((format!("Poisson ({})", p.label()), Some(*p), false));
    }
    for p in &projections {
        out.push((format!("GBT ({})", p.label()), Some(*p), true));
    }
    out
}

/// Repeated random train/test evaluation of the mean baseline, Poisson
/// regression and boosted trees, each on whitened PCs and on standardized
/// features. `rows` are log-transformed feature vectors.
pub fn evaluate_innovation_models(
    rows: &[Vec<f64>],
    y: &[f64],
    names: &[&str],
    cfg: &EvalConfig,
    seed_value: u64,
) -> Result<Table2> {
    if rows.len() != y.len() {
        return Err(Error::InvalidInput("rows and targets differ in length".into()));
    }
    let mut idx: Vec<usize> = (0..rows.len()).collect();
    if let Some(q) = cfg.clip_quantile {
        let mut sorted = y.to_vec();
        sorted.sort_by(f64::total_cmp);
        let cut = sorted[((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1];
        idx.retain(|&i| y[i] <= cut);
    }
    let n = idx.len();
    let n_test = ((n as f64) * cfg.test_fraction).round().max(1.0) as usize;
    if n < 10 || n_test >= n {
        return Err(Error::InvalidInput(format!("too few samples ({n}) to evaluate")));
    }
    let models = model_names(&cfg.pcs);

    let reps: Vec<Result<Vec<(f64, f64)>>> = (0..cfg.repetitions)
        .into_par_iter()
        .map(|rep| {
            let mut order = idx.clone();
            order.shuffle(&mut seed::rng(derive_seed!(seed_value, "innovate", rep)));
            let (test, train) = order.split_at(n_test);
            let xtr: Vec<Vec<f64>> = train.iter().map(|&i| rows[i].clone()).collect();
            let ytr: Vec<f64> = train.iter().map(|&i| y[i]).collect();
            let xte: Vec<Vec<f64>> = test.iter().map(|&i| rows[i].clone()).collect();
            let yte: Vec<f64> = test.iter().map(|&i| y[i]).collect();
            let mut scores = Vec::with_capacity(models.len());
            for (_, projection, boosted) in &models {
                let pred = match projection {
                    None => {
                        let m = ytr.iter().sum::<f64>() / ytr.len() as f64;
                        vec![m.max(1e-12); yte.len()]
                    }
                    Some(p) => {
                        let tf = DesignTransform::fit(&xtr, names, *p)?;
                        let (a, b) = (tf.transform(&xtr), tf.transform(&xte));
                        if *boosted {
                            fit_gbt_poisson(&a, &ytr, &cfg.gbt)?.predict(&b)
                        } else {
                            fit_poisson_irls(&a, &ytr, &cfg.poisson)?.predict(&b)
                        }
                    }
                };
                scores.push((mae(&yte, &pred)?, mean_poisson_deviance(&yte, &pred)?));
            }
            Ok(scores)
        })
        .collect();

    let mut sums = vec![(0.0, 0.0); models.len()];
    for rep in reps {
        for (s, (a, b)) in sums.iter_mut().zip(rep?) {
            s.0 += a;
            s.1 += b;
        }
    }
    let r = cfg.repetitions.max(1) as f64;
    Ok(Table2 {
        rows: models
            .into_iter()
            .zip(sums)
            .map(|((model, _, _), (a, b))| ModelScore {
                model,
                mae: a / r,
                mpd: b / r,
            })
            .collect(),
        n_samples: n,
        repetitions: cfg.repetitions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, Poisson, StandardNormal};

    #[test]
    fn structured_counts_beat_the_mean() {
        let mut rng = seed::rng(17);
        let rows: Vec<Vec<f64>> = (0..400)
            .map(|_| (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| Poisson::new((1.5 + 0.7 * r[0] - 0.4 * r[2]).exp()).unwrap().sample(&mut rng))
            .collect();
        let cfg = EvalConfig {
            repetitions: 4,
            pcs: vec![3],
            gbt: GbtConfig {
                n_trees: 30,
                ..Default::default()
            },
            ..Default::default()
        };
        let t = evaluate_innovation_models(&rows, &y, &[], &cfg, 5).unwrap();
        assert_eq!(t.rows.len(), 5);
        let base = t.get("Baseline (mean)").unwrap().mpd;
        assert!(t.get("Poisson (raw)").unwrap().mpd < base);
        assert!(t.get("GBT (raw)").unwrap().mpd < base);
        let again = evaluate_innovation_models(&rows, &y, &[], &cfg, 5).unwrap();
        assert_eq!(t, again);
    }
}
