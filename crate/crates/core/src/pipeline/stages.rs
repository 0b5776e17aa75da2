use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::config::RunConfig;
use super::store::write_atomic;
use super::{Pipeline, Stage};
use crate::corpus::{
    build_monthly_corpora, default_stopwords, load_lexicon, load_stopwords, parse_comments, read_comments,
    summary_tsv, usage_tsv, user_activity, CommentRecord, Lexicon, MonthlyUsageTable, ParseReport,
};
use crate::derive_seed;
use crate::error::{Error, Result};
use crate::featprep::{log_transform, DesignTransform, Projection};
use crate::graph::{GraphKey, SnapshotGraph};
use crate::innovate::{count_innovations, evaluate_innovation_models};
use crate::levelling::{dissemination, dissemination_tsv, levelling_report, levelling_tsv};
use crate::month::MonthKey;
use crate::netbuild::{build_inter_graph, build_intra_graphs, BuildStats};
use crate::netstats::{
    feature_table_tsv, inter_centralities, intra_features, kendall_tau, spearman_rho, FeatureVector,
    FEATURE_NAMES,
};
use crate::survive::{
    assign_duration_indices, code_survival, community_months, cox_table, evaluate_survival_models, samples_tsv,
    word_timelines,
};
use crate::synth::generate_synthetic_corpus;

/// Settings that affect a stage's outputs.
pub fn params(cfg: &RunConfig, s: Stage) -> Result<serde_json::Value> {
    let v = match s {
        Stage::Ingest => json!({"input": cfg.input, "corpus": cfg.corpus}),
        Stage::Graphs => json!({"graphs": cfg.graphs}),
        Stage::Stats => json!({"stats": cfg.stats}),
        Stage::Features => json!({"features": cfg.features}),
        Stage::Innovate => json!({"innovate": cfg.innovate}),
        Stage::Survive => json!({"survive": cfg.survive}),
        Stage::Level => json!({"levelling": cfg.levelling}),
        Stage::Report => json!({}),
    };
    Ok(v)
}

pub fn run(p: &Pipeline, s: Stage, out: &Path) -> Result<()> {
    match s {
        Stage::Ingest => ingest(p, out),
        Stage::Graphs => graphs(p, out),
        Stage::Stats => stats(p, out),
        Stage::Features => features(p, out),
        Stage::Innovate => innovate(p, out),
        Stage::Survive => survive(p, out),
        Stage::Level => level(p, out),
        Stage::Report => report(p, out),
    }
}

fn write(dir: &Path, name: &str, body: &str) -> Result<()> {
    write_atomic(&dir.join(name), body.as_bytes())
}

fn write_json<T: Serialize>(dir: &Path, name: &str, v: &T) -> Result<()> {
    write(dir, name, &(serde_json::to_string(v)? + "\n"))
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

const TABLES: &str = "tables.json";
const THREADS: &str = "threads.jsonl";
const LEXICON: &str = "lexicon.txt";
const FEATURES: &str = "features.json";
const MODEL_INPUTS: &str = "model_inputs.json";

fn safe_name(c: &str) -> bool {
    !c.is_empty() && !c.starts_with('.') && c.chars().all(|ch| ch.is_alphanumeric() || "_-+".contains(ch))
}

fn ingest(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let (report, lexicon) = match &cfg.input.synthetic {
        Some(params) => {
            let corpus = generate_synthetic_corpus(cfg.seed, params)?;
            let dir = out.join("corpus");
            write(&dir, "comments.jsonl", &corpus.comments_jsonl())?;
            write(&dir, "lexicon.txt", &corpus.lexicon_text())?;
            write(&dir, "truth.json", &(serde_json::to_string_pretty(&corpus.truth)? + "\n"))?;
            let report = parse_comments(corpus.comments_jsonl().as_bytes())?;
            (report, Lexicon::from_lines(corpus.lexicon.iter().map(String::as_str)))
        }
        None => {
            let path = cfg.input.comments.as_ref().expect("validated input");
            (read_comments(path)?, load_lexicon(&cfg.input.lexicon)?)
        }
    };
    if let Some(bad) = report.records.iter().find(|r| !safe_name(&r.community)) {
        return Err(Error::InvalidInput(format!("unsupported community name `{}`", bad.community)));
    }
    let stopwords = match &cfg.input.stopwords {
        Some(path) => load_stopwords(path)?,
        None => default_stopwords(),
    };
    let tables = build_monthly_corpora(&report.records, &lexicon, &stopwords, &cfg.corpus)?;
    if tables.is_empty() {
        return Err(Error::InvalidInput("no community-month passed the activity filters".into()));
    }
    log::info!(
        "ingest: {} comments ({} malformed, {} filtered), {} community-months",
        report.records.len(),
        report.malformed,
        report.filtered,
        tables.len()
    );
    write(out, "usage.tsv", &usage_tsv(&tables))?;
    write(out, "summary.tsv", &summary_tsv(&tables))?;
    write_json(out, TABLES, &tables)?;
    let mut lex = String::new();
    for t in &lexicon.terms {
        lex.push_str(t);
        lex.push('\n');
    }
    write(out, LEXICON, &lex)?;
    let mut threads = String::new();
    for r in &report.records {
        let bare = CommentRecord {
            body: String::new(),
            ..r.clone()
        };
        threads.push_str(&bare.to_json_line());
        threads.push('\n');
    }
    write(out, THREADS, &threads)?;
    write_json(
        out,
        "parse_report.json",
        &json!({"records": report.records.len(), "malformed": report.malformed, "filtered": report.filtered}),
    )
}

struct Ingested {
    tables: Vec<MonthlyUsageTable>,
}

fn load_tables(p: &Pipeline) -> Result<Ingested> {
    Ok(Ingested {
        tables: read_json(&p.stage_dir(Stage::Ingest).join(TABLES))?,
    })
}

fn load_threads(p: &Pipeline) -> Result<ParseReport> {
    let path = p.stage_dir(Stage::Ingest).join(THREADS);
    read_comments(&path)
}

fn load_lexicon_terms(p: &Pipeline) -> Result<Lexicon> {
    let text = read_text(&p.stage_dir(Stage::Ingest).join(LEXICON))?;
    Ok(Lexicon::from_lines(text.lines()))
}

fn communities_by_month(tables: &[MonthlyUsageTable]) -> BTreeMap<MonthKey, BTreeSet<String>> {
    let mut out: BTreeMap<MonthKey, BTreeSet<String>> = BTreeMap::new();
    for t in tables {
        out.entry(t.month).or_default().insert(t.community.clone());
    }
    out
}

fn intra_path(community: &str, month: MonthKey) -> String {
    format!("intra/{community}/{month}.edges")
}

fn inter_dir(threshold: Option<u32>) -> String {
    match threshold {
        None => "inter".to_string(),
        Some(t) => format!("inter_t{t}"),
    }
}

fn graphs(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let ing = load_tables(p)?;
    let records = load_threads(p)?.records;
    let mut months_of: BTreeMap<String, Vec<MonthKey>> = BTreeMap::new();
    for t in &ing.tables {
        months_of.entry(t.community.clone()).or_default().push(t.month);
    }
    let built: Vec<Result<(String, BuildStats)>> = months_of
        .par_iter()
        .map(|(community, months)| {
            let (graphs, stats) = build_intra_graphs(&records, community, cfg.graphs.variant)?;
            for m in months {
                let g = graphs.get(m).cloned().unwrap_or_else(|| {
                    SnapshotGraph::new(GraphKey {
                        scope: community.clone(),
                        month: *m,
                    })
                });
                write(out, &intra_path(community, *m), &g.to_edge_list())?;
            }
            Ok((community.clone(), stats))
        })
        .collect();
    let mut build_stats = BTreeMap::new();
    for b in built {
        let (c, s) = b?;
        build_stats.insert(c, s);
    }
    write_json(out, "build_stats.json", &build_stats)?;

    let activity = user_activity(&records)?;
    let mut thresholds: Vec<Option<u32>> = vec![None];
    thresholds.extend(cfg.graphs.robustness_thresholds.iter().map(|&t| Some(t)));
    for (month, communities) in communities_by_month(&ing.tables) {
        for th in &thresholds {
            let t = th.unwrap_or(cfg.graphs.inter_active_threshold);
            let g = build_inter_graph(&activity, &communities, month, t);
            write(out, &format!("{}/{month}.edges", inter_dir(*th)), &g.to_edge_list())?;
        }
    }
    Ok(())
}

fn load_inter(p: &Pipeline, months: impl IntoIterator<Item = MonthKey>, threshold: Option<u32>) -> Result<BTreeMap<MonthKey, SnapshotGraph>> {
    let dir = p.stage_dir(Stage::Graphs).join(inter_dir(threshold));
    months
        .into_iter()
        .map(|m| {
            let text = read_text(&dir.join(format!("{m}.edges")))?;
            Ok((m, SnapshotGraph::from_edge_list(&text)?))
        })
        .collect()
}

const CENTRALITY_NAMES: [&str; 5] = ["degree", "closeness", "eigenvector", "betweenness", "pagerank"];

fn stats(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let ing = load_tables(p)?;
    let by_month = communities_by_month(&ing.tables);
    let inter = load_inter(p, by_month.keys().copied(), None)?;
    let damping = cfg.stats.pagerank_damping;
    let centralities: BTreeMap<MonthKey, _> = inter
        .iter()
        .map(|(m, g)| (*m, inter_centralities(g, damping)))
        .collect();
    let graphs_dir = p.stage_dir(Stage::Graphs);
    let cells: Vec<(String, MonthKey)> = ing.tables.iter().map(|t| (t.community.clone(), t.month)).collect();
    let rows: Vec<Result<FeatureVector>> = cells
        .par_iter()
        .map(|(c, m)| {
            let g = SnapshotGraph::from_edge_list(&read_text(&graphs_dir.join(intra_path(c, *m)))?)?;
            let month = m.to_string();
            let seed = derive_seed!(cfg.seed, "stats", c.as_str(), month.as_str());
            Ok(FeatureVector {
                community: c.clone(),
                month: *m,
                intra: intra_features(&g.to_indexed(), seed, cfg.stats.adjust),
                inter: centralities.get(m).and_then(|cm| cm.get(c)).cloned(),
            })
        })
        .collect();
    let rows: Vec<FeatureVector> = rows.into_iter().collect::<Result<_>>()?;
    write(out, "features.tsv", &feature_table_tsv(&rows))?;
    write_json(out, FEATURES, &rows)?;

    // Agreement of centrality rankings across activity thresholds.
    let ths = &cfg.graphs.robustness_thresholds;
    let per_threshold: Vec<BTreeMap<MonthKey, _>> = ths
        .iter()
        .map(|&t| {
            Ok(load_inter(p, by_month.keys().copied(), Some(t))?
                .iter()
                .map(|(m, g)| (*m, inter_centralities(g, damping)))
                .collect())
        })
        .collect::<Result<_>>()?;
    let mut s = String::from("centrality\tthreshold_a\tthreshold_b\tmean_kendall_tau\tmonths\n");
    for (ci, name) in CENTRALITY_NAMES.iter().enumerate() {
        for a in 0..ths.len() {
            for b in a + 1..ths.len() {
                let mut taus = Vec::new();
                for m in by_month.keys() {
                    let (ga, gb) = (&per_threshold[a][m], &per_threshold[b][m]);
                    let pick = |c: &crate::netstats::InterCentralities| {
                        [c.degree, c.closeness, c.eigenvector, c.betweenness, c.pagerank][ci]
                    };
                    let xs: Vec<f64> = ga.values().map(pick).collect();
                    let ys: Vec<f64> = gb.values().map(pick).collect();
                    if let Ok(t) = kendall_tau(&xs, &ys) {
                        if t.is_finite() {
                            taus.push(t);
                        }
                    }
                }
                let mean = if taus.is_empty() {
                    "NA".to_string()
                } else {
                    format!("{:.6}", taus.iter().sum::<f64>() / taus.len() as f64)
                };
                s.push_str(&format!("{name}\t{}\t{}\t{mean}\t{}\n", ths[a], ths[b], taus.len()));
            }
        }
    }
    write(out, "threshold_robustness.tsv", &s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct ModelInput {
    community: String,
    month: MonthKey,
    /// Log-transformed features in the standard order.
    x: Vec<f64>,
}

fn fmt_na(v: Option<f64>) -> String {
    v.map_or("NA".to_string(), |x| format!("{x:.6}"))
}

fn features(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let rows: Vec<FeatureVector> = read_json(&p.stage_dir(Stage::Stats).join(FEATURES))?;
    let mut inputs = Vec::new();
    let mut raw = Vec::new();
    for r in &rows {
        if let Some(v) = r.complete() {
            inputs.push(ModelInput {
                community: r.community.clone(),
                month: r.month,
                x: log_transform(&v)?,
            });
            raw.push(v);
        }
    }
    if inputs.len() < 3 {
        return Err(Error::InvalidInput(format!(
            "only {} community-months have complete features",
            inputs.len()
        )));
    }
    let x: Vec<Vec<f64>> = inputs.iter().map(|i| i.x.clone()).collect();
    let tf = DesignTransform::fit(&x, &FEATURE_NAMES, Projection::Pcs(cfg.features.pca_components))?;
    let pca = tf.pca.as_ref().expect("projection requests components");
    write(out, "loadings.tsv", &pca.loadings_tsv())?;
    write(out, "explained.tsv", &pca.explained_tsv())?;

    let mut s = String::from("feature");
    for n in FEATURE_NAMES {
        s.push('\t');
        s.push_str(n);
    }
    s.push('\n');
    for (i, a) in FEATURE_NAMES.iter().enumerate() {
        s.push_str(a);
        let xs: Vec<f64> = raw.iter().map(|r| r[i]).collect();
        for j in 0..FEATURE_NAMES.len() {
            let ys: Vec<f64> = raw.iter().map(|r| r[j]).collect();
            s.push('\t');
            s.push_str(&fmt_na(spearman_rho(&xs, &ys).ok().filter(|v| v.is_finite())));
        }
        s.push('\n');
    }
    write(out, "spearman.tsv", &s)?;
    write_json(out, MODEL_INPUTS, &inputs)
}

fn load_inputs(p: &Pipeline) -> Result<Vec<ModelInput>> {
    read_json(&p.stage_dir(Stage::Features).join(MODEL_INPUTS))
}

fn innovate(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let ing = load_tables(p)?;
    let lexicon = load_lexicon_terms(p)?;
    let samples = count_innovations(&ing.tables, &lexicon);
    let mut s = String::from("community\tyear\tmonth\tinnovations\n");
    for x in &samples {
        s.push_str(&format!("{}\t{}\t{}\t{}\n", x.community, x.month.year, x.month.month, x.y));
    }
    write(out, "innovations.tsv", &s)?;
    let y_of: BTreeMap<(&str, MonthKey), u64> =
        samples.iter().map(|x| ((x.community.as_str(), x.month), x.y)).collect();
    let inputs = load_inputs(p)?;
    let mut rows = Vec::new();
    let mut y = Vec::new();
    for i in &inputs {
        if let Some(&v) = y_of.get(&(i.community.as_str(), i.month)) {
            rows.push(i.x.clone());
            y.push(v as f64);
        }
    }
    let table = evaluate_innovation_models(&rows, &y, &FEATURE_NAMES, &cfg.innovate, derive_seed!(cfg.seed, "innovate"))?;
    write(out, "table2.tsv", &table.to_tsv())
}

fn survive(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let ing = load_tables(p)?;
    let inputs = load_inputs(p)?;
    let features: BTreeMap<(String, MonthKey), Vec<f64>> = inputs
        .into_iter()
        .map(|i| ((i.community, i.month), i.x))
        .collect();
    let data_end = ing
        .tables
        .iter()
        .map(|t| t.month)
        .max()
        .ok_or_else(|| Error::InvalidInput("no usage tables".into()))?;
    let mut samples = code_survival(
        &word_timelines(&ing.tables),
        &community_months(&ing.tables),
        &features,
        data_end,
        &cfg.survive.coding,
    );
    if samples.is_empty() {
        return Err(Error::InvalidInput("no word timelines qualify for survival coding".into()));
    }
    let grid = assign_duration_indices(&mut samples, cfg.survive.eval.grid_size)?;
    write(out, "survival_samples.tsv", &samples_tsv(&samples))?;
    let mut g = String::from("index\tcut\n");
    for (i, c) in grid.cuts.iter().enumerate() {
        g.push_str(&format!("{i}\t{c}\n"));
    }
    write(out, "grid.tsv", &g)?;
    let seed = derive_seed!(cfg.seed, "survive");
    let t3 = evaluate_survival_models(&samples, &FEATURE_NAMES, &cfg.survive.eval, seed)?;
    write(out, "table3.tsv", &t3.to_tsv())?;
    let t4 = cox_table(&samples, &FEATURE_NAMES, &cfg.survive.eval)?;
    write(out, "table4.tsv", &t4.to_tsv())
}

fn level(p: &Pipeline, out: &Path) -> Result<()> {
    let cfg = p.config();
    let ing = load_tables(p)?;
    let records = dissemination(&ing.tables);
    let months: BTreeSet<MonthKey> = ing.tables.iter().map(|t| t.month).collect();
    let inter = load_inter(p, months, None)?;
    let rows = levelling_report(&inter, &records, &cfg.levelling);
    write(out, "dissemination.tsv", &dissemination_tsv(&records))?;
    write(out, "levelling.tsv", &levelling_tsv(&rows))
}

fn tsv_to_markdown(tsv: &str) -> String {
    let mut lines = tsv.lines();
    let Some(header) = lines.next() else {
        return String::new();
    };
    let cols: Vec<&str> = header.split('\t').collect();
    let mut s = format!("| {} |\n|{}\n", cols.join(" | "), " --- |".repeat(cols.len()));
    for l in lines {
        s.push_str(&format!("| {} |\n", l.split('\t').collect::<Vec<_>>().join(" | ")));
    }
    s
}

fn report(p: &Pipeline, out: &Path) -> Result<()> {
    let files = [
        (Stage::Innovate, "table2.tsv", "Innovation prediction (mean over repetitions)"),
        (Stage::Survive, "table3.tsv", "Survival prediction (mean over runs)"),
        (Stage::Survive, "table4.tsv", "Cox coefficients on whitened components"),
        (Stage::Features, "explained.tsv", "Explained variance of the feature PCA"),
        (Stage::Level, "levelling.tsv", "Levelling series"),
    ];
    let mut md = String::from("# lexnet report\n");
    md.push_str(&format!("\nseed: {}\n", p.config().seed));
    for (stage, name, title) in files {
        let text = read_text(&p.stage_dir(stage).join(name))?;
        write(out, name, &text)?;
        md.push_str(&format!("\n## {title}\n\n{}", tsv_to_markdown(&text)));
    }
    write(out, "report.md", &md)
}
