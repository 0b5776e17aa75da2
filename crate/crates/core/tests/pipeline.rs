use std::fs;
use std::path::Path;
use std::process::Command;

use lexnet::pipeline::{Manifest, Pipeline, RunConfig, Stage, StageOutcome};
use lexnet::synth::SynthParams;
use lexnet::Error;

fn small_config(out: &Path) -> RunConfig {
    let mut cfg = RunConfig {
        out_dir: out.to_path_buf(),
        ..Default::default()
    };
    cfg.input.synthetic = Some(SynthParams {
        communities: 5,
        months: 14,
        users: 25,
        ..Default::default()
    });
    cfg.innovate.repetitions = 3;
    cfg.survive.eval.runs = 2;
    cfg
}

fn outcomes(p: &Pipeline, target: Option<Stage>) -> Vec<StageOutcome> {
    p.run(target, false).unwrap().into_iter().map(|(_, o)| o).collect()
}

#[test]
fn missing_prerequisite_names_the_stage_to_run() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(tmp.path())).unwrap();
    match p.run(Some(Stage::Survive), false) {
        Err(Error::MissingPrerequisite { stage, missing }) => {
            assert_eq!(stage, "survive");
            assert_eq!(missing, "ingest");
        }
        other => panic!("expected prerequisite error, got {other:?}"),
    }
    p.run(Some(Stage::Ingest), false).unwrap();
    p.run(Some(Stage::Graphs), false).unwrap();
    let err = p.run(Some(Stage::Survive), false).unwrap_err();
    assert!(err.to_string().contains("lexnet run stats"), "{err}");
    assert_eq!(err.exit_code(), 2);
}

#[test]
fn rerun_is_a_no_op_until_config_changes() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let p = Pipeline::new(cfg.clone()).unwrap();
    assert!(outcomes(&p, None).iter().all(|o| *o == StageOutcome::Ran));
    let before = fs::read(tmp.path().join("report/report.md")).unwrap();
    assert!(outcomes(&p, None).iter().all(|o| *o == StageOutcome::UpToDate));
    let forced = p.run(Some(Stage::Level), true).unwrap();
    assert_eq!(forced[0].1, StageOutcome::Ran);

    // A survive-only change leaves upstream stages untouched.
    let mut changed = cfg.clone();
    changed.survive.eval.runs = 3;
    let p2 = Pipeline::new(changed).unwrap();
    let got: Vec<(Stage, StageOutcome)> = p2.run(None, false).unwrap();
    for (s, o) in got {
        let expect_ran = matches!(s, Stage::Survive | Stage::Report);
        assert_eq!(o == StageOutcome::Ran, expect_ran, "{s}");
    }
    let after = fs::read(tmp.path().join("report/report.md")).unwrap();
    assert_ne!(before, after);
}

#[test]
fn fingerprint_tracks_seed_and_params() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path());
    Pipeline::new(cfg.clone()).unwrap().run(Some(Stage::Ingest), false).unwrap();
    let a = Manifest::read(&tmp.path().join("ingest")).unwrap().unwrap();
    Pipeline::new(cfg.clone()).unwrap().run(Some(Stage::Ingest), true).unwrap();
    let b = Manifest::read(&tmp.path().join("ingest")).unwrap().unwrap();
    assert_eq!(a, b);
    cfg.seed += 1;
    Pipeline::new(cfg).unwrap().run(Some(Stage::Ingest), false).unwrap();
    let c = Manifest::read(&tmp.path().join("ingest")).unwrap().unwrap();
    assert_ne!(a.fingerprint, c.fingerprint);
    assert_ne!(a.outputs, c.outputs);
}

#[test]
fn tampered_output_triggers_rebuild() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(tmp.path())).unwrap();
    p.run(Some(Stage::Ingest), false).unwrap();
    fs::write(tmp.path().join("ingest/usage.tsv"), "edited\n").unwrap();
    assert_eq!(outcomes(&p, Some(Stage::Ingest)), vec![StageOutcome::Ran]);
    assert_ne!(fs::read_to_string(tmp.path().join("ingest/usage.tsv")).unwrap(), "edited\n");
}

#[test]
fn inter_centrality_rankings_agree_across_thresholds() {
    let tmp = tempfile::tempdir().unwrap();
    let p = Pipeline::new(small_config(tmp.path())).unwrap();
    for s in [Stage::Ingest, Stage::Graphs, Stage::Stats] {
        p.run(Some(s), false).unwrap();
    }
    let text = fs::read_to_string(tmp.path().join("stats/threshold_robustness.tsv")).unwrap();
    let mut rows = 0;
    for line in text.lines().skip(1) {
        let f: Vec<&str> = line.split('\t').collect();
        let tau: f64 = f[3].parse().unwrap_or_else(|_| panic!("undefined tau in `{line}`"));
        assert!(tau > 0.0, "{line}");
        rows += 1;
    }
    assert_eq!(rows, 15);
}

fn cli(args: &[&str], dir: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_lexnet"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["--out", "o", "run", "features"], tmp.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("run `lexnet run ingest` first"), "{err}");

    let out = cli(&["--out", "o", "run", "nonsense"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    fs::write(tmp.path().join("bad.toml"), "seed = \"x\"\n").unwrap();
    let out = cli(&["--config", "bad.toml", "run"], tmp.path());
    assert_eq!(out.status.code(), Some(2));

    let cfg = "[input]\ncomments = \"missing.jsonl\"\nlexicon = [\"lex.txt\"]\n";
    fs::write(tmp.path().join("data.toml"), cfg).unwrap();
    let out = cli(&["--config", "data.toml", "run", "ingest"], tmp.path());
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn cli_runs_a_config_file_with_real_inputs() {
    let tmp = tempfile::tempdir().unwrap();
    let gen = cli(&["--seed", "5", "generate", "--dir", "corpus"], tmp.path());
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let cfg = "seed = 5\nout_dir = \"out\"\n\n[input]\ncomments = \"corpus/comments.jsonl\"\nlexicon = [\"corpus/lexicon.txt\"]\n\n[innovate]\nrepetitions = 2\n\n[survive.eval]\nruns = 2\n";
    fs::write(tmp.path().join("run.toml"), cfg).unwrap();
    let run = cli(&["--config", "run.toml", "--threads", "2", "--stage", "level"], tmp.path());
    assert!(!run.status.success());
    let all = cli(&["--config", "run.toml", "run", "all"], tmp.path());
    assert!(all.status.success(), "{}", String::from_utf8_lossy(&all.stderr));
    assert!(tmp.path().join("out/report/table3.tsv").exists());
    let again = cli(&["--config", "run.toml", "run"], tmp.path());
    let stdout = String::from_utf8_lossy(&again.stdout);
    assert_eq!(stdout.matches("up to date").count(), 8, "{stdout}");
}

#[test]
fn printed_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = cli(&["config"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let cfg = RunConfig::from_toml(&text).unwrap();
    assert_eq!(cfg.to_toml().unwrap(), text);
}

#[test]
fn example_config_matches_defaults() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/example.toml");
    let mut cfg = RunConfig::load(&path).unwrap();
    cfg.out_dir = RunConfig::default().out_dir;
    assert_eq!(cfg.to_toml().unwrap(), RunConfig::default().to_toml().unwrap());
}
