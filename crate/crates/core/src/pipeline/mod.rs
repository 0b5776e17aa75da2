//! Resumable stage runner. Each stage writes into its own directory under
//! the output root together with a manifest; a stage whose inputs and
//! settings are unchanged is skipped unless forced.

mod config;
mod stages;
mod store;

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::str::FromStr;

pub use config::{FeaturesConfig, GraphsConfig, InputConfig, RunConfig, StatsConfig, SurviveConfig};
pub use store::{hash_file, sha256_hex, write_atomic, Manifest};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Stage {
    Ingest,
    Graphs,
    Stats,
    Features,
    Innovate,
    Survive,
    Level,
    Report,
}

impl Stage {
    pub const ALL: [Stage; 8] = [
        Stage::Ingest,
        Stage::Graphs,
        Stage::Stats,
        Stage::Features,
        Stage::Innovate,
        Stage::Survive,
        Stage::Level,
        Stage::Report,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Stage::Ingest => "ingest",
            Stage::Graphs => "graphs",
            Stage::Stats => "stats",
            Stage::Features => "features",
            Stage::Innovate => "innovate",
            Stage::Survive => "survive",
            Stage::Level => "level",
            Stage::Report => "report",
        }
    }

    /// Stages whose outputs this stage reads.
    pub fn deps(self) -> &'static [Stage] {
        match self {
            Stage::Ingest => &[],
            Stage::Graphs => &[Stage::Ingest],
            Stage::Stats => &[Stage::Ingest, Stage::Graphs],
            Stage::Features => &[Stage::Stats],
            Stage::Innovate | Stage::Survive => &[Stage::Ingest, Stage::Features],
            Stage::Level => &[Stage::Ingest, Stage::Graphs],
            Stage::Report => &[Stage::Features, Stage::Innovate, Stage::Survive, Stage::Level],
        }
    }

    /// Every stage this one depends on, directly or not, in run order.
    pub fn closure(self) -> Vec<Stage> {
        let mut out: Vec<Stage> = Vec::new();
        let mut todo: Vec<Stage> = self.deps().to_vec();
        while let Some(s) = todo.pop() {
            if !out.contains(&s) {
                out.push(s);
                todo.extend_from_slice(s.deps());
            }
        }
        out.sort();
        out
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Stage {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Stage::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| {
                let names: Vec<&str> = Stage::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown stage `{s}`; expected all or one of {}", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageOutcome {
    Ran,
    UpToDate,
}

pub struct Pipeline {
    cfg: RunConfig,
}

impl Pipeline {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Pipeline { cfg })
    }

    pub fn config(&self) -> &RunConfig {
        &self.cfg
    }

    pub fn stage_dir(&self, s: Stage) -> PathBuf {
        self.cfg.out_dir.join(s.name())
    }

    /// Runs one stage, or every stage in order when `target` is `None`.
    pub fn run(&self, target: Option<Stage>, force: bool) -> Result<Vec<(Stage, StageOutcome)>> {
        let stages: Vec<Stage> = match target {
            Some(s) => vec![s],
            None => Stage::ALL.to_vec(),
        };
        let mut out = Vec::new();
        for s in stages {
            let outcome = self.run_stage(s, force)?;
            log::info!(
                "{s}: {}",
                match outcome {
                    StageOutcome::Ran => "done",
                    StageOutcome::UpToDate => "up to date",
                }
            );
            out.push((s, outcome));
        }
        Ok(out)
    }

    fn check_prerequisites(&self, s: Stage) -> Result<()> {
        for d in s.closure() {
            if !self.stage_dir(d).join(store::MANIFEST).exists() {
                return Err(Error::MissingPrerequisite {
                    stage: s.name().to_string(),
                    missing: d.name().to_string(),
                });
            }
        }
        Ok(())
    }

    fn inputs(&self, s: Stage) -> Result<BTreeMap<String, String>> {
        let mut inputs = BTreeMap::new();
        for d in s.deps() {
            let m = self.stage_dir(*d).join(store::MANIFEST);
            inputs.insert(format!("stage:{d}"), hash_file(&m)?);
        }
        if s == Stage::Ingest {
            let i = &self.cfg.input;
            let mut files: Vec<&PathBuf> = i.comments.iter().chain(i.lexicon.iter()).collect();
            files.extend(i.stopwords.iter());
            for f in files {
                // Unreadable lexicon files are tolerated by ingest itself.
                if let Ok(h) = hash_file(f) {
                    inputs.insert(format!("file:{}", f.display()), h);
                }
            }
        }
        Ok(inputs)
    }

    pub fn run_stage(&self, s: Stage, force: bool) -> Result<StageOutcome> {
        self.check_prerequisites(s)?;
        let inputs = self.inputs(s)?;
        let params = stages::params(&self.cfg, s)?;
        let fingerprint = Manifest::fingerprint(s.name(), self.cfg.seed, &params, &inputs);
        let dir = self.stage_dir(s);
        if !force {
            if let Some(m) = Manifest::read(&dir)? {
                if m.fingerprint == fingerprint && m.outputs_intact(&dir) {
                    return Ok(StageOutcome::UpToDate);
                }
            }
        }
        let partial = self.cfg.out_dir.join(format!("{}.partial", s.name()));
        if partial.exists() {
            fs::remove_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
        }
        fs::create_dir_all(&partial).map_err(|e| Error::io(&partial, e))?;
        stages::run(self, s, &partial)?;
        let mut outputs = BTreeMap::new();
        for f in store::list_files(&partial)? {
            outputs.insert(f.clone(), hash_file(&partial.join(&f))?);
        }
        let manifest = Manifest {
            stage: s.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed: self.cfg.seed,
            params,
            inputs,
            fingerprint,
            outputs,
        };
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        write_atomic(&partial.join(store::MANIFEST), text.as_bytes())?;
        if dir.exists() {
            fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        fs::rename(&partial, &dir).map_err(|e| Error::io(&dir, e))?;
        Ok(StageOutcome::Ran)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closure_is_ordered_and_complete() {
        assert_eq!(Stage::Ingest.closure(), vec![]);
        assert_eq!(
            Stage::Survive.closure(),
            vec![Stage::Ingest, Stage::Graphs, Stage::Stats, Stage::Features]
        );
        assert_eq!(Stage::Report.closure().len(), 7);
    }

    #[test]
    fn stage_names_parse() {
        for s in Stage::ALL {
            assert_eq!(s.name().parse::<Stage>().unwrap(), s);
        }
        assert!("everything".parse::<Stage>().is_err());
    }
}
