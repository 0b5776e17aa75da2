use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::corpus::CorpusConfig;
use crate::error::{Error, Result};
use crate::innovate::EvalConfig;
use crate::levelling::LevellingConfig;
use crate::netbuild::GraphVariantKind;
use crate::netstats::AdjustMode;
use crate::survive::{CodingConfig, SurvivalEvalConfig};
use crate::synth::SynthParams;

/// Where comments and the lexicon come from. Either `comments` (with at
/// least one `lexicon` file) or `synthetic` must be set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub comments: Option<PathBuf>,
    pub lexicon: Vec<PathBuf>,
    /// Replaces the bundled stopword list.
    pub stopwords: Option<PathBuf>,
    pub synthetic: Option<SynthParams>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GraphsConfig {
    pub variant: GraphVariantKind,
    /// Comments a user needs in each of two communities to link them.
    pub inter_active_threshold: u32,
    /// Thresholds whose centrality rankings are compared in the stats stage.
    pub robustness_thresholds: Vec<u32>,
}

impl Default for GraphsConfig {
    fn default() -> Self {
        GraphsConfig {
            variant: GraphVariantKind::Proximity2,
            inter_active_threshold: 2,
            robustness_thresholds: vec![2, 3, 4],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StatsConfig {
    pub adjust: AdjustMode,
    pub pagerank_damping: f64,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            adjust: AdjustMode::RelativeToNull,
            pagerank_damping: 0.85,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesConfig {
    /// Components in the reported loadings.
    pub pca_components: usize,
}

impl Default for FeaturesConfig {
    fn default() -> Self {
        FeaturesConfig { pca_components: 10 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct SurviveConfig {
    pub coding: CodingConfig,
    pub eval: SurvivalEvalConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Every random choice in a run derives from this value.
    pub seed: u64,
    pub out_dir: PathBuf,
    pub threads: Option<usize>,
    pub input: InputConfig,
    pub corpus: CorpusConfig,
    pub graphs: GraphsConfig,
    pub stats: StatsConfig,
    pub features: FeaturesConfig,
    pub innovate: EvalConfig,
    pub survive: SurviveConfig,
    pub levelling: LevellingConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 20181001,
            out_dir: PathBuf::from("lexnet-out"),
            threads: None,
            input: InputConfig {
                synthetic: Some(SynthParams::default()),
                ..Default::default()
            },
            corpus: CorpusConfig::default(),
            graphs: GraphsConfig::default(),
            stats: StatsConfig::default(),
            features: FeaturesConfig::default(),
            innovate: EvalConfig::default(),
            survive: SurviveConfig::default(),
            levelling: LevellingConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a config file; relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.out_dir);
        if let Some(p) = self.input.comments.as_mut() {
            fix(p);
        }
        if let Some(p) = self.input.stopwords.as_mut() {
            fix(p);
        }
        self.input.lexicon.iter_mut().for_each(fix);
    }

    pub fn validate(&self) -> Result<()> {
        let i = &self.input;
        match (&i.comments, &i.synthetic) {
            (Some(_), Some(_)) => {
                return Err(Error::Config("set either input.comments or input.synthetic, not both".into()))
            }
            (None, None) => return Err(Error::Config("no input: set input.comments or input.synthetic".into())),
            (Some(_), None) if i.lexicon.is_empty() => {
                return Err(Error::Config("input.comments needs at least one input.lexicon file".into()))
            }
            _ => {}
        }
        let e = &self.survive.eval;
        if !(e.train_fraction > 0.0 && e.dev_fraction >= 0.0 && e.train_fraction + e.dev_fraction < 1.0) {
            return Err(Error::Config("survive.eval fractions must leave a test share".into()));
        }
        if e.grid_size == 0 || e.lh.batch_size < 2 || e.lh.hidden == 0 {
            return Err(Error::Config("survive.eval grid_size, lh.hidden and lh.batch_size must be positive (batch >= 2)".into()));
        }
        if !(0.0..1.0).contains(&e.lh.dropout) {
            return Err(Error::Config("survive.eval.lh.dropout must be in [0, 1)".into()));
        }
        let n = &self.innovate;
        if !(n.test_fraction > 0.0 && n.test_fraction < 1.0) || n.repetitions == 0 {
            return Err(Error::Config("innovate.test_fraction must be in (0, 1) with repetitions > 0".into()));
        }
        if !(self.stats.pagerank_damping > 0.0 && self.stats.pagerank_damping < 1.0) {
            return Err(Error::Config("stats.pagerank_damping must be in (0, 1)".into()));
        }
        if self.graphs.inter_active_threshold == 0 {
            return Err(Error::Config("graphs.inter_active_threshold must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(Error::Config("threads must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = RunConfig::default();
        let text = cfg.to_toml().unwrap();
        let back = RunConfig::from_toml(&text).unwrap();
        assert_eq!(back.to_toml().unwrap(), text);
    }

    #[test]
    fn partial_config_fills_defaults() {
        let cfg = RunConfig::from_toml("seed = 5\n[input]\ncomments = \"c.jsonl\"\nlexicon = [\"l.txt\"]\n").unwrap();
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.corpus.min_global_freq, 10);
        assert_eq!(cfg.survive.eval.lh.epochs, 3);
        assert_eq!(cfg.innovate.poisson.lambda, 1e-2);
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(matches!(RunConfig::from_toml("bogus = 1"), Err(Error::Config(_))));
        assert!(RunConfig::from_toml("[input]\ncomments = \"c.jsonl\"\n").is_err());
        assert!(RunConfig::from_toml("[stats]\npagerank_damping = 1.5\n").is_err());
    }
}
