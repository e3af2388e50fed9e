//! The run configuration document (TOML).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpusgen::{GenerationConfig, NoiseLevel};
use crate::digest::sha256_hex;
use crate::lexicon::{Lexicon, LexiconError};
use crate::metrics::round_dp;
use crate::screening::EmbeddingParams;

const DEFAULT_CONFIG: &str = include_str!("../data/default.toml");

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("config syntax: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("config: {0}")]
    Invalid(String),
    #[error("lexicon {path}: {source}")]
    Lexicon { path: String, source: LexiconError },
}

/// How the keyword threshold κ is chosen. Exactly one field must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KeywordSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kappa: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_acceptance: Option<f64>,
    /// Calibrate κ to the semantic pipeline's acceptance rate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub match_semantic: bool,
}

/// How the semantic threshold τ is chosen. Exactly one field must be set.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SemanticSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_acceptance: Option<f64>,
    /// Calibrate τ to the keyword pipeline's acceptance rate.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub match_keyword: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub tau_start: f64,
    pub tau_stop: f64,
    pub tau_step: f64,
    /// Keyword brittleness is read over κ ± this radius.
    pub kappa_radius: usize,
}

impl SweepConfig {
    /// `tau_start, tau_start + step, …` up to `tau_stop` inclusive, rounded to
    /// ten decimals so that 0.6 + 0.05·k prints as written.
    pub fn tau_grid(&self) -> Vec<f64> {
        let mut grid = Vec::new();
        let mut k = 0u32;
        loop {
            let t = round_dp(self.tau_start + f64::from(k) * self.tau_step, 10);
            if t > self.tau_stop + 1e-9 {
                break;
            }
            grid.push(t);
            k += 1;
        }
        grid
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderConfig {
    pub levels: Vec<NoiseLevel>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub plot_data: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    /// `"builtin"` or a path to a lexicon document.
    pub lexicon: String,
    pub corpus: GenerationConfig,
    pub embedding: EmbeddingParams,
    pub keyword: KeywordSpec,
    pub semantic: SemanticSpec,
    pub sweep: SweepConfig,
    pub ladder: LadderConfig,
    pub output: OutputConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self::parse(DEFAULT_CONFIG).expect("shipped default config is valid")
    }
}

fn check_fraction(name: &str, x: f64) -> Result<(), ConfigError> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(ConfigError::Invalid(format!(
            "{name} = {x} must lie in [0, 1]"
        )))
    }
}

impl RunConfig {
    pub fn default_document() -> &'static str {
        DEFAULT_CONFIG
    }

    pub fn parse(source: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(source)?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_path(path: &Path) -> Result<Self, ConfigError> {
        let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&source)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// SHA-256 of the normalized serialization.
    pub fn digest(&self) -> String {
        sha256_hex(self.to_toml().as_bytes())
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.corpus
            .validate()
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if self.embedding.dim == 0 {
            return Err(ConfigError::Invalid(
                "embedding.dim must be positive".into(),
            ));
        }
        if !(self.embedding.eta.is_finite() && self.embedding.eta >= 0.0) {
            return Err(ConfigError::Invalid(
                "embedding.eta must be non-negative".into(),
            ));
        }

        let k = &self.keyword;
        let set = usize::from(k.kappa.is_some())
            + usize::from(k.target_acceptance.is_some())
            + usize::from(k.match_semantic);
        if set != 1 {
            return Err(ConfigError::Invalid(format!(
                "[keyword] needs exactly one of kappa, target_acceptance, match_semantic ({set} set)"
            )));
        }
        let s = &self.semantic;
        let set = usize::from(s.tau.is_some())
            + usize::from(s.target_acceptance.is_some())
            + usize::from(s.match_keyword);
        if set != 1 {
            return Err(ConfigError::Invalid(format!(
                "[semantic] needs exactly one of tau, target_acceptance, match_keyword ({set} set)"
            )));
        }
        if k.match_semantic && s.match_keyword {
            return Err(ConfigError::Invalid(
                "keyword and semantic thresholds cannot both match each other".into(),
            ));
        }
        if let Some(t) = k.target_acceptance {
            check_fraction("keyword.target_acceptance", t)?;
        }
        if let Some(t) = s.target_acceptance {
            check_fraction("semantic.target_acceptance", t)?;
        }
        if let Some(tau) = s.tau {
            if !(-1.0..=1.0).contains(&tau) {
                return Err(ConfigError::Invalid(format!(
                    "semantic.tau = {tau} outside [-1, 1]"
                )));
            }
        }

        let sw = &self.sweep;
        if sw.tau_step.is_nan() || sw.tau_step <= 0.0 {
            return Err(ConfigError::Invalid(
                "sweep.tau_step must be positive".into(),
            ));
        }
        if !(-1.0..=1.0).contains(&sw.tau_start)
            || !(-1.0..=1.0).contains(&sw.tau_stop)
            || sw.tau_start > sw.tau_stop
        {
            return Err(ConfigError::Invalid(
                "sweep tau range must be ordered within [-1, 1]".into(),
            ));
        }

        let levels = &self.ladder.levels;
        if levels.is_empty() {
            return Err(ConfigError::Invalid("ladder.levels is empty".into()));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ConfigError::Invalid(
                "ladder.levels must be strictly increasing (none < low < medium < high)".into(),
            ));
        }
        Ok(())
    }

    /// Loads the configured lexicon. Relative paths resolve against `base`.
    pub fn load_lexicon(&self, base: Option<&Path>) -> Result<Lexicon, ConfigError> {
        if self.lexicon == "builtin" {
            return Ok(Lexicon::builtin());
        }
        let mut path = PathBuf::from(&self.lexicon);
        if path.is_relative() {
            if let Some(base) = base {
                path = base.join(path);
            }
        }
        let source = std::fs::read_to_string(&path).map_err(|source| ConfigError::Io {
            path: path.clone(),
            source,
        })?;
        Lexicon::load(&source).map_err(|source| ConfigError::Lexicon {
            path: path.display().to_string(),
            source,
        })
    }
}
