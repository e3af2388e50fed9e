//! Simulation laboratory for measuring algorithmic friction in resume screening.
//!
//! Friction is the share of substantively qualified candidate/job pairs that a
//! screening system rejects. The crate generates seeded synthetic corpora from
//! a controlled skill lexicon, screens them with an exact keyword matcher and a
//! concept-anchored vector-space matcher, and reports confusion statistics for
//! both under comparable acceptance rates.
//!
//! Module map:
//!
//! - [`lexicon`]: skill concepts and their surface forms.
//! - [`corpusgen`]: job/candidate sampling, resume rendering with lexical noise.
//! - [`screening`]: keyword and semantic decision functions.
//! - [`metrics`]: confusion matrices, precision/recall/F1, friction.
//! - [`experiments`]: calibration, sweeps, noise ladder, report assembly.
//! - [`config`]: the run configuration document.

pub mod config;
pub mod corpusgen;
pub mod digest;
pub mod experiments;
pub mod lexicon;
pub mod metrics;
pub mod output;
pub mod screening;
pub mod seed;
pub mod text;

pub use config::{ConfigError, RunConfig};
pub use corpusgen::{
    generate_corpus, ground_truth, CandidateProfile, Corpus, GenerationConfig, JobSpec,
    LabeledPair, NoiseConfig, NoiseLevel, Resume,
};
pub use experiments::{run_experiment, FrictionReport};
pub use lexicon::{Concept, ConceptId, FormKind, Lexicon, SurfaceForm};
pub use metrics::{ConfusionMatrix, MetricsRow};
pub use screening::{EmbeddingSpace, KeywordRule, Pipeline, ScreenDecision, SemanticRule};
pub use text::tokenize;
