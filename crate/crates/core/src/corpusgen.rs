//! Seeded synthetic resume/job corpora.
//!
//! Each pair gets its own job assignment, candidate profile and rendered
//! resume. Qualification is decided on the latent concept sets before any
//! text exists; rendering only chooses surface forms, so lexical noise never
//! changes a label.

use std::collections::{BTreeSet, HashMap};
use std::fmt;
use std::sync::OnceLock;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_hex;
use crate::lexicon::{ConceptId, FormKind, Lexicon};
use crate::seed::{stream_rng, Stream};

/// Out-of-lexicon words interleaved with resume content.
pub const RESUME_FILLER: &[&str] = &[
    "experienced",
    "with",
    "in",
    "strong",
    "background",
    "worked",
    "on",
    "several",
    "projects",
    "using",
    "delivered",
    "results",
    "across",
    "teams",
    "including",
    "proven",
    "skills",
    "years",
    "hands",
    "responsible",
    "for",
    "various",
    "initiatives",
    "contributed",
    "to",
    "multiple",
    "efforts",
    "focused",
    "applied",
    "practical",
];

/// Out-of-lexicon words used in job description boilerplate.
pub const JOB_FILLER: &[&str] = &[
    "we",
    "seek",
    "a",
    "candidate",
    "who",
    "brings",
    "required",
    "must",
    "have",
    "plus",
    "ideal",
    "role",
    "needs",
    "expected",
    "familiarity",
    "solid",
    "knowledge",
];

#[derive(Debug, Error)]
pub enum GenError {
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
    #[error("requirement range {min}..={max} does not fit a lexicon of {lexicon} concepts")]
    RequirementRange {
        min: usize,
        max: usize,
        lexicon: usize,
    },
    #[error("lexicon too small: need {needed} non-required concepts, only {available} available")]
    LexiconTooSmall { needed: usize, available: usize },
    #[error("concept `{0}` is not in the lexicon")]
    UnknownConcept(ConceptId),
    #[error("concept `{0}` has no canonical form")]
    NoCanonical(ConceptId),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseLevel {
    None,
    Low,
    Medium,
    High,
}

impl NoiseLevel {
    pub const ALL: [NoiseLevel; 4] = [
        NoiseLevel::None,
        NoiseLevel::Low,
        NoiseLevel::Medium,
        NoiseLevel::High,
    ];

    /// Multiplier applied to the base perturbation probabilities.
    pub fn scale(self) -> f64 {
        match self {
            NoiseLevel::None => 0.0,
            NoiseLevel::Low => 0.25,
            NoiseLevel::Medium => 0.5,
            NoiseLevel::High => 0.85,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            NoiseLevel::None => "none",
            NoiseLevel::Low => "low",
            NoiseLevel::Medium => "medium",
            NoiseLevel::High => "high",
        }
    }
}

impl fmt::Display for NoiseLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for NoiseLevel {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|l| l.as_str() == s)
            .ok_or_else(|| format!("unknown noise level `{s}`"))
    }
}

/// Base perturbation probabilities, scaled by [`NoiseLevel::scale`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub p_synonym: f64,
    pub p_acronym: f64,
    pub p_title_variant: f64,
    pub p_reorder: f64,
    pub filler_tokens_per_concept: (usize, usize),
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            p_synonym: 0.9,
            p_acronym: 0.8,
            p_title_variant: 1.0,
            p_reorder: 0.5,
            filler_tokens_per_concept: (1, 3),
        }
    }
}

impl NoiseConfig {
    fn validate(&self) -> Result<(), GenError> {
        for (name, p) in [
            ("p_synonym", self.p_synonym),
            ("p_acronym", self.p_acronym),
            ("p_title_variant", self.p_title_variant),
            ("p_reorder", self.p_reorder),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GenError::InvalidConfig(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        check_range("filler_tokens_per_concept", self.filler_tokens_per_concept)
    }
}

/// Shape of the latent candidate profiles.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileShape {
    /// Non-required concepts held by a typical candidate.
    pub distractors: (usize, usize),
    /// Share of candidates with a broad, many-skill profile.
    pub broad_fraction: f64,
    /// Non-required concepts held by a broad candidate.
    pub broad_distractors: (usize, usize),
    /// Coverage of an unqualified candidate as fractions of the needed count.
    pub unqualified_coverage: (f64, f64),
    /// Share of unqualified candidates missing exactly one needed concept.
    pub near_miss_fraction: f64,
}

impl Default for ProfileShape {
    fn default() -> Self {
        Self {
            distractors: (0, 1),
            broad_fraction: 0.10,
            broad_distractors: (20, 35),
            unqualified_coverage: (0.5, 0.55),
            near_miss_fraction: 0.05,
        }
    }
}

impl ProfileShape {
    fn validate(&self) -> Result<(), GenError> {
        check_range("distractors", self.distractors)?;
        check_range("broad_distractors", self.broad_distractors)?;
        for (name, p) in [
            ("broad_fraction", self.broad_fraction),
            ("near_miss_fraction", self.near_miss_fraction),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(GenError::InvalidConfig(format!(
                    "{name} = {p} is not a probability"
                )));
            }
        }
        let (lo, hi) = self.unqualified_coverage;
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo > hi {
            return Err(GenError::InvalidConfig(format!(
                "unqualified_coverage ({lo}, {hi}) must be ordered fractions"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerationConfig {
    pub n_pairs: usize,
    /// Size of the fixed job pool; pair `i` is screened against job `i % n_jobs`.
    pub n_jobs: usize,
    pub qualified_fraction: f64,
    /// Required-concept coverage ρ that counts as qualified.
    pub coverage: f64,
    pub required_per_job: (usize, usize),
    pub level: NoiseLevel,
    pub profiles: ProfileShape,
    pub noise: NoiseConfig,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            n_pairs: 1000,
            n_jobs: 100,
            qualified_fraction: 0.5,
            coverage: 1.0,
            required_per_job: (5, 10),
            level: NoiseLevel::Medium,
            profiles: ProfileShape::default(),
            noise: NoiseConfig::default(),
        }
    }
}

impl GenerationConfig {
    pub fn validate(&self) -> Result<(), GenError> {
        if self.n_pairs == 0 {
            return Err(GenError::InvalidConfig("n_pairs must be at least 1".into()));
        }
        if self.n_jobs == 0 {
            return Err(GenError::InvalidConfig("n_jobs must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.qualified_fraction) {
            return Err(GenError::InvalidConfig(format!(
                "qualified_fraction = {} is not a fraction",
                self.qualified_fraction
            )));
        }
        if !(self.coverage > 0.0 && self.coverage <= 1.0) {
            return Err(GenError::InvalidConfig(format!(
                "coverage = {} must lie in (0, 1]",
                self.coverage
            )));
        }
        check_range("required_per_job", self.required_per_job)?;
        if self.required_per_job.0 == 0 {
            return Err(GenError::InvalidConfig(
                "jobs need at least 1 requirement".into(),
            ));
        }
        self.profiles.validate()?;
        self.noise.validate()
    }

    pub fn qualified_count(&self) -> usize {
        (self.n_pairs as f64 * self.qualified_fraction).round() as usize
    }
}

fn check_range(name: &str, (lo, hi): (usize, usize)) -> Result<(), GenError> {
    if lo > hi {
        return Err(GenError::InvalidConfig(format!(
            "{name} range ({lo}, {hi}) is reversed"
        )));
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JobSpec {
    pub id: String,
    pub required: BTreeSet<ConceptId>,
    /// Canonical forms of the required concepts.
    pub keywords: BTreeSet<Vec<String>>,
    pub text: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateProfile {
    pub id: String,
    pub held: BTreeSet<ConceptId>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SpanSource {
    Concept {
        concept: ConceptId,
        kind: FormKind,
        /// The requested non-canonical kind was unavailable for this concept.
        fallback: bool,
    },
    Filler,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
    pub source: SpanSource,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resume {
    pub candidate: String,
    pub tokens: Vec<String>,
    pub provenance: Vec<Span>,
    pub noise_level: NoiseLevel,
    pub reordered: bool,
}

impl Resume {
    /// Concepts recorded in provenance.
    pub fn concepts(&self) -> BTreeSet<ConceptId> {
        self.concept_spans().map(|(c, _, _)| c.clone()).collect()
    }

    /// `(concept, kind, span)` for every concept span, in token order.
    pub fn concept_spans(&self) -> impl Iterator<Item = (&ConceptId, FormKind, &Span)> {
        self.provenance.iter().filter_map(|s| match &s.source {
            SpanSource::Concept { concept, kind, .. } => Some((concept, *kind, s)),
            SpanSource::Filler => None,
        })
    }

    /// The surface-form kind used for `concept`, if it appears.
    pub fn kind_of(&self, concept: &ConceptId) -> Option<FormKind> {
        self.concept_spans()
            .find(|(c, _, _)| *c == concept)
            .map(|(_, k, _)| k)
    }

    /// Human-readable text: one sentence per concept block. Tokenizing the
    /// result gives back `tokens`.
    pub fn render_text(&self) -> String {
        let mut sentences: Vec<String> = Vec::new();
        for span in &self.provenance {
            let words = self.tokens[span.start..span.end].join(" ");
            match span.source {
                SpanSource::Concept { .. } => sentences.push(capitalize(&words)),
                SpanSource::Filler => match sentences.last_mut() {
                    Some(s) => {
                        s.push(' ');
                        s.push_str(&words);
                    }
                    None => sentences.push(capitalize(&words)),
                },
            }
        }
        sentences
            .into_iter()
            .map(|s| s + ".")
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Checks the span invariants: in bounds, ordered, non-overlapping.
    pub fn spans_well_formed(&self) -> bool {
        let mut cursor = 0;
        for s in &self.provenance {
            if s.start < cursor || s.start >= s.end || s.end > self.tokens.len() {
                return false;
            }
            cursor = s.end;
        }
        true
    }
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledPair {
    pub candidate: String,
    pub job: String,
    pub q: bool,
}

/// Number of required concepts a candidate must hold: ⌈ρ·|required|⌉.
///
/// A tolerance of 1e-9 absorbs binary rounding (0.7 × 10 is not exactly 7).
pub fn needed_coverage(coverage: f64, required: usize) -> usize {
    ((coverage * required as f64) - 1e-9).ceil().max(0.0) as usize
}

/// Ground-truth qualification: holds at least ⌈ρ·|required|⌉ required concepts.
pub fn ground_truth(profile: &CandidateProfile, job: &JobSpec, coverage: f64) -> bool {
    let covered = job.required.intersection(&profile.held).count();
    covered >= needed_coverage(coverage, job.required.len())
}

/// Canonical forms of `required`.
pub fn canonical_keywords(
    lexicon: &Lexicon,
    required: &BTreeSet<ConceptId>,
) -> Result<BTreeSet<Vec<String>>, GenError> {
    required
        .iter()
        .map(|id| {
            let concept = lexicon
                .get(id)
                .ok_or_else(|| GenError::UnknownConcept(id.clone()))?;
            concept
                .canonical()
                .map(|f| f.tokens.clone())
                .ok_or_else(|| GenError::NoCanonical(id.clone()))
        })
        .collect()
}

/// Samples a job with a uniformly drawn number of requirements in `req_range`.
pub fn sample_job<R: Rng>(
    rng: &mut R,
    lexicon: &Lexicon,
    req_range: (usize, usize),
    id: impl Into<String>,
) -> Result<JobSpec, GenError> {
    let (lo, hi) = req_range;
    if lo == 0 || lo > hi || hi > lexicon.len() {
        return Err(GenError::RequirementRange {
            min: lo,
            max: hi,
            lexicon: lexicon.len(),
        });
    }
    let count = rng.random_range(lo..=hi);
    let mut picks = index::sample(rng, lexicon.len(), count).into_vec();
    picks.sort_unstable();
    let required: BTreeSet<ConceptId> = picks
        .iter()
        .map(|&i| lexicon.concept(i).id.clone())
        .collect();
    let keywords = canonical_keywords(lexicon, &required)?;

    let mut text: Vec<String> = ["we", "seek", "a", "candidate", "who", "brings"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    for id in &required {
        let canon = lexicon
            .get(id)
            .and_then(|c| c.canonical())
            .expect("checked above");
        text.extend(canon.tokens.iter().cloned());
        let n = rng.random_range(1..=2);
        for _ in 0..n {
            text.push(JOB_FILLER[rng.random_range(0..JOB_FILLER.len())].to_string());
        }
    }
    Ok(JobSpec {
        id: id.into(),
        required,
        keywords,
        text,
    })
}

/// Samples a candidate for `job`.
///
/// Qualified candidates hold between ⌈ρ·|required|⌉ and all of the job's
/// requirements. Unqualified candidates hold fewer: a near-miss share lacks a
/// single needed concept, the rest cover a fraction drawn from
/// `shape.unqualified_coverage`. Every candidate also holds non-required
/// concepts: the distractor draw plus one substitute per missing requirement.
pub fn sample_candidate<R: Rng>(
    rng: &mut R,
    job: &JobSpec,
    lexicon: &Lexicon,
    make_qualified: bool,
    coverage: f64,
    shape: &ProfileShape,
    id: impl Into<String>,
) -> Result<CandidateProfile, GenError> {
    if !(coverage > 0.0 && coverage <= 1.0) {
        return Err(GenError::InvalidConfig(format!(
            "coverage = {coverage} must lie in (0, 1]"
        )));
    }
    let required: Vec<usize> = job
        .required
        .iter()
        .map(|id| {
            lexicon
                .index_of(id)
                .ok_or_else(|| GenError::UnknownConcept(id.clone()))
        })
        .collect::<Result<_, _>>()?;
    let r = required.len();
    let need = needed_coverage(coverage, r);

    let broad = rng.random::<f64>() < shape.broad_fraction;
    let (dlo, dhi) = if broad {
        shape.broad_distractors
    } else {
        shape.distractors
    };
    let distractors = rng.random_range(dlo..=dhi);

    let held_required = if make_qualified {
        rng.random_range(need..=r)
    } else if need == 0 {
        // ρ·|required| rounds to zero: nobody can be unqualified
        return Err(GenError::InvalidConfig(
            "cannot build an unqualified candidate for a job needing 0 concepts".into(),
        ));
    } else if rng.random::<f64>() < shape.near_miss_fraction {
        need - 1
    } else {
        let (flo, fhi) = shape.unqualified_coverage;
        let hi = ((fhi * need as f64).floor() as usize).min(need - 1);
        let lo = ((flo * need as f64).floor() as usize).min(hi);
        rng.random_range(lo..=hi)
    };

    let pool: Vec<usize> = (0..lexicon.len())
        .filter(|i| !required.contains(i))
        .collect();
    let extra = distractors + (r - held_required);
    if extra > pool.len() {
        return Err(GenError::LexiconTooSmall {
            needed: extra,
            available: pool.len(),
        });
    }

    let mut held: BTreeSet<ConceptId> = BTreeSet::new();
    for i in index::sample(rng, r, held_required) {
        held.insert(lexicon.concept(required[i]).id.clone());
    }
    for i in index::sample(rng, pool.len(), extra) {
        held.insert(lexicon.concept(pool[i]).id.clone());
    }
    Ok(CandidateProfile {
        id: id.into(),
        held,
    })
}

/// Renders a resume for `profile`.
///
/// Per held concept, in id order: with probability `p_synonym·s` a synonym,
/// else with `p_acronym·s` the acronym, else with `p_title_variant·s` a role
/// title, else the canonical form, where `s` is the level's scale. A
/// requested kind the concept lacks falls back to canonical. Each concept
/// block is followed by filler; with probability `p_reorder·s` the blocks are
/// shuffled.
///
/// The random draws do not depend on `level`, so the renderings of one
/// profile at different levels are coupled: a concept that draws a given kind
/// at one level keeps that kind at every higher level, unless an earlier kind
/// in the chain takes over.
pub fn render_resume<R: Rng>(
    rng: &mut R,
    profile: &CandidateProfile,
    lexicon: &Lexicon,
    noise: &NoiseConfig,
    level: NoiseLevel,
) -> Result<Resume, GenError> {
    let scale = level.scale();
    let (fmin, fmax) = noise.filler_tokens_per_concept;
    if fmin > fmax {
        return Err(GenError::InvalidConfig("filler range is reversed".into()));
    }

    struct Block {
        form_tokens: Vec<String>,
        filler: Vec<String>,
        source: SpanSource,
    }

    let mut blocks = Vec::with_capacity(profile.held.len());
    for id in &profile.held {
        let concept = lexicon
            .get(id)
            .ok_or_else(|| GenError::UnknownConcept(id.clone()))?;
        let u_syn: f64 = rng.random();
        let u_acr: f64 = rng.random();
        let u_title: f64 = rng.random();
        let u_pick: f64 = rng.random();
        let n_fill = rng.random_range(fmin..=fmax);
        let filler: Vec<String> = (0..n_fill)
            .map(|_| RESUME_FILLER[rng.random_range(0..RESUME_FILLER.len())].to_string())
            .collect();

        let requested = if u_syn < noise.p_synonym * scale {
            FormKind::Synonym
        } else if u_acr < noise.p_acronym * scale {
            FormKind::Acronym
        } else if u_title < noise.p_title_variant * scale {
            FormKind::RoleTitleVariant
        } else {
            FormKind::Canonical
        };
        let mut candidates = concept.form_indices(requested);
        let fallback = candidates.is_empty();
        if fallback {
            candidates = concept.form_indices(FormKind::Canonical);
        }
        let Some(&form_idx) = candidates.get((u_pick * candidates.len() as f64) as usize) else {
            return Err(GenError::NoCanonical(id.clone()));
        };
        let form = &concept.forms[form_idx];
        blocks.push(Block {
            form_tokens: form.tokens.clone(),
            filler,
            source: SpanSource::Concept {
                concept: id.clone(),
                kind: form.kind,
                fallback,
            },
        });
    }

    let u_reorder: f64 = rng.random();
    let perm_seed: u64 = rng.random();
    let reordered = u_reorder < noise.p_reorder * scale;
    if reordered {
        blocks.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
    }

    let mut tokens = Vec::new();
    let mut provenance = Vec::new();
    for block in blocks {
        let start = tokens.len();
        tokens.extend(block.form_tokens);
        provenance.push(Span {
            start,
            end: tokens.len(),
            source: block.source,
        });
        if !block.filler.is_empty() {
            let start = tokens.len();
            tokens.extend(block.filler);
            provenance.push(Span {
                start,
                end: tokens.len(),
                source: SpanSource::Filler,
            });
        }
    }
    Ok(Resume {
        candidate: profile.id.clone(),
        tokens,
        provenance,
        noise_level: level,
        reordered,
    })
}

/// A generated corpus. `profiles[i]`, `resumes[i]` and `pairs[i]` describe
/// the same candidate.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub lexicon_digest: String,
    pub jobs: Vec<JobSpec>,
    pub profiles: Vec<CandidateProfile>,
    pub resumes: Vec<Resume>,
    pub pairs: Vec<LabeledPair>,
    pub seed: u64,
    pub config: GenerationConfig,
    job_index: HashMap<String, usize>,
    digest: OnceLock<String>,
}

impl PartialEq for Corpus {
    fn eq(&self, other: &Self) -> bool {
        self.lexicon_digest == other.lexicon_digest
            && self.jobs == other.jobs
            && self.profiles == other.profiles
            && self.resumes == other.resumes
            && self.pairs == other.pairs
            && self.seed == other.seed
            && self.config == other.config
    }
}

#[derive(Debug, Error)]
pub enum CorpusFormatError {
    #[error("corpus line {line}: {source}")]
    Json {
        line: usize,
        source: serde_json::Error,
    },
    #[error("corpus: {0}")]
    Structure(String),
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    seed: u64,
    lexicon_digest: String,
    config: GenerationConfig,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header(Header),
    Job(JobSpec),
    Profile(CandidateProfile),
    Resume(Resume),
    Pair(LabeledPair),
}

const CORPUS_FORMAT: &str = "frictionlab-corpus/1";

impl Corpus {
    pub fn new(
        lexicon_digest: String,
        jobs: Vec<JobSpec>,
        profiles: Vec<CandidateProfile>,
        resumes: Vec<Resume>,
        pairs: Vec<LabeledPair>,
        seed: u64,
        config: GenerationConfig,
    ) -> Result<Self, CorpusFormatError> {
        if profiles.len() != pairs.len() || resumes.len() != pairs.len() {
            return Err(CorpusFormatError::Structure(format!(
                "{} profiles, {} resumes, {} pairs",
                profiles.len(),
                resumes.len(),
                pairs.len()
            )));
        }
        let job_index: HashMap<String, usize> = jobs
            .iter()
            .enumerate()
            .map(|(i, j)| (j.id.clone(), i))
            .collect();
        for (i, pair) in pairs.iter().enumerate() {
            if !job_index.contains_key(&pair.job) {
                return Err(CorpusFormatError::Structure(format!(
                    "pair {i} references unknown job `{}`",
                    pair.job
                )));
            }
            if profiles[i].id != pair.candidate || resumes[i].candidate != pair.candidate {
                return Err(CorpusFormatError::Structure(format!(
                    "pair {i} is not aligned with its profile and resume"
                )));
            }
        }
        Ok(Self {
            lexicon_digest,
            jobs,
            profiles,
            resumes,
            pairs,
            seed,
            config,
            job_index,
            digest: OnceLock::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    /// The job screened in pair `i`.
    pub fn job_of(&self, i: usize) -> &JobSpec {
        &self.jobs[self.job_index[&self.pairs[i].job]]
    }

    pub fn labels(&self) -> Vec<bool> {
        self.pairs.iter().map(|p| p.q).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        let mut push = |r: &Record| {
            out.push_str(&serde_json::to_string(r).expect("corpus records serialize"));
            out.push('\n');
        };
        push(&Record::Header(Header {
            format: CORPUS_FORMAT.into(),
            seed: self.seed,
            lexicon_digest: self.lexicon_digest.clone(),
            config: self.config.clone(),
        }));
        for j in &self.jobs {
            push(&Record::Job(j.clone()));
        }
        for p in &self.profiles {
            push(&Record::Profile(p.clone()));
        }
        for r in &self.resumes {
            push(&Record::Resume(r.clone()));
        }
        for p in &self.pairs {
            push(&Record::Pair(p.clone()));
        }
        out
    }

    pub fn from_jsonl(source: &str) -> Result<Self, CorpusFormatError> {
        let mut header = None;
        let (mut jobs, mut profiles, mut resumes, mut pairs) = (vec![], vec![], vec![], vec![]);
        for (i, line) in source.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let record: Record =
                serde_json::from_str(line).map_err(|source| CorpusFormatError::Json {
                    line: i + 1,
                    source,
                })?;
            match record {
                Record::Header(h) => {
                    if header.is_some() {
                        return Err(CorpusFormatError::Structure("duplicate header".into()));
                    }
                    if h.format != CORPUS_FORMAT {
                        return Err(CorpusFormatError::Structure(format!(
                            "unsupported format `{}`",
                            h.format
                        )));
                    }
                    header = Some(h);
                }
                Record::Job(j) => jobs.push(j),
                Record::Profile(p) => profiles.push(p),
                Record::Resume(r) => resumes.push(r),
                Record::Pair(p) => pairs.push(p),
            }
        }
        let h = header.ok_or_else(|| CorpusFormatError::Structure("missing header".into()))?;
        Self::new(
            h.lexicon_digest,
            jobs,
            profiles,
            resumes,
            pairs,
            h.seed,
            h.config,
        )
    }

    /// SHA-256 of the serialized corpus.
    pub fn digest(&self) -> &str {
        self.digest
            .get_or_init(|| sha256_hex(self.to_jsonl().as_bytes()))
    }

    /// Re-derives every invariant that can be checked from the stored data
    /// and returns a description of each violation.
    pub fn verify(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let rho = self.config.coverage;
        for (i, pair) in self.pairs.iter().enumerate() {
            let job = self.job_of(i);
            let profile = &self.profiles[i];
            let resume = &self.resumes[i];
            if ground_truth(profile, job, rho) != pair.q {
                problems.push(format!("pair {i}: stored label disagrees with profile"));
            }
            let recovered = CandidateProfile {
                id: profile.id.clone(),
                held: resume.concepts(),
            };
            if recovered.held != profile.held {
                problems.push(format!("pair {i}: resume concepts differ from profile"));
            }
            if ground_truth(&recovered, job, rho) != pair.q {
                problems.push(format!("pair {i}: label not recoverable from provenance"));
            }
            if !resume.spans_well_formed() {
                problems.push(format!("pair {i}: malformed provenance spans"));
            }
        }
        problems
    }
}

/// Generates a corpus. Identical `(config, lexicon, seed)` give an identical
/// corpus regardless of thread count.
pub fn generate_corpus(
    config: &GenerationConfig,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<Corpus, GenError> {
    config.validate()?;
    let n_jobs = config.n_jobs.min(config.n_pairs);
    let jobs: Vec<JobSpec> = (0..n_jobs)
        .into_par_iter()
        .map(|j| {
            let mut rng = stream_rng(seed, Stream::Job, j as u64);
            sample_job(
                &mut rng,
                lexicon,
                config.required_per_job,
                format!("job-{j:04}"),
            )
        })
        .collect::<Result<_, _>>()?;

    let n_qualified = config.qualified_count().min(config.n_pairs);
    let mut labels: Vec<bool> = (0..config.n_pairs).map(|i| i < n_qualified).collect();
    labels.shuffle(&mut stream_rng(seed, Stream::Labels, 0));

    let rows: Vec<(CandidateProfile, Resume, LabeledPair)> = labels
        .par_iter()
        .enumerate()
        .map(|(i, &q)| {
            let job = &jobs[i % n_jobs];
            let id = format!("cand-{i:05}");
            let mut rng = stream_rng(seed, Stream::Candidate, i as u64);
            let profile = sample_candidate(
                &mut rng,
                job,
                lexicon,
                q,
                config.coverage,
                &config.profiles,
                id.clone(),
            )?;
            let mut rng = stream_rng(seed, Stream::Render, i as u64);
            let resume = render_resume(&mut rng, &profile, lexicon, &config.noise, config.level)?;
            let pair = LabeledPair {
                candidate: id,
                job: job.id.clone(),
                q,
            };
            Ok((profile, resume, pair))
        })
        .collect::<Result<_, GenError>>()?;

    let mut profiles = Vec::with_capacity(rows.len());
    let mut resumes = Vec::with_capacity(rows.len());
    let mut pairs = Vec::with_capacity(rows.len());
    for (p, r, l) in rows {
        profiles.push(p);
        resumes.push(r);
        pairs.push(l);
    }
    Ok(Corpus::new(
        lexicon.digest(),
        jobs,
        profiles,
        resumes,
        pairs,
        seed,
        config.clone(),
    )
    .expect("generated corpus is structurally consistent"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::text::tokenize;

    fn lex() -> Lexicon {
        Lexicon::builtin()
    }

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn small_config(n: usize) -> GenerationConfig {
        GenerationConfig {
            n_pairs: n,
            n_jobs: 10,
            ..GenerationConfig::default()
        }
    }

    #[test]
    fn fixed_requirement_count() {
        let job = sample_job(&mut rng(1), &lex(), (5, 5), "j").unwrap();
        assert_eq!(job.required.len(), 5);
        assert_eq!(job.keywords.len(), 5);
    }

    #[test]
    fn single_requirement_keyword_is_canonical() {
        let lexicon = lex();
        let job = sample_job(&mut rng(2), &lexicon, (1, 1), "j").unwrap();
        let id = job.required.iter().next().unwrap();
        let canon = lexicon.get(id).unwrap().canonical().unwrap().tokens.clone();
        assert_eq!(job.keywords, BTreeSet::from([canon]));
    }

    #[test]
    fn requirement_range_checked() {
        assert!(matches!(
            sample_job(&mut rng(3), &lex(), (5, 61), "j"),
            Err(GenError::RequirementRange { .. })
        ));
        assert!(sample_job(&mut rng(3), &lex(), (0, 3), "j").is_err());
    }

    #[test]
    fn requirement_counts_are_uniform() {
        // chi-square goodness of fit against uniform over {5..10}, 5 dof;
        // 20.52 is the 0.999 quantile
        let lexicon = lex();
        let mut r = rng(4);
        let mut counts = [0usize; 6];
        for _ in 0..10_000 {
            let job = sample_job(&mut r, &lexicon, (5, 10), "j").unwrap();
            counts[job.required.len() - 5] += 1;
        }
        let expected = 10_000.0 / 6.0;
        let chi2: f64 = counts
            .iter()
            .map(|&c| (c as f64 - expected).powi(2) / expected)
            .sum();
        assert!(chi2 < 20.52, "chi2 = {chi2}, counts {counts:?}");
    }

    #[test]
    fn qualified_full_coverage_holds_all_requirements() {
        let lexicon = lex();
        let shape = ProfileShape::default();
        let mut r = rng(5);
        let job = sample_job(&mut r, &lexicon, (5, 10), "j").unwrap();
        for _ in 0..50 {
            let p = sample_candidate(&mut r, &job, &lexicon, true, 1.0, &shape, "c").unwrap();
            assert!(job.required.is_subset(&p.held));
        }
    }

    #[test]
    fn unqualified_misses_at_least_one() {
        let lexicon = lex();
        let shape = ProfileShape::default();
        let mut r = rng(6);
        let job = sample_job(&mut r, &lexicon, (5, 5), "j").unwrap();
        for _ in 0..200 {
            let p = sample_candidate(&mut r, &job, &lexicon, false, 1.0, &shape, "c").unwrap();
            assert!(job.required.intersection(&p.held).count() <= 4);
        }
    }

    #[test]
    fn sampled_labels_match_ground_truth() {
        let lexicon = lex();
        let shape = ProfileShape::default();
        let mut r = rng(7);
        for i in 0..1000 {
            let rho = [1.0, 0.8, 0.5, 0.3][i % 4];
            let job = sample_job(&mut r, &lexicon, (5, 10), "j").unwrap();
            let q = i % 3 != 0;
            let p = sample_candidate(&mut r, &job, &lexicon, q, rho, &shape, "c").unwrap();
            assert_eq!(ground_truth(&p, &job, rho), q, "rho {rho}");
        }
    }

    #[test]
    fn too_many_distractors_is_an_error() {
        let lexicon = lex();
        let shape = ProfileShape {
            distractors: (59, 59),
            broad_fraction: 0.0,
            ..ProfileShape::default()
        };
        let job = sample_job(&mut rng(8), &lexicon, (5, 5), "j").unwrap();
        assert!(matches!(
            sample_candidate(&mut rng(8), &job, &lexicon, true, 1.0, &shape, "c"),
            Err(GenError::LexiconTooSmall { .. })
        ));
    }

    #[test]
    fn ground_truth_exhaustive_subsets() {
        let lexicon = lex();
        let job = sample_job(&mut rng(9), &lexicon, (5, 5), "j").unwrap();
        let req: Vec<ConceptId> = job.required.iter().cloned().collect();
        let mut qualified = 0;
        for mask in 0u32..32 {
            let held: BTreeSet<ConceptId> = (0..5)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| req[b].clone())
                .collect();
            let size = held.len();
            let q = ground_truth(
                &CandidateProfile {
                    id: "c".into(),
                    held,
                },
                &job,
                0.8,
            );
            assert_eq!(q, size >= 4);
            qualified += usize::from(q);
        }
        assert_eq!(qualified, 6);
    }

    #[test]
    fn ground_truth_edges() {
        let lexicon = lex();
        let job = sample_job(&mut rng(10), &lexicon, (3, 7), "j").unwrap();
        let full = CandidateProfile {
            id: "c".into(),
            held: job.required.clone(),
        };
        let empty = CandidateProfile {
            id: "c".into(),
            held: BTreeSet::new(),
        };
        for rho in [0.1, 0.5, 1.0] {
            assert!(ground_truth(&full, &job, rho));
            assert!(!ground_truth(&empty, &job, rho));
        }
    }

    #[test]
    fn needed_coverage_absorbs_rounding() {
        assert_eq!(needed_coverage(0.7, 10), 7);
        assert_eq!(needed_coverage(0.8, 5), 4);
        assert_eq!(needed_coverage(1.0, 7), 7);
        assert_eq!(needed_coverage(0.01, 5), 1);
    }

    fn profile_with(lexicon: &Lexicon, ids: &[&str]) -> CandidateProfile {
        CandidateProfile {
            id: "c".into(),
            held: ids
                .iter()
                .map(|s| ConceptId::new(*s))
                .filter(|c| lexicon.get(c).is_some())
                .collect(),
        }
    }

    #[test]
    fn no_noise_renders_canonically() {
        let lexicon = lex();
        let profile = profile_with(&lexicon, &["machine_learning", "sql", "kubernetes"]);
        let resume = render_resume(
            &mut rng(11),
            &profile,
            &lexicon,
            &NoiseConfig::default(),
            NoiseLevel::None,
        )
        .unwrap();
        assert!(!resume.reordered);
        for (c, kind, span) in resume.concept_spans() {
            assert_eq!(kind, FormKind::Canonical);
            let canon = &lexicon.get(c).unwrap().canonical().unwrap().tokens;
            assert_eq!(&resume.tokens[span.start..span.end], canon.as_slice());
        }
        assert_eq!(resume.concepts(), profile.held);
    }

    #[test]
    fn forced_synonym_replaces_canonical() {
        let lexicon = lex();
        let profile = profile_with(&lexicon, &["machine_learning"]);
        let noise = NoiseConfig {
            p_synonym: 1.0,
            ..NoiseConfig::default()
        };
        // High scales p_synonym to 0.85; search seeds until the draw lands
        // below it, then check the substitution.
        let lexicon_ref = &lexicon;
        let canon = tokenize("machine learning");
        let resume = (0..100)
            .map(|s| {
                render_resume(&mut rng(s), &profile, lexicon_ref, &noise, NoiseLevel::High).unwrap()
            })
            .find(|r| r.kind_of(&ConceptId::new("machine_learning")) == Some(FormKind::Synonym))
            .expect("some seed draws a synonym");
        assert!(!resume.tokens.windows(2).any(|w| w == canon.as_slice()));
        let concept = lexicon.get(&ConceptId::new("machine_learning")).unwrap();
        let synonyms: Vec<_> = concept
            .form_indices(FormKind::Synonym)
            .into_iter()
            .map(|i| &concept.forms[i].tokens)
            .collect();
        assert!(synonyms
            .iter()
            .any(|s| resume.tokens.windows(s.len()).any(|w| w == s.as_slice())));
    }

    #[test]
    fn unavailable_kind_falls_back() {
        let lexicon = lex();
        // statistical_analysis has no acronym
        let profile = profile_with(&lexicon, &["statistical_analysis"]);
        let noise = NoiseConfig {
            p_synonym: 0.0,
            p_acronym: 1.0,
            p_title_variant: 0.0,
            ..NoiseConfig::default()
        };
        let found = (0..50).any(|s| {
            let r =
                render_resume(&mut rng(s), &profile, &lexicon, &noise, NoiseLevel::High).unwrap();
            matches!(
                &r.provenance[0].source,
                SpanSource::Concept {
                    kind: FormKind::Canonical,
                    fallback: true,
                    ..
                }
            )
        });
        assert!(found);
    }

    #[test]
    fn non_canonical_count_grows_with_level() {
        let lexicon = lex();
        let corpus = generate_corpus(&small_config(2000), &lexicon, 3).unwrap();
        let mut prev = 0usize;
        for level in NoiseLevel::ALL {
            let mut count = 0;
            for (i, profile) in corpus.profiles.iter().enumerate() {
                let mut r = stream_rng(3, Stream::Render, i as u64);
                let resume =
                    render_resume(&mut r, profile, &lexicon, &corpus.config.noise, level).unwrap();
                count += resume
                    .concept_spans()
                    .filter(|(_, k, _)| *k != FormKind::Canonical)
                    .count();
            }
            if level == NoiseLevel::None {
                assert_eq!(count, 0);
            }
            assert!(count >= prev, "{level}: {count} < {prev}");
            prev = count;
        }
    }

    #[test]
    fn rendered_text_tokenizes_back() {
        let lexicon = lex();
        let corpus = generate_corpus(&small_config(100), &lexicon, 5).unwrap();
        for r in &corpus.resumes {
            assert_eq!(tokenize(&r.render_text()), r.tokens);
        }
    }

    #[test]
    fn corpus_counts_and_balance() {
        let corpus = generate_corpus(&GenerationConfig::default(), &lex(), 1).unwrap();
        assert_eq!(corpus.len(), 1000);
        assert_eq!(corpus.pairs.iter().filter(|p| p.q).count(), 500);
        assert!(corpus.verify().is_empty());
    }

    #[test]
    fn single_pair_corpus() {
        let corpus = generate_corpus(&small_config(1), &lex(), 9).unwrap();
        assert_eq!(corpus.len(), 1);
        assert_eq!(corpus.jobs.len(), 1);
        assert!(corpus.verify().is_empty());
    }

    #[test]
    fn same_seed_same_bytes() {
        let lexicon = lex();
        let a = generate_corpus(&small_config(150), &lexicon, 77).unwrap();
        let b = generate_corpus(&small_config(150), &lexicon, 77).unwrap();
        assert_eq!(a.digest(), b.digest());
        let c = generate_corpus(&small_config(150), &lexicon, 78).unwrap();
        assert_ne!(a.digest(), c.digest());
    }

    #[test]
    fn jsonl_round_trip() {
        let corpus = generate_corpus(&small_config(40), &lex(), 12).unwrap();
        let text = corpus.to_jsonl();
        let back = Corpus::from_jsonl(&text).unwrap();
        assert_eq!(corpus, back);
        assert_eq!(back.to_jsonl(), text);
    }

    #[test]
    fn jsonl_rejects_garbage() {
        assert!(Corpus::from_jsonl("").is_err());
        assert!(Corpus::from_jsonl("{\"record\":\"nope\"}").is_err());
    }

    #[test]
    fn filler_pools_stay_out_of_lexicon() {
        let lexicon = lex();
        let form_tokens: BTreeSet<&str> = lexicon
            .concepts()
            .iter()
            .flat_map(|c| {
                c.forms
                    .iter()
                    .flat_map(|f| f.tokens.iter().map(String::as_str))
            })
            .collect();
        for w in RESUME_FILLER.iter().chain(JOB_FILLER) {
            assert!(
                !form_tokens.contains(w),
                "filler `{w}` collides with a form token"
            );
        }
    }

    #[test]
    fn config_validation() {
        let mut c = GenerationConfig::default();
        c.noise.p_synonym = 1.5;
        assert!(c.validate().is_err());
        for c in [
            GenerationConfig {
                coverage: 0.0,
                ..GenerationConfig::default()
            },
            GenerationConfig {
                n_pairs: 0,
                ..GenerationConfig::default()
            },
            GenerationConfig {
                required_per_job: (6, 5),
                ..GenerationConfig::default()
            },
        ] {
            assert!(c.validate().is_err());
        }
    }
}
