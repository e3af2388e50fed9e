//! Keyword and semantic decision functions.

use std::collections::{BTreeSet, HashSet};
use std::fmt;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpusgen::{canonical_keywords, Corpus, GenError, JobSpec, Resume};
use crate::lexicon::{ConceptId, FormKind, Lexicon};
use crate::seed::{fnv1a, mix64, stream_rng, Stream};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PipelineKind {
    Keyword,
    Semantic,
}

impl PipelineKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PipelineKind::Keyword => "keyword",
            PipelineKind::Semantic => "semantic",
        }
    }
}

impl fmt::Display for PipelineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
pub enum ScreenError {
    #[error("vector dimensions differ: {0} vs {1}")]
    DimensionMismatch(usize, usize),
    #[error("threshold τ = {0} outside [-1, 1]")]
    TauOutOfRange(f64),
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("form noise η = {0} must be finite and non-negative")]
    BadEta(f64),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScreenDecision {
    pub pipeline: PipelineKind,
    pub score: f64,
    pub accept: bool,
}

/// Accept iff at least `kappa` job keywords occur in the resume.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KeywordRule {
    pub kappa: usize,
}

impl KeywordRule {
    pub fn decide(&self, score: usize) -> ScreenDecision {
        ScreenDecision {
            pipeline: PipelineKind::Keyword,
            score: score as f64,
            accept: score >= self.kappa,
        }
    }
}

/// Accept iff cosine similarity is at least `tau`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SemanticRule {
    pub tau: f64,
}

impl SemanticRule {
    pub fn new(tau: f64) -> Result<Self, ScreenError> {
        if !(-1.0..=1.0).contains(&tau) {
            return Err(ScreenError::TauOutOfRange(tau));
        }
        Ok(Self { tau })
    }

    pub fn decide(&self, score: f64) -> ScreenDecision {
        ScreenDecision {
            pipeline: PipelineKind::Semantic,
            score,
            accept: score >= self.tau,
        }
    }
}

/// Canonical forms of the job's required concepts.
pub fn extract_keywords(
    job: &JobSpec,
    lexicon: &Lexicon,
) -> Result<BTreeSet<Vec<String>>, GenError> {
    canonical_keywords(lexicon, &job.required)
}

/// Keywords that occur in `tokens` as contiguous windows.
pub fn matched_keywords<'a>(
    keywords: &'a BTreeSet<Vec<String>>,
    tokens: &[String],
) -> BTreeSet<&'a Vec<String>> {
    let lengths: BTreeSet<usize> = keywords.iter().map(Vec::len).collect();
    let mut windows: HashSet<&[String]> = HashSet::new();
    for &n in &lengths {
        if n > 0 && n <= tokens.len() {
            windows.extend(tokens.windows(n));
        }
    }
    keywords
        .iter()
        .filter(|k| windows.contains(k.as_slice()))
        .collect()
}

/// |K_c ∩ K_j|: number of job keywords present in the resume.
pub fn keyword_score(keywords: &BTreeSet<Vec<String>>, tokens: &[String]) -> usize {
    matched_keywords(keywords, tokens).len()
}

pub fn keyword_screen(resume: &Resume, job: &JobSpec, rule: KeywordRule) -> ScreenDecision {
    rule.decide(keyword_score(&job.keywords, &resume.tokens))
}

/// Dot product over norms. A zero vector on either side yields 0.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, ScreenError> {
    if u.len() != v.len() {
        return Err(ScreenError::DimensionMismatch(u.len(), v.len()));
    }
    let (mut dot, mut nu, mut nv) = (0.0, 0.0, 0.0);
    for (a, b) in u.iter().zip(v) {
        dot += a * b;
        nu += a * a;
        nv += b * b;
    }
    if nu == 0.0 || nv == 0.0 {
        return Ok(0.0);
    }
    Ok(dot / (nu.sqrt() * nv.sqrt()))
}

/// A document embedding. `degenerate` marks the all-zero vector of a
/// document with no recognizable content.
#[derive(Clone, Debug, PartialEq)]
pub struct Embedding {
    pub vector: Vec<f64>,
    pub degenerate: bool,
}

/// Maps token sequences to vectors. Implementations must be deterministic.
pub trait Embedder: Sync {
    fn dim(&self) -> usize;
    fn embed(&self, tokens: &[String]) -> Embedding;
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EmbeddingParams {
    pub dim: usize,
    pub eta: f64,
    pub anchor_seed: u64,
}

impl Default for EmbeddingParams {
    fn default() -> Self {
        Self {
            dim: 256,
            eta: 0.05,
            anchor_seed: 0x5eed_a7c4,
        }
    }
}

/// Concept-anchored pseudo-embedding.
///
/// Each concept owns a random unit anchor. A canonical form maps to its
/// anchor; every other form maps to the anchor plus a form-specific offset of
/// norm `eta`. A document vector is the normalized sum of the vectors of the
/// forms found by a greedy longest-match scan; unmatched tokens contribute
/// nothing.
#[derive(Clone, Debug)]
pub struct EmbeddingSpace {
    params: EmbeddingParams,
    lexicon: Lexicon,
    anchors: Vec<Vec<f64>>,
    /// `form_vectors[concept][form]`
    form_vectors: Vec<Vec<Vec<f64>>>,
}

fn gaussian_unit(seed_master: u64, stream: Stream, key: u64, dim: usize) -> Vec<f64> {
    let mut rng = stream_rng(seed_master, stream, key);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Anchor of `concept`; depends only on `(anchor_seed, concept, dim)`.
pub fn concept_anchor(anchor_seed: u64, concept: &ConceptId, dim: usize) -> Vec<f64> {
    let key = fnv1a(concept.as_str().as_bytes()) ^ mix64(dim as u64);
    gaussian_unit(anchor_seed, Stream::Anchor, key, dim)
}

fn form_offset(
    anchor_seed: u64,
    concept: &ConceptId,
    form_text: &str,
    dim: usize,
    eta: f64,
) -> Vec<f64> {
    let mut key_bytes = concept.as_str().as_bytes().to_vec();
    key_bytes.push(0);
    key_bytes.extend_from_slice(form_text.as_bytes());
    let key = fnv1a(&key_bytes) ^ mix64(dim as u64);
    gaussian_unit(anchor_seed, Stream::FormOffset, key, dim)
        .into_iter()
        .map(|x| x * eta)
        .collect()
}

impl EmbeddingSpace {
    pub fn new(lexicon: &Lexicon, params: EmbeddingParams) -> Result<Self, ScreenError> {
        if params.dim == 0 {
            return Err(ScreenError::ZeroDimension);
        }
        if !(params.eta.is_finite() && params.eta >= 0.0) {
            return Err(ScreenError::BadEta(params.eta));
        }
        let mut anchors = Vec::with_capacity(lexicon.len());
        let mut form_vectors = Vec::with_capacity(lexicon.len());
        for concept in lexicon.concepts() {
            let anchor = concept_anchor(params.anchor_seed, &concept.id, params.dim);
            let forms = concept
                .forms
                .iter()
                .map(|f| {
                    if f.kind == FormKind::Canonical || params.eta == 0.0 {
                        anchor.clone()
                    } else {
                        let off = form_offset(
                            params.anchor_seed,
                            &concept.id,
                            &f.text(),
                            params.dim,
                            params.eta,
                        );
                        anchor.iter().zip(off).map(|(a, o)| a + o).collect()
                    }
                })
                .collect();
            anchors.push(anchor);
            form_vectors.push(forms);
        }
        Ok(Self {
            params,
            lexicon: lexicon.clone(),
            anchors,
            form_vectors,
        })
    }

    pub fn params(&self) -> &EmbeddingParams {
        &self.params
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn anchor(&self, concept: &ConceptId) -> Option<&[f64]> {
        self.lexicon
            .index_of(concept)
            .map(|i| self.anchors[i].as_slice())
    }

    /// Vector of form `form` of the concept at lexicon position `concept`.
    pub fn form_vector(&self, concept: usize, form: usize) -> &[f64] {
        &self.form_vectors[concept][form]
    }

    /// Concepts recognized in `tokens`.
    pub fn resolved_concepts(&self, tokens: &[String]) -> BTreeSet<ConceptId> {
        self.lexicon
            .scan(tokens)
            .into_iter()
            .map(|m| self.lexicon.concept(m.form.concept).id.clone())
            .collect()
    }
}

impl Embedder for EmbeddingSpace {
    fn dim(&self) -> usize {
        self.params.dim
    }

    fn embed(&self, tokens: &[String]) -> Embedding {
        let mut sum = vec![0.0; self.params.dim];
        for m in self.lexicon.scan(tokens) {
            let v = &self.form_vectors[m.form.concept][m.form.form];
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
        }
        let norm = sum.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Embedding {
                vector: sum,
                degenerate: true,
            };
        }
        Embedding {
            vector: sum.into_iter().map(|x| x / norm).collect(),
            degenerate: false,
        }
    }
}

/// Cosine between two embeddings; 0 when either is degenerate.
pub fn similarity(a: &Embedding, b: &Embedding) -> f64 {
    if a.degenerate || b.degenerate {
        return 0.0;
    }
    cosine(&a.vector, &b.vector).expect("embeddings share a dimension")
}

pub fn semantic_screen<E: Embedder>(
    embedder: &E,
    resume: &Resume,
    job: &JobSpec,
    rule: SemanticRule,
) -> ScreenDecision {
    let score = similarity(&embedder.embed(&resume.tokens), &embedder.embed(&job.text));
    rule.decide(score)
}

/// Raw scores of both pipelines for every pair of a corpus. Thresholds are
/// applied afterwards, so sweeps never re-score.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoreTable {
    pub keyword: Vec<usize>,
    pub semantic: Vec<f64>,
}

impl ScoreTable {
    pub fn compute<E: Embedder>(corpus: &Corpus, embedder: &E) -> Self {
        let job_vectors: Vec<Embedding> = corpus
            .jobs
            .par_iter()
            .map(|j| embedder.embed(&j.text))
            .collect();
        let job_pos: std::collections::HashMap<&str, usize> = corpus
            .jobs
            .iter()
            .enumerate()
            .map(|(i, j)| (j.id.as_str(), i))
            .collect();
        let (keyword, semantic) = (0..corpus.len())
            .into_par_iter()
            .map(|i| {
                let resume = &corpus.resumes[i];
                let jp = job_pos[corpus.pairs[i].job.as_str()];
                let job = &corpus.jobs[jp];
                let kw = keyword_score(&job.keywords, &resume.tokens);
                let sem = similarity(&embedder.embed(&resume.tokens), &job_vectors[jp]);
                (kw, sem)
            })
            .unzip();
        Self { keyword, semantic }
    }

    pub fn len(&self) -> usize {
        self.keyword.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keyword.is_empty()
    }

    pub fn keyword_decisions(&self, rule: KeywordRule) -> Vec<ScreenDecision> {
        self.keyword.iter().map(|&s| rule.decide(s)).collect()
    }

    pub fn semantic_decisions(&self, rule: SemanticRule) -> Vec<ScreenDecision> {
        self.semantic.iter().map(|&s| rule.decide(s)).collect()
    }
}

/// Both screening systems with fixed thresholds.
#[derive(Clone, Debug)]
pub struct Pipeline {
    pub keyword: KeywordRule,
    pub semantic: SemanticRule,
    pub space: EmbeddingSpace,
}

impl Pipeline {
    /// Per-pair `(keyword, semantic)` decisions.
    pub fn run(&self, corpus: &Corpus) -> (Vec<ScreenDecision>, Vec<ScreenDecision>) {
        let scores = ScoreTable::compute(corpus, &self.space);
        (
            scores.keyword_decisions(self.keyword),
            scores.semantic_decisions(self.semantic),
        )
    }
}
