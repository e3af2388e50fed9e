//! Calibration, head-to-head comparison, sweeps, noise ladder and
//! false-negative attribution.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::config::{ConfigError, RunConfig};
use crate::corpusgen::{generate_corpus, Corpus, GenError, NoiseLevel};
use crate::lexicon::{ConceptId, FormKind, Lexicon};
use crate::metrics::{compare, Comparison, MetricsError, MetricsRow};
use crate::screening::{
    matched_keywords, EmbeddingSpace, KeywordRule, PipelineKind, ScoreTable, ScreenDecision,
    ScreenError, SemanticRule,
};

/// Failures of [`run_experiment`], tagged by stage.
#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("generation: {0}")]
    Generation(#[from] GenError),
    #[error("screening: {0}")]
    Screening(#[from] ScreenError),
    #[error("calibration: {0}")]
    Calibration(String),
    #[error("evaluation: {0}")]
    Evaluation(#[from] MetricsError),
    #[error("noise ladder: {0}")]
    Ladder(String),
}

/// A calibrated threshold and the acceptance rate it produces on its corpus.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Calibration {
    pub threshold: f64,
    pub acceptance_rate: f64,
    /// All scores were identical; any threshold yields all-or-nothing.
    pub degenerate: bool,
}

fn check_target(target: f64, n: usize) -> Result<(), ExperimentError> {
    if n == 0 {
        return Err(ExperimentError::Calibration("empty corpus".into()));
    }
    if !(0.0..=1.0).contains(&target) {
        return Err(ExperimentError::Calibration(format!(
            "target acceptance {target} outside [0, 1]"
        )));
    }
    Ok(())
}

/// Integer κ whose acceptance rate is closest to `target`; ties go to the
/// larger κ. Candidates run from 0 to one above the maximal score.
pub fn calibrate_kappa(scores: &[usize], target: f64) -> Result<Calibration, ExperimentError> {
    check_target(target, scores.len())?;
    let n = scores.len();
    let max = *scores.iter().max().expect("non-empty");
    let mut at_least = vec![0usize; max + 2];
    for &s in scores {
        at_least[s] += 1;
    }
    for k in (0..=max).rev() {
        at_least[k] += at_least[k + 1];
    }
    let goal = target * n as f64;
    let mut best = 0;
    for k in 0..=max + 1 {
        let d = (at_least[k] as f64 - goal).abs();
        let best_d = (at_least[best] as f64 - goal).abs();
        if d <= best_d {
            best = k;
        }
    }
    Ok(Calibration {
        threshold: best as f64,
        acceptance_rate: at_least[best] as f64 / n as f64,
        degenerate: scores.iter().all(|&s| s == scores[0]),
    })
}

/// τ at a score value whose acceptance is closest to `target`; ties go to the
/// larger τ. If every score is below 1, the value just above the maximum is
/// also a candidate, rejecting everything.
pub fn calibrate_tau(scores: &[f64], target: f64) -> Result<Calibration, ExperimentError> {
    check_target(target, scores.len())?;
    if scores.iter().any(|s| s.is_nan()) {
        return Err(ExperimentError::Calibration("NaN score".into()));
    }
    let n = scores.len();
    let mut sorted = scores.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let goal = target * n as f64;

    // (τ, accepted count) candidates in increasing τ order is not needed;
    // walk descending and keep the first (largest τ) among equals.
    let mut best_tau;
    let mut best_count;
    if sorted[0] < 1.0 {
        best_tau = sorted[0].next_up();
        best_count = 0usize;
    } else {
        best_tau = sorted[0];
        best_count = sorted.iter().take_while(|&&s| s >= best_tau).count();
    }
    let mut i = 0;
    while i < n {
        let v = sorted[i];
        let mut j = i;
        while j < n && sorted[j] == v {
            j += 1;
        }
        // τ = v accepts the first j scores
        if (j as f64 - goal).abs() < (best_count as f64 - goal).abs() {
            best_tau = v;
            best_count = j;
        }
        i = j;
    }
    Ok(Calibration {
        threshold: best_tau,
        acceptance_rate: best_count as f64 / n as f64,
        degenerate: sorted[0] == sorted[n - 1],
    })
}

/// Thresholds chosen for a run and how they were obtained.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdChoice {
    pub kappa: usize,
    pub tau: f64,
    pub keyword_method: String,
    pub semantic_method: String,
    pub keyword_acceptance: f64,
    pub semantic_acceptance: f64,
    pub degenerate_scores: bool,
}

fn acceptance(decisions: &[ScreenDecision]) -> f64 {
    if decisions.is_empty() {
        return 0.0;
    }
    decisions.iter().filter(|d| d.accept).count() as f64 / decisions.len() as f64
}

/// Resolves the configured threshold specs against a score table.
pub fn choose_thresholds(
    config: &RunConfig,
    scores: &ScoreTable,
) -> Result<ThresholdChoice, ExperimentError> {
    let kw = &config.keyword;
    let sem = &config.semantic;
    let mut degenerate = false;

    let semantic_first = !sem.match_keyword;
    let (kappa, tau, keyword_method, semantic_method);
    if semantic_first {
        let (t, m) = match (sem.tau, sem.target_acceptance) {
            (Some(t), _) => (t, "fixed".to_string()),
            (None, Some(target)) => {
                let c = calibrate_tau(&scores.semantic, target)?;
                degenerate |= c.degenerate;
                (c.threshold, format!("calibrated to acceptance {target}"))
            }
            _ => unreachable!("validated config"),
        };
        tau = t;
        semantic_method = m;
        let (k, m) = match (kw.kappa, kw.target_acceptance) {
            (Some(k), _) => (k, "fixed".to_string()),
            (None, Some(target)) => {
                let c = calibrate_kappa(&scores.keyword, target)?;
                degenerate |= c.degenerate;
                (
                    c.threshold as usize,
                    format!("calibrated to acceptance {target}"),
                )
            }
            (None, None) => {
                let target = acceptance(&scores.semantic_decisions(SemanticRule { tau }));
                let c = calibrate_kappa(&scores.keyword, target)?;
                degenerate |= c.degenerate;
                (
                    c.threshold as usize,
                    "matched to semantic acceptance".to_string(),
                )
            }
        };
        kappa = k;
        keyword_method = m;
    } else {
        let (k, m) = match (kw.kappa, kw.target_acceptance) {
            (Some(k), _) => (k, "fixed".to_string()),
            (None, Some(target)) => {
                let c = calibrate_kappa(&scores.keyword, target)?;
                degenerate |= c.degenerate;
                (
                    c.threshold as usize,
                    format!("calibrated to acceptance {target}"),
                )
            }
            _ => unreachable!("validated config"),
        };
        kappa = k;
        keyword_method = m;
        let target = acceptance(&scores.keyword_decisions(KeywordRule { kappa }));
        let c = calibrate_tau(&scores.semantic, target)?;
        degenerate |= c.degenerate;
        tau = c.threshold;
        semantic_method = "matched to keyword acceptance".to_string();
    }
    Ok(ThresholdChoice {
        kappa,
        tau,
        keyword_method,
        semantic_method,
        keyword_acceptance: acceptance(&scores.keyword_decisions(KeywordRule { kappa })),
        semantic_acceptance: acceptance(&scores.semantic_decisions(SemanticRule { tau })),
        degenerate_scores: degenerate,
    })
}

fn row(
    corpus: &Corpus,
    pipeline: PipelineKind,
    threshold: f64,
    decisions: &[ScreenDecision],
) -> Result<MetricsRow, ExperimentError> {
    let cm = crate::metrics::confusion(decisions, &corpus.pairs)?;
    Ok(MetricsRow::new(
        pipeline,
        threshold,
        corpus.config.level,
        corpus.digest(),
        cm,
    ))
}

pub fn keyword_row(
    corpus: &Corpus,
    scores: &ScoreTable,
    kappa: usize,
) -> Result<MetricsRow, ExperimentError> {
    row(
        corpus,
        PipelineKind::Keyword,
        kappa as f64,
        &scores.keyword_decisions(KeywordRule { kappa }),
    )
}

pub fn semantic_row(
    corpus: &Corpus,
    scores: &ScoreTable,
    tau: f64,
) -> Result<MetricsRow, ExperimentError> {
    row(
        corpus,
        PipelineKind::Semantic,
        tau,
        &scores.semantic_decisions(SemanticRule { tau }),
    )
}

/// Screens `corpus` with both pipelines at fixed thresholds.
pub fn run_pipeline(
    corpus: &Corpus,
    space: &EmbeddingSpace,
    kappa: usize,
    tau: f64,
) -> Result<(MetricsRow, MetricsRow), ExperimentError> {
    let scores = ScoreTable::compute(corpus, space);
    Ok((
        keyword_row(corpus, &scores, kappa)?,
        semantic_row(corpus, &scores, tau)?,
    ))
}

/// One semantic row per τ in `grid`.
pub fn tau_sweep(
    corpus: &Corpus,
    scores: &ScoreTable,
    grid: &[f64],
) -> Result<Vec<MetricsRow>, ExperimentError> {
    if grid.is_empty() {
        return Err(ExperimentError::Calibration("empty τ grid".into()));
    }
    grid.iter()
        .map(|&t| semantic_row(corpus, scores, t))
        .collect()
}

/// One keyword row per κ in `kappas`.
pub fn kappa_sweep(
    corpus: &Corpus,
    scores: &ScoreTable,
    kappas: &[usize],
) -> Result<Vec<MetricsRow>, ExperimentError> {
    if kappas.is_empty() {
        return Err(ExperimentError::Calibration("empty κ grid".into()));
    }
    kappas
        .iter()
        .map(|&k| keyword_row(corpus, scores, k))
        .collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LadderRow {
    pub level: NoiseLevel,
    pub keyword: MetricsRow,
    pub semantic: MetricsRow,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseLadder {
    /// Thresholds calibrated at the first level and frozen for the rest.
    pub thresholds: ThresholdChoice,
    pub rows: Vec<LadderRow>,
}

/// Re-renders the corpus at each level from the same seed (jobs, profiles
/// and labels are level-independent) and screens it with thresholds
/// calibrated at the first level.
pub fn noise_ladder(
    config: &RunConfig,
    lexicon: &Lexicon,
    space: &EmbeddingSpace,
    levels: &[NoiseLevel],
) -> Result<NoiseLadder, ExperimentError> {
    if levels.is_empty() {
        return Err(ExperimentError::Ladder("no levels".into()));
    }
    let mut thresholds: Option<ThresholdChoice> = None;
    let mut labels: Option<Vec<bool>> = None;
    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let mut gen = config.corpus.clone();
        gen.level = level;
        let corpus = generate_corpus(&gen, lexicon, config.seed)?;
        let q = corpus.labels();
        match &labels {
            None => labels = Some(q),
            Some(first) if *first != q => {
                return Err(ExperimentError::Ladder(format!(
                    "labels changed at level {level}"
                )));
            }
            Some(_) => {}
        }
        let scores = ScoreTable::compute(&corpus, space);
        let t = match &thresholds {
            Some(t) => t.clone(),
            None => {
                let t = choose_thresholds(config, &scores)?;
                thresholds = Some(t.clone());
                t
            }
        };
        rows.push(LadderRow {
            level,
            keyword: keyword_row(&corpus, &scores, t.kappa)?,
            semantic: semantic_row(&corpus, &scores, t.tau)?,
        });
    }
    Ok(NoiseLadder {
        thresholds: thresholds.expect("at least one level"),
        rows,
    })
}

/// Cause assigned to a false negative.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FnCause {
    SynonymSubstitution,
    AcronymExpansion,
    RoleTitleVariation,
    ReorderingOnly,
    InsufficientContext,
    Other,
}

impl FnCause {
    pub const ALL: [FnCause; 6] = [
        FnCause::SynonymSubstitution,
        FnCause::AcronymExpansion,
        FnCause::RoleTitleVariation,
        FnCause::ReorderingOnly,
        FnCause::InsufficientContext,
        FnCause::Other,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            FnCause::SynonymSubstitution => "synonym_substitution",
            FnCause::AcronymExpansion => "acronym_expansion",
            FnCause::RoleTitleVariation => "role_title_variation",
            FnCause::ReorderingOnly => "reordering_only",
            FnCause::InsufficientContext => "insufficient_context",
            FnCause::Other => "other",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FnBreakdown {
    pub synonym_substitution: u64,
    pub acronym_expansion: u64,
    pub role_title_variation: u64,
    pub reordering_only: u64,
    pub insufficient_context: u64,
    pub other: u64,
}

impl FnBreakdown {
    pub fn get(&self, cause: FnCause) -> u64 {
        match cause {
            FnCause::SynonymSubstitution => self.synonym_substitution,
            FnCause::AcronymExpansion => self.acronym_expansion,
            FnCause::RoleTitleVariation => self.role_title_variation,
            FnCause::ReorderingOnly => self.reordering_only,
            FnCause::InsufficientContext => self.insufficient_context,
            FnCause::Other => self.other,
        }
    }

    fn bump(&mut self, cause: FnCause) {
        let slot = match cause {
            FnCause::SynonymSubstitution => &mut self.synonym_substitution,
            FnCause::AcronymExpansion => &mut self.acronym_expansion,
            FnCause::RoleTitleVariation => &mut self.role_title_variation,
            FnCause::ReorderingOnly => &mut self.reordering_only,
            FnCause::InsufficientContext => &mut self.insufficient_context,
            FnCause::Other => &mut self.other,
        };
        *slot += 1;
    }

    pub fn total(&self) -> u64 {
        FnCause::ALL.iter().map(|&c| self.get(c)).sum()
    }
}

/// Required concepts of pair `i` the pipeline did not credit.
///
/// Keyword credits a concept when its canonical form occurs; semantic credits
/// it when any of its forms is recognized.
pub fn missed_concepts(
    corpus: &Corpus,
    i: usize,
    pipeline: PipelineKind,
    space: &EmbeddingSpace,
) -> BTreeSet<ConceptId> {
    let job = corpus.job_of(i);
    let resume = &corpus.resumes[i];
    match pipeline {
        PipelineKind::Keyword => {
            let lexicon = space.lexicon();
            let hit = matched_keywords(&job.keywords, &resume.tokens);
            job.required
                .iter()
                .filter(|id| {
                    let canon = lexicon
                        .get(id)
                        .and_then(|c| c.canonical())
                        .map(|f| &f.tokens);
                    canon.is_none_or(|c| !hit.contains(c))
                })
                .cloned()
                .collect()
        }
        PipelineKind::Semantic => {
            let seen = space.resolved_concepts(&resume.tokens);
            job.required.difference(&seen).cloned().collect()
        }
    }
}

/// Dominant cause of a false negative from its missed concepts.
///
/// Each missed concept votes for the perturbation that rendered it; a missed
/// concept rendered canonically votes for reordering if the resume was
/// reordered. Ties go to synonym, then acronym, then title, then reordering.
/// No missed concepts means the shortfall is not attributable to any
/// requirement (`insufficient_context`); missed concepts with no recorded
/// perturbation give `other`.
pub fn classify_fn(corpus: &Corpus, i: usize, missed: &BTreeSet<ConceptId>) -> FnCause {
    if missed.is_empty() {
        return FnCause::InsufficientContext;
    }
    let resume = &corpus.resumes[i];
    let mut votes = [0usize; 4];
    for c in missed {
        match resume.kind_of(c) {
            Some(FormKind::Synonym) => votes[0] += 1,
            Some(FormKind::Acronym) => votes[1] += 1,
            Some(FormKind::RoleTitleVariant) => votes[2] += 1,
            Some(FormKind::Canonical) if resume.reordered => votes[3] += 1,
            _ => {}
        }
    }
    let causes = [
        FnCause::SynonymSubstitution,
        FnCause::AcronymExpansion,
        FnCause::RoleTitleVariation,
        FnCause::ReorderingOnly,
    ];
    let mut best: Option<usize> = None;
    for (k, &v) in votes.iter().enumerate() {
        if v > 0 && best.is_none_or(|b| v > votes[b]) {
            best = Some(k);
        }
    }
    best.map_or(FnCause::Other, |k| causes[k])
}

pub fn fn_breakdown(
    corpus: &Corpus,
    decisions: &[ScreenDecision],
    pipeline: PipelineKind,
    space: &EmbeddingSpace,
) -> Result<FnBreakdown, ExperimentError> {
    if decisions.len() != corpus.len() {
        return Err(MetricsError::LengthMismatch {
            decisions: decisions.len(),
            labels: corpus.len(),
        }
        .into());
    }
    let mut out = FnBreakdown::default();
    for (i, d) in decisions.iter().enumerate() {
        if corpus.pairs[i].q && !d.accept {
            let missed = missed_concepts(corpus, i, pipeline, space);
            out.bump(classify_fn(corpus, i, &missed));
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub tool: String,
    pub version: String,
    pub config_digest: String,
    pub seed: u64,
    /// RFC 3339 instant, or `null` for reproducible output.
    pub timestamp: Option<String>,
    pub lexicon_digest: String,
    pub corpus_digest: String,
    pub n_pairs: usize,
    pub noise_level: NoiseLevel,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub keyword: MetricsRow,
    pub semantic: MetricsRow,
    pub change: Comparison,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Breakdowns {
    pub keyword: FnBreakdown,
    pub semantic: FnBreakdown,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrictionReport {
    pub header: ReportHeader,
    pub thresholds: ThresholdChoice,
    pub comparison: ComparisonTable,
    pub tau_sweep: Vec<MetricsRow>,
    pub kappa_sweep: Vec<MetricsRow>,
    pub noise_ladder: NoiseLadder,
    pub fn_breakdown: Breakdowns,
}

impl FrictionReport {
    /// Keyword rows for κ within `radius` of the chosen κ.
    pub fn kappa_neighbourhood(&self, radius: usize) -> Vec<&MetricsRow> {
        let k = self.thresholds.kappa as f64;
        self.kappa_sweep
            .iter()
            .filter(|r| (r.threshold - k).abs() <= radius as f64)
            .collect()
    }
}

/// Intermediate artifacts of a run, kept for inspection and tests.
pub struct ExperimentRun {
    pub report: FrictionReport,
    pub corpus: Corpus,
    pub scores: ScoreTable,
    pub space: EmbeddingSpace,
}

/// Full protocol with a lexicon resolved relative to the working directory.
pub fn run_experiment(config: &RunConfig) -> Result<FrictionReport, ExperimentError> {
    let lexicon = config.load_lexicon(None)?;
    Ok(run_experiment_with(config, &lexicon)?.report)
}

/// Generate, score, calibrate, compare, sweep, climb the noise ladder and
/// attribute false negatives.
pub fn run_experiment_with(
    config: &RunConfig,
    lexicon: &Lexicon,
) -> Result<ExperimentRun, ExperimentError> {
    config.validate()?;
    let space = EmbeddingSpace::new(lexicon, config.embedding.clone())?;
    let corpus = generate_corpus(&config.corpus, lexicon, config.seed)?;
    let scores = ScoreTable::compute(&corpus, &space);
    let thresholds = choose_thresholds(config, &scores)?;

    let keyword = keyword_row(&corpus, &scores, thresholds.kappa)?;
    let semantic = semantic_row(&corpus, &scores, thresholds.tau)?;
    let change = compare(&keyword, &semantic)?;

    let tau_sweep = tau_sweep(&corpus, &scores, &config.sweep.tau_grid())?;
    let max_kw = scores.keyword.iter().copied().max().unwrap_or(0);
    let top = max_kw.max(thresholds.kappa + config.sweep.kappa_radius) + 1;
    let kappas: Vec<usize> = (0..=top).collect();
    let kappa_sweep = kappa_sweep(&corpus, &scores, &kappas)?;

    let noise_ladder = noise_ladder(config, lexicon, &space, &config.ladder.levels)?;

    let fn_breakdown = Breakdowns {
        keyword: fn_breakdown(
            &corpus,
            &scores.keyword_decisions(KeywordRule {
                kappa: thresholds.kappa,
            }),
            PipelineKind::Keyword,
            &space,
        )?,
        semantic: fn_breakdown(
            &corpus,
            &scores.semantic_decisions(SemanticRule {
                tau: thresholds.tau,
            }),
            PipelineKind::Semantic,
            &space,
        )?,
    };

    let header = ReportHeader {
        tool: "frictionlab".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        config_digest: config.digest(),
        seed: config.seed,
        timestamp: None,
        lexicon_digest: lexicon.digest(),
        corpus_digest: corpus.digest().to_string(),
        n_pairs: corpus.len(),
        noise_level: config.corpus.level,
    };
    let report = FrictionReport {
        header,
        thresholds,
        comparison: ComparisonTable {
            keyword,
            semantic,
            change,
        },
        tau_sweep,
        kappa_sweep,
        noise_ladder,
        fn_breakdown,
    };
    Ok(ExperimentRun {
        report,
        corpus,
        scores,
        space,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpusgen::GenerationConfig;
    use crate::screening::EmbeddingParams;
    use proptest::prelude::*;

    fn brute_kappa(scores: &[usize], target: f64) -> usize {
        let n = scores.len() as f64;
        let max = *scores.iter().max().unwrap();
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for k in 0..=max + 1 {
            let acc = scores.iter().filter(|&&s| s >= k).count() as f64;
            let d = (acc - target * n).abs();
            if d <= best_d {
                best = k;
                best_d = d;
            }
        }
        best
    }

    #[test]
    fn kappa_boundaries() {
        let scores = [0, 1, 2, 3, 3, 5];
        let all = calibrate_kappa(&scores, 1.0).unwrap();
        assert_eq!(all.threshold, 0.0);
        assert_eq!(all.acceptance_rate, 1.0);
        let none = calibrate_kappa(&scores, 0.0).unwrap();
        assert_eq!(none.threshold, 6.0);
        assert_eq!(none.acceptance_rate, 0.0);
    }

    #[test]
    fn tau_boundaries() {
        let scores = [0.1, 0.5, 0.5, 0.9];
        let none = calibrate_tau(&scores, 0.0).unwrap();
        assert!(none.threshold > 0.9);
        assert_eq!(none.acceptance_rate, 0.0);
        let all = calibrate_tau(&scores, 1.0).unwrap();
        assert_eq!(all.threshold, 0.1);
        assert_eq!(all.acceptance_rate, 1.0);
        // τ = 0.9 accepts 1 and τ = 0.5 accepts 3, equally far from 2
        let half = calibrate_tau(&scores, 0.5).unwrap();
        assert_eq!(half.threshold, 0.9);
        assert_eq!(half.acceptance_rate, 0.25);
    }

    #[test]
    fn tau_tie_prefers_larger() {
        // target 0.5 of 4: τ = 0.9 accepts 1, τ = 0.7 accepts 3; both miss by 1
        let c = calibrate_tau(&[0.1, 0.7, 0.7, 0.9], 0.5).unwrap();
        assert_eq!(c.threshold, 0.9);
    }

    #[test]
    fn degenerate_scores_flagged() {
        let c = calibrate_kappa(&[2, 2, 2], 0.5).unwrap();
        assert!(c.degenerate);
        let c = calibrate_tau(&[0.3; 5], 0.5).unwrap();
        assert!(c.degenerate);
        assert!(calibrate_tau(&[], 0.5).is_err());
    }

    proptest! {
        #[test]
        fn kappa_matches_exhaustive(scores in proptest::collection::vec(0usize..12, 1..60), target in 0.0f64..=1.0) {
            let c = calibrate_kappa(&scores, target).unwrap();
            prop_assert_eq!(c.threshold as usize, brute_kappa(&scores, target));
            let k = c.threshold as usize;
            let acc = scores.iter().filter(|&&s| s >= k).count() as f64 / scores.len() as f64;
            prop_assert_eq!(acc, c.acceptance_rate);
        }

        #[test]
        fn tau_calibration_is_faithful(scores in proptest::collection::vec(-1.0f64..1.0, 1..60), target in 0.0f64..=1.0) {
            let c = calibrate_tau(&scores, target).unwrap();
            let n = scores.len() as f64;
            let acc = scores.iter().filter(|&&s| s >= c.threshold).count() as f64 / n;
            prop_assert_eq!(acc, c.acceptance_rate);
            // no other threshold does strictly better
            for &t in &scores {
                let a = scores.iter().filter(|&&s| s >= t).count() as f64;
                prop_assert!((a - target * n).abs() >= (c.acceptance_rate * n - target * n).abs() - 1e-9);
            }
        }
    }

    fn small_run(level: NoiseLevel, n: usize) -> RunConfig {
        let mut c = RunConfig::default();
        c.corpus = GenerationConfig {
            n_pairs: n,
            n_jobs: 20,
            level,
            ..c.corpus
        };
        c
    }

    #[test]
    fn canonical_corpus_full_keyword_recall() {
        let mut c = small_run(NoiseLevel::None, 200);
        c.corpus.required_per_job = (6, 6);
        let lexicon = Lexicon::builtin();
        let corpus = generate_corpus(&c.corpus, &lexicon, 3).unwrap();
        let space = EmbeddingSpace::new(&lexicon, EmbeddingParams::default()).unwrap();
        let (kw, _) = run_pipeline(&corpus, &space, 6, 0.75).unwrap();
        assert_eq!(kw.recall, Some(1.0));
        assert_eq!(kw.friction, Some(0.0));
    }

    #[test]
    fn ladder_of_one_clean_level() {
        let c = small_run(NoiseLevel::None, 200);
        let lexicon = Lexicon::builtin();
        let space = EmbeddingSpace::new(&lexicon, c.embedding.clone()).unwrap();
        let mut c = c;
        c.semantic.tau = Some(0.5);
        // without broad profiles every qualified cosine is at least sqrt(5/6)
        c.corpus.profiles.broad_fraction = 0.0;
        let ladder = noise_ladder(&c, &lexicon, &space, &[NoiseLevel::None]).unwrap();
        assert_eq!(ladder.rows.len(), 1);
        assert_eq!(ladder.rows[0].keyword.recall, Some(1.0));
        assert_eq!(ladder.rows[0].semantic.recall, Some(1.0));
    }

    #[test]
    fn single_point_sweep_equals_pipeline() {
        let c = small_run(NoiseLevel::Medium, 100);
        let lexicon = Lexicon::builtin();
        let corpus = generate_corpus(&c.corpus, &lexicon, 1).unwrap();
        let space = EmbeddingSpace::new(&lexicon, c.embedding.clone()).unwrap();
        let scores = ScoreTable::compute(&corpus, &space);
        let sweep = tau_sweep(&corpus, &scores, &[0.7]).unwrap();
        let (_, sem) = run_pipeline(&corpus, &space, 3, 0.7).unwrap();
        assert_eq!(sweep, vec![sem]);
        assert!(tau_sweep(&corpus, &scores, &[]).is_err());
    }

    #[test]
    fn breakdown_sums_to_fn() {
        let c = small_run(NoiseLevel::Medium, 300);
        let lexicon = Lexicon::builtin();
        let run = run_experiment_with(&c, &lexicon).unwrap();
        let r = &run.report;
        assert_eq!(
            r.fn_breakdown.keyword.total(),
            r.comparison.keyword.confusion.fn_
        );
        assert_eq!(
            r.fn_breakdown.semantic.total(),
            r.comparison.semantic.confusion.fn_
        );
    }

    #[test]
    fn zero_fn_gives_empty_breakdown() {
        let c = small_run(NoiseLevel::Medium, 50);
        let lexicon = Lexicon::builtin();
        let corpus = generate_corpus(&c.corpus, &lexicon, 2).unwrap();
        let space = EmbeddingSpace::new(&lexicon, c.embedding.clone()).unwrap();
        let scores = ScoreTable::compute(&corpus, &space);
        let b = fn_breakdown(
            &corpus,
            &scores.keyword_decisions(KeywordRule { kappa: 0 }),
            PipelineKind::Keyword,
            &space,
        )
        .unwrap();
        assert_eq!(b, FnBreakdown::default());
    }

    #[test]
    fn all_synonym_miss_is_synonym_cause() {
        let c = small_run(NoiseLevel::High, 300);
        let lexicon = Lexicon::builtin();
        let corpus = generate_corpus(&c.corpus, &lexicon, 5).unwrap();
        let space = EmbeddingSpace::new(&lexicon, c.embedding.clone()).unwrap();
        let mut seen = false;
        for i in 0..corpus.len() {
            let missed = missed_concepts(&corpus, i, PipelineKind::Keyword, &space);
            if !missed.is_empty()
                && missed
                    .iter()
                    .all(|m| corpus.resumes[i].kind_of(m) == Some(FormKind::Synonym))
            {
                assert_eq!(
                    classify_fn(&corpus, i, &missed),
                    FnCause::SynonymSubstitution
                );
                seen = true;
            }
        }
        assert!(seen);
    }

    #[test]
    fn tiny_run_succeeds() {
        let c = small_run(NoiseLevel::Medium, 1);
        let lexicon = Lexicon::builtin();
        let run = run_experiment_with(&c, &lexicon).unwrap();
        assert_eq!(run.report.header.n_pairs, 1);
    }
}
