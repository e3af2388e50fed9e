use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{CommandFactory, FromArgMatches, Parser, Subcommand};

use frictionlab::corpusgen::{generate_corpus, Corpus};
use frictionlab::experiments::{
    choose_thresholds, kappa_sweep, keyword_row, noise_ladder, run_experiment_with, semantic_row,
    tau_sweep, ExperimentError, ThresholdChoice,
};
use frictionlab::metrics::{compare, fmt_f64, MetricsRow};
use frictionlab::output::{self, metrics_csv, write_atomic};
use frictionlab::screening::{EmbeddingSpace, KeywordRule, ScoreTable, SemanticRule};
use frictionlab::{Lexicon, RunConfig};

/// Environment variable naming a directory that holds `default.toml`.
const CONFIG_DIR_ENV: &str = "FRICTIONLAB_CONFIG_DIR";

#[derive(Parser, Debug)]
#[command(
    name = "frictionlab",
    about = "Measure false-negative friction of keyword vs semantic resume screening on synthetic corpora"
)]
struct Cli {
    /// Run configuration (TOML). Defaults to $FRICTIONLAB_CONFIG_DIR/default.toml,
    /// then to the built-in configuration.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Master seed; overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Output directory; overrides `output.dir`.
    #[arg(long, global = true, value_name = "DIR")]
    out_dir: Option<PathBuf>,

    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Print progress to stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write the built-in lexicon document, a starting point for custom lexicons.
    GenLexiconTemplate {
        /// Destination file; stdout if omitted.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Generate a corpus and write it as JSON lines.
    Generate,
    /// Score every pair with both pipelines and write per-pair decisions.
    Screen {
        /// Screen an existing corpus file instead of generating one.
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
    },
    /// Screen, then write the comparison table and metrics rows.
    Evaluate {
        #[arg(long, value_name = "FILE")]
        corpus: Option<PathBuf>,
    },
    /// Threshold sweeps: τ over the configured grid, κ over every useful value.
    Sweep,
    /// Noise ladder with thresholds frozen at the lowest level.
    Ladder,
    /// Full report: JSON document, CSV tables, plot data and summary.
    Report,
    /// Check a lexicon and the configuration; exit 1 on any diagnostic.
    Validate {
        /// Lexicon file, or `builtin`. Defaults to the configured lexicon.
        #[arg(long, value_name = "FILE")]
        lexicon: Option<String>,
    },
}

/// Exit codes.
mod code {
    pub const DIAGNOSTICS: u8 = 1;
    pub const CONFIG: u8 = 2;
    pub const GENERATION: u8 = 3;
    pub const EVALUATION: u8 = 4;
    pub const IO: u8 = 5;
}

struct Failure {
    code: u8,
    stage: &'static str,
    error: anyhow::Error,
}

impl Failure {
    fn new(code: u8, stage: &'static str, error: impl Into<anyhow::Error>) -> Self {
        Self {
            code,
            stage,
            error: error.into(),
        }
    }

    fn config(e: impl Into<anyhow::Error>) -> Self {
        Self::new(code::CONFIG, "config", e)
    }

    fn io(e: impl Into<anyhow::Error>) -> Self {
        Self::new(code::IO, "io", e)
    }
}

impl From<ExperimentError> for Failure {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Config(_) => Self::new(code::CONFIG, "config", e),
            ExperimentError::Generation(_) | ExperimentError::Ladder(_) => {
                Self::new(code::GENERATION, "generation", e)
            }
            _ => Self::new(code::EVALUATION, "evaluation", e),
        }
    }
}

type Result<T> = std::result::Result<T, Failure>;

struct Ctx {
    config: RunConfig,
    config_dir: Option<PathBuf>,
    out_dir: PathBuf,
    verbose: bool,
}

impl Ctx {
    fn log(&self, msg: &str) {
        if self.verbose {
            eprintln!("[frictionlab] {msg}");
        }
    }

    fn lexicon(&self) -> Result<Lexicon> {
        self.config
            .load_lexicon(self.config_dir.as_deref())
            .map_err(Failure::config)
    }

    fn write(&self, name: &str, body: &str) -> Result<PathBuf> {
        let path = self.out_dir.join(name);
        write_atomic(&path, body.as_bytes())
            .with_context(|| format!("writing {}", path.display()))
            .map_err(Failure::io)?;
        self.log(&format!("wrote {}", path.display()));
        Ok(path)
    }
}

fn version_string() -> String {
    let digest = RunConfig::default().digest();
    format!(
        "{} (default-config sha256:{digest})",
        env!("CARGO_PKG_VERSION")
    )
}

fn resolve_config(cli: &Cli) -> Result<(RunConfig, Option<PathBuf>)> {
    let path = match &cli.config {
        Some(p) => Some(p.clone()),
        None => std::env::var_os(CONFIG_DIR_ENV)
            .map(|dir| PathBuf::from(dir).join("default.toml"))
            .filter(|p| p.exists()),
    };
    let mut config = match &path {
        Some(p) => RunConfig::from_path(p).map_err(Failure::config)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    let dir = path
        .as_deref()
        .and_then(Path::parent)
        .map(Path::to_path_buf);
    Ok((config, dir))
}

/// RFC 3339 time from SOURCE_DATE_EPOCH, so reports stay reproducible unless
/// a build system asks for a stamp.
fn timestamp() -> Result<Option<String>> {
    let Ok(raw) = std::env::var("SOURCE_DATE_EPOCH") else {
        return Ok(None);
    };
    let secs: i64 = raw.trim().parse().map_err(|_| {
        Failure::config(anyhow::anyhow!(
            "SOURCE_DATE_EPOCH `{raw}` is not an integer"
        ))
    })?;
    let t = time::OffsetDateTime::from_unix_timestamp(secs).map_err(Failure::config)?;
    let s = t
        .format(&time::format_description::well_known::Rfc3339)
        .map_err(Failure::config)?;
    Ok(Some(s))
}

fn load_or_generate(ctx: &Ctx, lexicon: &Lexicon, corpus: Option<&Path>) -> Result<Corpus> {
    match corpus {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))
                .map_err(Failure::io)?;
            let corpus = Corpus::from_jsonl(&text)
                .map_err(|e| Failure::new(code::GENERATION, "corpus", e))?;
            if corpus.lexicon_digest != lexicon.digest() {
                return Err(Failure::config(anyhow::anyhow!(
                    "corpus {} was generated with a different lexicon",
                    path.display()
                )));
            }
            Ok(corpus)
        }
        None => {
            ctx.log(&format!(
                "generating {} pairs, seed {}",
                ctx.config.corpus.n_pairs, ctx.config.seed
            ));
            generate_corpus(&ctx.config.corpus, lexicon, ctx.config.seed)
                .map_err(|e| Failure::new(code::GENERATION, "generation", e))
        }
    }
}

struct Screened {
    corpus: Corpus,
    scores: ScoreTable,
    thresholds: ThresholdChoice,
}

fn screen(ctx: &Ctx, corpus_path: Option<&Path>) -> Result<Screened> {
    let lexicon = ctx.lexicon()?;
    let space =
        EmbeddingSpace::new(&lexicon, ctx.config.embedding.clone()).map_err(Failure::config)?;
    let corpus = load_or_generate(ctx, &lexicon, corpus_path)?;
    ctx.log("scoring");
    let scores = ScoreTable::compute(&corpus, &space);
    let thresholds = choose_thresholds(&ctx.config, &scores)?;
    ctx.log(&format!(
        "κ = {}, τ = {}",
        thresholds.kappa,
        fmt_f64(thresholds.tau)
    ));
    Ok(Screened {
        corpus,
        scores,
        thresholds,
    })
}

fn decisions_csv(s: &Screened) -> String {
    let kw = s.scores.keyword_decisions(KeywordRule {
        kappa: s.thresholds.kappa,
    });
    let sem = s.scores.semantic_decisions(SemanticRule {
        tau: s.thresholds.tau,
    });
    let mut out = String::from(
        "pair,candidate,job,q,keyword_score,keyword_accept,semantic_score,semantic_accept\n",
    );
    for (i, p) in s.corpus.pairs.iter().enumerate() {
        out.push_str(&format!(
            "{i},{},{},{},{},{},{},{}\n",
            p.candidate,
            p.job,
            u8::from(p.q),
            s.scores.keyword[i],
            u8::from(kw[i].accept),
            fmt_f64(sem[i].score),
            u8::from(sem[i].accept)
        ));
    }
    out
}

fn run(cli: Cli) -> Result<()> {
    if let Command::GenLexiconTemplate { out } = &cli.command {
        let doc = Lexicon::builtin_document();
        return match out {
            Some(p) => write_atomic(p, doc.as_bytes())
                .with_context(|| format!("writing {}", p.display()))
                .map_err(Failure::io),
            None => {
                print!("{doc}");
                Ok(())
            }
        };
    }

    let (config, config_dir) = resolve_config(&cli)?;
    let out_dir = cli
        .out_dir
        .clone()
        .unwrap_or_else(|| config.output.dir.clone());
    let ctx = Ctx {
        config,
        config_dir,
        out_dir,
        verbose: cli.verbose > 0,
    };

    match &cli.command {
        Command::GenLexiconTemplate { .. } => unreachable!("handled above"),
        Command::Validate { lexicon } => validate(&ctx, lexicon.as_deref()),
        Command::Generate => {
            let lexicon = ctx.lexicon()?;
            let corpus = load_or_generate(&ctx, &lexicon, None)?;
            ctx.write("corpus.jsonl", &corpus.to_jsonl())?;
            println!("{} pairs, corpus sha256:{}", corpus.len(), corpus.digest());
            Ok(())
        }
        Command::Screen { corpus } => {
            let s = screen(&ctx, corpus.as_deref())?;
            ctx.write("decisions.csv", &decisions_csv(&s))?;
            Ok(())
        }
        Command::Evaluate { corpus } => {
            let s = screen(&ctx, corpus.as_deref())?;
            let kw = keyword_row(&s.corpus, &s.scores, s.thresholds.kappa)?;
            let sem = semantic_row(&s.corpus, &s.scores, s.thresholds.tau)?;
            let change =
                compare(&kw, &sem).map_err(|e| Failure::new(code::EVALUATION, "evaluation", e))?;
            ctx.write("metrics.csv", &metrics_csv([&kw, &sem]))?;
            let doc = serde_json::json!({ "thresholds": s.thresholds, "keyword": kw, "semantic": sem, "change": change });
            ctx.write(
                "metrics.json",
                &(serde_json::to_string_pretty(&doc).expect("serializes") + "\n"),
            )?;
            print_rows(&[&kw, &sem]);
            Ok(())
        }
        Command::Sweep => {
            let s = screen(&ctx, None)?;
            let taus = tau_sweep(&s.corpus, &s.scores, &ctx.config.sweep.tau_grid())?;
            let max = s.scores.keyword.iter().copied().max().unwrap_or(0);
            let kappas: Vec<usize> = (0..=max + 1).collect();
            let ks = kappa_sweep(&s.corpus, &s.scores, &kappas)?;
            ctx.write("tau_sweep.csv", &metrics_csv(&taus))?;
            ctx.write("kappa_sweep.csv", &metrics_csv(&ks))?;
            print_rows(&taus.iter().chain(&ks).collect::<Vec<_>>());
            Ok(())
        }
        Command::Ladder => {
            let lexicon = ctx.lexicon()?;
            let space = EmbeddingSpace::new(&lexicon, ctx.config.embedding.clone())
                .map_err(Failure::config)?;
            let ladder = noise_ladder(&ctx.config, &lexicon, &space, &ctx.config.ladder.levels)?;
            let rows: Vec<&MetricsRow> = ladder
                .rows
                .iter()
                .flat_map(|r| [&r.keyword, &r.semantic])
                .collect();
            ctx.write("noise_ladder.csv", &metrics_csv(rows.iter().copied()))?;
            print_rows(&rows);
            Ok(())
        }
        Command::Report => {
            let lexicon = ctx.lexicon()?;
            ctx.log("running full protocol");
            let mut report = run_experiment_with(&ctx.config, &lexicon)?.report;
            report.header.timestamp = timestamp()?;
            for (name, body) in output::report_files(&report, ctx.config.output.plot_data) {
                ctx.write(name, &body)?;
            }
            print!("{}", output::summary_table(&report));
            Ok(())
        }
    }
}

fn print_rows(rows: &[&MetricsRow]) {
    println!(
        "{:<10}{:>10}{:>8}{:>11}{:>8}{:>8}{:>10}{:>12}",
        "pipeline", "threshold", "level", "precision", "recall", "f1", "friction", "acceptance"
    );
    let f = |x: Option<f64>| x.map_or_else(|| "NA".to_string(), |v| format!("{v:.3}"));
    for r in rows {
        println!(
            "{:<10}{:>10}{:>8}{:>11}{:>8}{:>8}{:>10}{:>12}",
            r.pipeline.as_str(),
            fmt_f64(r.threshold),
            r.noise_level.as_str(),
            f(r.precision),
            f(r.recall),
            f(r.f1),
            f(r.friction),
            f(r.acceptance_rate)
        );
    }
}

fn validate(ctx: &Ctx, lexicon_arg: Option<&str>) -> Result<()> {
    let (name, source) = match lexicon_arg.unwrap_or(&ctx.config.lexicon) {
        "builtin" => (
            "builtin".to_string(),
            Lexicon::builtin_document().to_string(),
        ),
        path => {
            let mut p = PathBuf::from(path);
            if lexicon_arg.is_none() && p.is_relative() {
                if let Some(dir) = &ctx.config_dir {
                    p = dir.join(p);
                }
            }
            let text = std::fs::read_to_string(&p)
                .with_context(|| format!("reading {}", p.display()))
                .map_err(Failure::io)?;
            (p.display().to_string(), text)
        }
    };
    let diagnostics = match Lexicon::parse(&source) {
        Ok(lexicon) => lexicon
            .validate()
            .iter()
            .map(ToString::to_string)
            .collect::<Vec<_>>(),
        Err(e) => vec![e.to_string()],
    };
    for d in &diagnostics {
        println!("{name}: {d}");
    }
    if diagnostics.is_empty() {
        println!(
            "{name}: ok ({} concepts)",
            Lexicon::parse(&source).map(|l| l.len()).unwrap_or(0)
        );
        Ok(())
    } else {
        Err(Failure::new(
            code::DIAGNOSTICS,
            "validate",
            anyhow::anyhow!("{} diagnostic(s)", diagnostics.len()),
        ))
    }
}

/// Joins the error chain, skipping causes whose text the outer message
/// already includes.
fn render_chain(error: &anyhow::Error) -> String {
    let mut out = error.to_string();
    for cause in error.chain().skip(1) {
        let text = cause.to_string();
        if !out.contains(&text) {
            out.push_str(": ");
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let matches = Cli::command().version(version_string()).get_matches();
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    let threads = cli.threads;
    let outcome = match threads {
        Some(n) => match rayon::ThreadPoolBuilder::new().num_threads(n).build() {
            Ok(pool) => pool.install(|| run(cli)),
            Err(e) => Err(Failure::config(e)),
        },
        None => run(cli),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error [{}]: {}", f.stage, render_chain(&f.error));
            ExitCode::from(f.code)
        }
    }
}
