//! Report files: JSON document, CSV tables, plot series and a rounded summary.
//!
//! Every file is written to a temporary sibling and renamed into place, so a
//! reader never sees a partial file at the final path.

use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::experiments::{FnCause, FrictionReport};
use crate::metrics::{fmt_f64, fmt_opt, round_dp, round_sig, MetricsRow};

/// Writes `bytes` to `path` atomically, creating parent directories.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

fn csv_string(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 fields")
}

pub fn metrics_csv<'a>(rows: impl IntoIterator<Item = &'a MetricsRow>) -> String {
    csv_string(
        &MetricsRow::CSV_HEADER,
        rows.into_iter().map(MetricsRow::csv_record),
    )
}

pub fn comparison_csv(report: &FrictionReport) -> String {
    let c = &report.comparison;
    let header = ["metric", "keyword", "semantic", "relative_change"];
    let rows = [
        (
            "precision",
            c.keyword.precision,
            c.semantic.precision,
            c.change.precision_change,
        ),
        (
            "recall",
            c.keyword.recall,
            c.semantic.recall,
            c.change.recall_change,
        ),
        ("f1", c.keyword.f1, c.semantic.f1, c.change.f1_change),
        (
            "friction",
            c.keyword.friction,
            c.semantic.friction,
            c.change.friction_change,
        ),
        (
            "acceptance_rate",
            c.keyword.acceptance_rate,
            c.semantic.acceptance_rate,
            c.change.acceptance_rate_change,
        ),
    ];
    csv_string(
        &header,
        rows.into_iter()
            .map(|(m, k, s, d)| vec![m.to_string(), fmt_opt(k), fmt_opt(s), fmt_opt(d)]),
    )
}

pub fn ladder_csv(report: &FrictionReport) -> String {
    metrics_csv(
        report
            .noise_ladder
            .rows
            .iter()
            .flat_map(|r| [&r.keyword, &r.semantic]),
    )
}

pub fn fn_breakdown_csv(report: &FrictionReport) -> String {
    let b = &report.fn_breakdown;
    let mut rows: Vec<Vec<String>> = FnCause::ALL
        .iter()
        .map(|&c| {
            vec![
                c.as_str().to_string(),
                b.keyword.get(c).to_string(),
                b.semantic.get(c).to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        "total".into(),
        b.keyword.total().to_string(),
        b.semantic.total().to_string(),
    ]);
    csv_string(&["cause", "keyword", "semantic"], rows)
}

#[derive(Serialize)]
struct Series {
    x: Vec<f64>,
    precision: Vec<Option<f64>>,
    recall: Vec<Option<f64>>,
    friction: Vec<Option<f64>>,
    acceptance_rate: Vec<Option<f64>>,
}

impl Series {
    fn of(rows: &[MetricsRow]) -> Self {
        Self {
            x: rows.iter().map(|r| r.threshold).collect(),
            precision: rows.iter().map(|r| r.precision).collect(),
            recall: rows.iter().map(|r| r.recall).collect(),
            friction: rows.iter().map(|r| r.friction).collect(),
            acceptance_rate: rows.iter().map(|r| r.acceptance_rate).collect(),
        }
    }
}

#[derive(Serialize)]
struct LadderSeries {
    levels: Vec<String>,
    keyword_recall: Vec<Option<f64>>,
    semantic_recall: Vec<Option<f64>>,
    keyword_friction: Vec<Option<f64>>,
    semantic_friction: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct PlotData {
    tau_sweep: Series,
    kappa_sweep: Series,
    noise_ladder: LadderSeries,
}

pub fn plot_data_json(report: &FrictionReport) -> String {
    let rows = &report.noise_ladder.rows;
    let data = PlotData {
        tau_sweep: Series::of(&report.tau_sweep),
        kappa_sweep: Series::of(&report.kappa_sweep),
        noise_ladder: LadderSeries {
            levels: rows.iter().map(|r| r.level.to_string()).collect(),
            keyword_recall: rows.iter().map(|r| r.keyword.recall).collect(),
            semantic_recall: rows.iter().map(|r| r.semantic.recall).collect(),
            keyword_friction: rows.iter().map(|r| r.keyword.friction).collect(),
            semantic_friction: rows.iter().map(|r| r.semantic.friction).collect(),
        },
    };
    serde_json::to_string_pretty(&data).expect("plot data serializes") + "\n"
}

pub fn report_json(report: &FrictionReport) -> String {
    serde_json::to_string_pretty(report).expect("report serializes") + "\n"
}

fn two_dp(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".into(), |v| format!("{:.2}", round_dp(v, 2)))
}

fn pct3(x: Option<f64>) -> String {
    x.map_or_else(
        || "NA".into(),
        |v| format!("{:+}%", round_sig(v * 100.0, 3)),
    )
}

/// Plain-text comparison table: metrics to two decimals, relative change to
/// three significant figures.
pub fn summary_table(report: &FrictionReport) -> String {
    let c = &report.comparison;
    let t = &report.thresholds;
    let h = &report.header;
    let mut out = String::new();
    let _ = writeln!(
        out,
        "seed {}  pairs {}  noise {}",
        h.seed, h.n_pairs, h.noise_level
    );
    let _ = writeln!(
        out,
        "kappa {} ({}), tau {} ({})",
        t.kappa,
        t.keyword_method,
        fmt_f64(t.tau),
        t.semantic_method
    );
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:<16}{:>10}{:>10}{:>12}",
        "metric", "keyword", "semantic", "change"
    );
    for (name, k, s, d) in [
        (
            "precision",
            c.keyword.precision,
            c.semantic.precision,
            c.change.precision_change,
        ),
        (
            "recall",
            c.keyword.recall,
            c.semantic.recall,
            c.change.recall_change,
        ),
        ("f1", c.keyword.f1, c.semantic.f1, c.change.f1_change),
        (
            "friction",
            c.keyword.friction,
            c.semantic.friction,
            c.change.friction_change,
        ),
        (
            "acceptance",
            c.keyword.acceptance_rate,
            c.semantic.acceptance_rate,
            c.change.acceptance_rate_change,
        ),
    ] {
        let _ = writeln!(
            out,
            "{:<16}{:>10}{:>10}{:>12}",
            name,
            two_dp(k),
            two_dp(s),
            pct3(d)
        );
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "friction reduction {}",
        pct3(c.change.friction_reduction).trim_start_matches('+')
    );
    out
}

/// Every file of a report, in write order: `(file name, contents)`.
pub fn report_files(report: &FrictionReport, plot_data: bool) -> Vec<(&'static str, String)> {
    let mut files = vec![
        ("report.json", report_json(report)),
        ("comparison.csv", comparison_csv(report)),
        ("tau_sweep.csv", metrics_csv(&report.tau_sweep)),
        ("kappa_sweep.csv", metrics_csv(&report.kappa_sweep)),
        ("noise_ladder.csv", ladder_csv(report)),
        ("fn_breakdown.csv", fn_breakdown_csv(report)),
        ("summary.txt", summary_table(report)),
    ];
    if plot_data {
        files.push(("plot_data.json", plot_data_json(report)));
    }
    files
}

/// Writes all report files into `dir` and returns their paths.
pub fn write_report(
    report: &FrictionReport,
    dir: &Path,
    plot_data: bool,
) -> std::io::Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    for (name, body) in report_files(report, plot_data) {
        let path = dir.join(name);
        write_atomic(&path, body.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn atomic_write_replaces_contents() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("nested").join("f.txt");
        write_atomic(&p, b"one").unwrap();
        write_atomic(&p, b"two").unwrap();
        assert_eq!(std::fs::read(&p).unwrap(), b"two");
        let leftovers = std::fs::read_dir(p.parent().unwrap()).unwrap().count();
        assert_eq!(leftovers, 1);
    }

    #[test]
    fn pct_formatting() {
        assert_eq!(pct3(Some(1.0444)), "+104%");
        assert_eq!(pct3(Some(0.43548)), "+43.5%");
        assert_eq!(pct3(Some(-0.8545)), "-85.5%");
        assert_eq!(pct3(None), "NA");
        assert_eq!(two_dp(Some(0.555)), "0.56");
    }
}
