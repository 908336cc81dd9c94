//! Run logs, summaries and plots.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::{ExperimentRecord, RunResult};
use crate::fit::{fit_log_linear, fit_power_law};
use crate::io::{create, fmt_f64};

pub const RECORD_HEADER: [&str; 5] = [
    "k",
    "suboptimality",
    "objective",
    "regret_partial",
    "wall_time_us",
];

pub fn write_records<W: Write>(records: &[ExperimentRecord], out: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    wtr.write_record(RECORD_HEADER)?;
    for r in records {
        wtr.write_record([
            r.k.to_string(),
            fmt_f64(r.suboptimality),
            fmt_f64(r.objective),
            r.regret_partial.map(fmt_f64).unwrap_or_default(),
            r.wall_time_us.to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn read_records<R: Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    let mut rdr = csv::Reader::from_reader(input);
    if rdr.headers()?.iter().ne(RECORD_HEADER) {
        return Err(Error::Parse(format!(
            "record header must be `{}`",
            RECORD_HEADER.join(",")
        )));
    }
    let mut out = Vec::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let bad = || Error::Parse(format!("bad record row {}", line + 2));
        let f = |s: &str| s.parse::<f64>().map_err(|_| bad());
        out.push(ExperimentRecord {
            k: rec[0].parse().map_err(|_| bad())?,
            suboptimality: f(&rec[1])?,
            objective: f(&rec[2])?,
            regret_partial: if rec[3].is_empty() { None } else { Some(f(&rec[3])?) },
            wall_time_us: rec[4].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Least-squares summary of one curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub value: f64,
    pub r_squared: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub label: String,
    pub algo: String,
    pub steps: usize,
    pub final_suboptimality: Option<f64>,
    /// Per-step contraction factor `μ` of a log-linear fit to the suboptimality.
    pub convergence_rate: Option<RateFit>,
    /// Exponent `c` of `|regret(k)| ~ k^c`.
    pub regret_exponent: Option<RateFit>,
    pub final_regret: Option<f64>,
    pub final_fscore: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<RunSummary>,
}

pub fn summarize(run: &RunResult) -> RunSummary {
    let mut s = RunSummary {
        label: run.label.clone(),
        algo: run.config.algo.name().to_string(),
        steps: 0,
        final_suboptimality: None,
        convergence_rate: None,
        regret_exponent: None,
        final_regret: None,
        final_fscore: run.final_fscore,
        error: None,
    };
    match &run.records {
        Err(e) => s.error = Some(e.clone()),
        Ok(records) => {
            s.steps = records.len();
            s.final_suboptimality = records.last().map(|r| r.suboptimality);
            let subs: Vec<f64> = records.iter().map(|r| r.suboptimality).collect();
            s.convergence_rate = fit_log_linear(&subs).map(|f| RateFit {
                value: f.slope.exp(),
                r_squared: f.r_squared,
            });
            let (ks, regs): (Vec<f64>, Vec<f64>) = records
                .iter()
                .filter_map(|r| r.regret_partial.map(|g| (r.k as f64, g)))
                .unzip();
            s.final_regret = regs.last().copied();
            let mags: Vec<f64> = regs.iter().map(|g| g.abs()).collect();
            s.regret_exponent = fit_power_law(&ks, &mags).map(|f| RateFit {
                value: f.slope,
                r_squared: f.r_squared,
            });
        }
    }
    s
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Line plot of suboptimality against k, log-scaled y, one polyline per run.
pub fn render_svg(runs: &[(String, Vec<ExperimentRecord>)]) -> String {
    let (width, height) = (720.0, 440.0);
    let (left, right, top, bottom) = (70.0, 20.0, 20.0, 50.0);
    let pw = width - left - right;
    let ph = height - top - bottom;

    let positive = |r: &&ExperimentRecord| r.suboptimality > 0.0 && r.suboptimality.is_finite();
    let k_max = runs
        .iter()
        .flat_map(|(_, rs)| rs.iter().map(|r| r.k))
        .max()
        .unwrap_or(1)
        .max(2) as f64;
    let logs: Vec<f64> = runs
        .iter()
        .flat_map(|(_, rs)| rs.iter().filter(positive).map(|r| r.suboptimality.log10()))
        .collect();
    let mut lo = logs.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let mut hi = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    if !lo.is_finite() || !hi.is_finite() {
        lo = -1.0;
        hi = 0.0;
    }
    if hi <= lo {
        hi = lo + 1.0;
    }
    let x = |k: f64| left + pw * (k - 1.0) / (k_max - 1.0);
    let y = |v: f64| top + ph * (hi - v.log10()) / (hi - lo);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for d in (lo as i32)..=(hi as i32) {
        let yy = y(10f64.powi(d));
        let _ = writeln!(
            svg,
            r##"<line x1="{left}" y1="{yy:.2}" x2="{:.2}" y2="{yy:.2}" stroke="#ddd"/><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">1e{d}</text>"##,
            left + pw,
            left - 6.0,
            yy + 4.0
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">k</text><text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{k_max}</text><text x="{left}" y="{:.2}" font-size="12">1</text>"#,
        left + pw / 2.0,
        height - 12.0,
        left + pw,
        top + ph + 18.0,
        top + ph + 18.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="13" transform="rotate(-90 16 {:.2})" text-anchor="middle">suboptimality</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );
    for (idx, (label, records)) in runs.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let points: Vec<String> = records
            .iter()
            .filter(positive)
            .map(|r| format!("{:.2},{:.2}", x(r.k as f64), y(r.suboptimality)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            points.join(" ")
        );
        let ly = top + 16.0 + 16.0 * idx as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{ly:.2}" font-size="12" fill="{color}" text-anchor="end">{}</text>"#,
            left + pw - 8.0,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Files written by [`emit_report`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportPaths {
    pub runs: Vec<PathBuf>,
    pub summary: PathBuf,
    pub plot: PathBuf,
}

/// Writes `run_<i>_<algo>.csv` per successful run, `summary.json` and `suboptimality.svg`.
pub fn emit_report(runs: &[RunResult], dir: &Path) -> Result<ReportPaths> {
    if runs.is_empty() {
        return Err(Error::Degenerate("no runs to report".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut csvs = Vec::new();
    let mut plotted = Vec::new();
    for (i, run) in runs.iter().enumerate() {
        if let Ok(records) = &run.records {
            let path = dir.join(format!("run_{i}_{}.csv", run.config.algo.name()));
            write_records(records, create(&path)?)?;
            csvs.push(path);
            plotted.push((run.label.clone(), records.clone()));
        }
    }
    let summary = Summary {
        runs: runs.iter().map(summarize).collect(),
    };
    let summary_path = dir.join("summary.json");
    serde_json::to_writer_pretty(create(&summary_path)?, &summary)?;
    let plot_path = dir.join("suboptimality.svg");
    create(&plot_path)?.write_all(render_svg(&plotted).as_bytes())?;
    Ok(ReportPaths {
        runs: csvs,
        summary: summary_path,
        plot: plot_path,
    })
}
