//! Result files: per-run tables (CSV or JSON lines), the aggregate summary,
//! and the JSON report.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use macsim_core::checkers::CheckReport;
use macsim_core::Time;
use serde::Serialize;
use serde_json::json;

use crate::runner::RunRow;
use crate::ScenarioResult;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Jsonl,
}

impl FromStr for Format {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Format::Csv),
            "jsonl" => Ok(Format::Jsonl),
            other => bail!("unknown format {other:?}; expected csv or jsonl"),
        }
    }
}

/// Aggregate over all seeds of one cell (or one labelled run of a
/// construction).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scenario: String,
    pub cell: usize,
    pub label: String,
    pub topology: String,
    pub protocol: String,
    pub f_ack: Time,
    pub runs: usize,
    pub decided: usize,
    pub violations: usize,
    pub failed_checks: String,
    pub time_min: Option<Time>,
    pub time_p50: Option<Time>,
    pub time_p90: Option<Time>,
    pub time_max: Option<Time>,
    pub time_over_d_fack_p50: Option<f64>,
    pub max_ids: usize,
    pub max_tag: Option<u64>,
}

/// Nearest-rank quantile of sorted data.
pub fn quantile<T: Copy>(sorted: &[T], q: f64) -> Option<T> {
    if sorted.is_empty() {
        return None;
    }
    let rank = (q * sorted.len() as f64).ceil().max(1.0) as usize;
    Some(sorted[rank.min(sorted.len()) - 1])
}

pub fn summarize(rows: &[&RunRow]) -> Vec<SummaryRow> {
    let mut groups: BTreeMap<(usize, &str), Vec<&RunRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.cell, r.label.as_str())).or_default().push(r);
    }
    groups
        .into_values()
        .map(|g| {
            let first = g[0];
            let mut times: Vec<Time> = g.iter().filter_map(|r| r.decision_time).collect();
            times.sort_unstable();
            let mut norm: Vec<f64> = g.iter().filter_map(|r| r.time_over_d_fack).collect();
            norm.sort_by(f64::total_cmp);
            let mut failed: Vec<&str> = g
                .iter()
                .flat_map(|r| r.failed_checks.split(';'))
                .filter(|s| !s.is_empty())
                .collect();
            failed.sort_unstable();
            failed.dedup();
            SummaryRow {
                scenario: first.scenario.clone(),
                cell: first.cell,
                label: first.label.clone(),
                topology: if g.iter().all(|r| r.topology == first.topology) {
                    first.topology.clone()
                } else {
                    format!("{} (varies)", first.topology)
                },
                protocol: first.protocol.clone(),
                f_ack: first.f_ack,
                runs: g.len(),
                decided: g.iter().filter(|r| r.terminated).count(),
                violations: g.iter().filter(|r| r.verdict == "fail").count(),
                failed_checks: failed.join(";"),
                time_min: times.first().copied(),
                time_p50: quantile(&times, 0.5),
                time_p90: quantile(&times, 0.9),
                time_max: times.last().copied(),
                time_over_d_fack_p50: quantile(&norm, 0.5),
                max_ids: g.iter().map(|r| r.max_ids).max().unwrap_or(0),
                max_tag: g.iter().filter_map(|r| r.max_tag).max(),
            }
        })
        .collect()
}

pub fn write_csv<T: Serialize>(rows: impl IntoIterator<Item = T>, out: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRun<'a> {
    #[serde(flatten)]
    row: &'a RunRow,
    report: Option<&'a CheckReport>,
}

/// Writes every result file under `dir/<scenario name>/` and returns the
/// paths written.
pub fn write_results(result: &ScenarioResult, dir: &Path, format: Format) -> Result<Vec<PathBuf>> {
    let dir = dir.join(&result.scenario.name);
    fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut written = Vec::new();
    let mut create = |name: &str| -> Result<(PathBuf, fs::File)> {
        let path = dir.join(name);
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        written.push(path.clone());
        Ok((path, file))
    };

    let rows = result.rows();
    match format {
        Format::Csv => write_csv(rows.iter().copied(), create("runs.csv")?.1)?,
        Format::Jsonl => {
            let (_, mut f) = create("runs.jsonl")?;
            let reports = result.row_reports();
            for (row, report) in rows.iter().zip(reports) {
                serde_json::to_writer(&mut f, &JsonRun { row, report })?;
                writeln!(f)?;
            }
        }
    }
    write_csv(summarize(&rows), create("summary.csv")?.1)?;

    let (_, f) = create("report.json")?;
    serde_json::to_writer_pretty(f, &result.report_json())?;

    let (_, mut f) = create("scenario.toml")?;
    f.write_all(result.scenario.to_toml().as_bytes())?;

    let traces: Vec<_> = result
        .records
        .iter()
        .filter_map(|r| r.trace.as_ref().map(|t| (&r.row, t)))
        .collect();
    if !traces.is_empty() {
        let tdir = dir.join("traces");
        fs::create_dir_all(&tdir)?;
        for (row, text) in traces {
            let path = tdir.join(format!("cell{}-seed{}.jsonl", row.cell, row.seed));
            fs::write(&path, text)?;
            written.push(path);
        }
    }
    Ok(written)
}

impl ScenarioResult {
    pub fn report_json(&self) -> serde_json::Value {
        let failures: Vec<_> = self
            .records
            .iter()
            .flat_map(|r| {
                r.report
                    .failures()
                    .map(move |c| json!({"cell": r.row.cell, "seed": r.row.seed, "check": c}))
            })
            .chain(
                self.demo
                    .iter()
                    .flat_map(|d| d.report.failures().map(|c| json!({"check": c}))),
            )
            .collect();
        json!({
            "scenario": self.scenario,
            "verdict": if self.any_failed() { "fail" } else { "pass" },
            "runs": self.records.len(),
            "failures": failures,
            "construction": self.demo.as_ref().map(|d| json!({"checks": d.report, "details": d.details})),
        })
    }
}
