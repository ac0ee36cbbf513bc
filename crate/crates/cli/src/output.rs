//! Report and trace artifacts.

use std::fs;
use std::path::Path;

use kahler_core::{CheckItem, CheckReport, FlowTrajectory, PathTrajectory};
use serde::{Deserialize, Serialize};

use crate::config::ScenarioConfig;
use crate::LabCliError;

/// Contents of `report.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub config: ScenarioConfig,
    pub checks: Vec<CheckItem>,
    /// True iff every check passes.
    pub aggregate: bool,
    pub runtime_seconds: f64,
}

impl ScenarioReport {
    pub fn new(config: &ScenarioConfig, report: CheckReport, runtime_seconds: f64) -> Self {
        ScenarioReport {
            scenario: config.scenario.name().to_string(),
            config: config.clone(),
            aggregate: report.pass(),
            checks: report.items,
            runtime_seconds,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &CheckItem> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

/// A numeric table written as `<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Trace {
    pub fn new(name: impl Into<String>, header: &[&str]) -> Self {
        Trace {
            name: name.into(),
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

pub fn path_trace(name: impl Into<String>, traj: &PathTrajectory) -> Trace {
    let n = traj.background().n();
    let mut header = vec!["t".to_string(), "c_t".to_string()];
    header.extend((0..=n).map(|k| format!("E_{k}")));
    header.extend(["I", "J", "lambda1_radial", "min_ricci"].map(String::from));
    let rows = traj
        .points
        .iter()
        .map(|p| {
            let m = &p.monitors;
            let mut row = vec![p.t, p.c_t];
            row.extend(&m.energies);
            row.extend([m.i, m.j, m.lambda1_radial, m.min_ricci]);
            row
        })
        .collect();
    Trace {
        name: name.into(),
        header,
        rows,
    }
}

pub fn flow_trace(name: impl Into<String>, traj: &FlowTrajectory) -> Trace {
    let mut trace = Trace::new(
        name,
        &[
            "time",
            "E_0",
            "E_1",
            "min_ricci",
            "min_ricci_plus_metric",
            "max_ricci_deviation",
            "volume_error",
            "substeps",
        ],
    );
    for s in &traj.samples {
        trace.push(vec![
            s.time,
            s.e0,
            s.e1,
            s.min_ricci,
            s.min_ricci_plus_metric,
            s.max_ricci_deviation,
            s.volume_error,
            s.substeps as f64,
        ]);
    }
    trace
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> LabCliError {
    LabCliError::Io(format!("{}: {e}", path.display()))
}

fn write_csv<R: IntoIterator<Item = Vec<String>>>(
    path: &Path,
    header: &[String],
    rows: R,
) -> Result<(), LabCliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

/// Writes `report.json`, `checks.csv` and one CSV per trace into `dir`.
pub fn write_artifacts(
    dir: &Path,
    report: &ScenarioReport,
    traces: &[Trace],
) -> Result<(), LabCliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let json = serde_json::to_string_pretty(report).map_err(|e| io_err(dir, e))?;
    let report_path = dir.join("report.json");
    fs::write(&report_path, json + "\n").map_err(|e| io_err(&report_path, e))?;

    let header: Vec<String> = [
        "name", "anchor", "relation", "lhs", "rhs", "tol", "margin", "pass", "note",
    ]
    .map(String::from)
    .to_vec();
    let rows = report.checks.iter().map(|c| {
        vec![
            c.name.clone(),
            c.anchor.clone(),
            serde_json::to_value(c.relation)
                .ok()
                .and_then(|v| v.as_str().map(String::from))
                .unwrap_or_default(),
            c.lhs.to_string(),
            c.rhs.to_string(),
            c.tol.to_string(),
            c.margin.to_string(),
            c.pass.to_string(),
            c.note.clone().unwrap_or_default(),
        ]
    });
    write_csv(&dir.join("checks.csv"), &header, rows)?;

    for trace in traces {
        let rows = trace
            .rows
            .iter()
            .map(|r| r.iter().map(|v| v.to_string()).collect::<Vec<_>>());
        write_csv(
            &dir.join(format!("{}.csv", trace.name)),
            &trace.header,
            rows,
        )?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    scenario: &'a str,
    kind: &'a str,
    message: String,
    exit_code: i32,
}

/// Writes `error.json` describing a failed run.
pub fn write_error(dir: &Path, scenario: &str, err: &LabCliError) -> Result<(), LabCliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let record = ErrorRecord {
        scenario,
        kind: err.kind(),
        message: err.to_string(),
        exit_code: err.exit_code(),
    };
    let path = dir.join("error.json");
    let json = serde_json::to_string_pretty(&record).map_err(|e| io_err(&path, e))?;
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))
}
