//! Reports and their JSON / text renderings.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::scenario::Expectation;

pub const VERSION: &str = concat!("polylab ", env!("CARGO_PKG_VERSION"));

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToleranceEcho {
    pub tol: f64,
    pub rank_tol: f64,
    pub psd_tol: f64,
    pub invariance_tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub command: String,
    pub grid: Option<Vec<usize>>,
    pub tolerance: ToleranceEcho,
    pub seed: u64,
    /// `ok`, `error: …` for domain failures, `input error: …` for unreadable inputs.
    pub status: String,
    pub residuals: BTreeMap<String, f64>,
    pub verdicts: BTreeMap<String, bool>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub details: BTreeMap<String, serde_json::Value>,
    /// Expectations from the scenario's `expect` block that did not hold.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub mismatches: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runtime_seconds: Option<f64>,
    pub version: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Text,
}

impl Report {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }

    pub fn is_input_error(&self) -> bool {
        self.status.starts_with("input error")
    }

    /// Compares the report against an expectation and records what differs.
    /// Without an explicit status expectation the scenario is expected to run.
    pub fn check_expectation(&mut self, expect: &Expectation) {
        let mut out = Vec::new();
        let want_ok = expect.status_ok.unwrap_or(true);
        if want_ok != self.is_ok() {
            out.push(format!(
                "status: expected {}, got {}",
                if want_ok { "ok" } else { "error" },
                self.status
            ));
        }
        if self.is_ok() {
            for (name, want) in &expect.verdicts {
                match self.verdicts.get(name) {
                    None => out.push(format!("{name}: no such verdict")),
                    Some(got) if got != want => out.push(format!(
                        "{name}: expected {}, got {}",
                        pass_fail(*want),
                        pass_fail(*got)
                    )),
                    _ => {}
                }
            }
        }
        self.mismatches = out;
    }

    /// 0 when every expectation holds, 1 on a mismatch, 2 on an input error.
    pub fn exit_code(&self) -> i32 {
        if self.is_input_error() {
            2
        } else if self.mismatches.is_empty() {
            0
        } else {
            1
        }
    }
}

fn pass_fail(v: bool) -> &'static str {
    if v {
        "pass"
    } else {
        "fail"
    }
}

pub fn to_json(reports: &[Report]) -> String {
    let mut s = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])
    } else {
        serde_json::to_string_pretty(reports)
    }
    .expect("reports serialize");
    s.push('\n');
    s
}

pub fn to_text(reports: &[Report]) -> String {
    let mut out = String::new();
    for r in reports {
        let grid = r
            .grid
            .as_ref()
            .map(|g| g.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(","))
            .unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{} [{}] grid {} tol {:e} seed {}: {}",
            r.id, r.command, grid, r.tolerance.tol, r.seed, r.status
        );
        for (name, value) in &r.residuals {
            let glyph = match r.verdicts.get(name) {
                Some(true) => "✓",
                Some(false) => "✗",
                None => "?",
            };
            let _ = writeln!(out, "  {glyph} {name:<32} {value:.3e}");
        }
        for (name, value) in &r.diagnostics {
            let _ = writeln!(out, "  · {name:<32} {value:.6e}");
        }
        for m in &r.mismatches {
            let _ = writeln!(out, "  ! {m}");
        }
        if let Some(t) = r.runtime_seconds {
            let _ = writeln!(out, "  runtime {t:.3}s");
        }
    }
    out
}

pub fn emit(reports: &[Report], format: Format) -> String {
    match format {
        Format::Json => to_json(reports),
        Format::Text => to_text(reports),
    }
}

/// Reads back what [`to_json`] wrote.
pub fn parse_json(text: &str) -> serde_json::Result<Vec<Report>> {
    let value: serde_json::Value = serde_json::from_str(text)?;
    if value.is_array() {
        serde_json::from_value(value)
    } else {
        Ok(vec![serde_json::from_value(value)?])
    }
}
