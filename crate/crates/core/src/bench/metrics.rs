//! Per-step metrics rows and their CSV form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use super::scheme::SchemeId;
use crate::agent::StepRecord;
use crate::error::Result;

/// Bumped whenever a column is added, removed or reinterpreted.
pub const METRICS_SCHEMA_VERSION: u32 = 1;

pub const METRICS_HEADER: [&str; 17] = [
    "schema",
    "run_id",
    "scheme",
    "seed",
    "phase",
    "episode",
    "step",
    "secrecy",
    "su_rates",
    "pu_rates",
    "max_eve_rates",
    "reward",
    "c1_slack",
    "c2_slack",
    "c3_slack",
    "tau",
    "decision_ms",
];

/// Where a row comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Train,
    Eval,
    /// Per-step optimization (no learning).
    Solve,
}

impl Phase {
    pub fn as_str(self) -> &'static str {
        match self {
            Phase::Train => "train",
            Phase::Eval => "eval",
            Phase::Solve => "solve",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsRow {
    pub run_id: String,
    pub scheme: SchemeId,
    pub seed: u64,
    pub phase: Phase,
    pub record: StepRecord,
    /// Wall-clock decision time; left empty unless timing was requested so
    /// that reruns stay byte-identical.
    pub decision_ms: Option<f64>,
}

pub fn run_id(scheme: SchemeId, seed: u64) -> String {
    format!("{scheme}-s{seed}")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

impl MetricsRow {
    pub fn fields(&self) -> [String; 17] {
        let r = &self.record;
        [
            METRICS_SCHEMA_VERSION.to_string(),
            self.run_id.clone(),
            self.scheme.to_string(),
            self.seed.to_string(),
            self.phase.as_str().to_string(),
            r.episode.to_string(),
            r.step.to_string(),
            r.secrecy.to_string(),
            join(&r.su_rates),
            join(&r.pu_rates),
            join(&r.max_eve_rates),
            r.reward.to_string(),
            r.c1_slack.to_string(),
            r.c2_slack.to_string(),
            r.c3_slack.to_string(),
            r.tau.to_string(),
            self.decision_ms.map(|t| t.to_string()).unwrap_or_default(),
        ]
    }
}

/// Writes the header and `rows` in order.
pub fn write_csv<'a>(w: impl Write, rows: impl IntoIterator<Item = &'a MetricsRow>) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(METRICS_HEADER)?;
    for row in rows {
        out.write_record(row.fields())?;
    }
    out.flush()?;
    Ok(())
}

pub fn emit_csv<'a>(rows: impl IntoIterator<Item = &'a MetricsRow>, path: impl AsRef<Path>) -> Result<()> {
    write_csv(BufWriter::new(File::create(path)?), rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row() -> MetricsRow {
        MetricsRow {
            run_id: run_id(SchemeId::FixedIrs, 3),
            scheme: SchemeId::FixedIrs,
            seed: 3,
            phase: Phase::Eval,
            record: StepRecord {
                episode: 1,
                step: 2,
                option: 0,
                reward: -0.5,
                secrecy: 1.25,
                su_rates: vec![1.0, 2.5],
                pu_rates: vec![3.0],
                max_eve_rates: vec![0.5, 0.0],
                c1_slack: 0.75,
                c2_slack: 0.01,
                c3_slack: 0.0,
                tau: 0.002,
            },
            decision_ms: None,
        }
    }

    #[test]
    fn header_and_row_layout() {
        let mut buf = Vec::new();
        write_csv(&mut buf, [&row()]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), METRICS_HEADER.join(","));
        assert_eq!(
            lines.next().unwrap(),
            "1,fixed_irs-s3,fixed_irs,3,eval,1,2,1.25,1;2.5,3,0.5;0,-0.5,0.75,0.01,0,0.002,"
        );
        assert!(lines.next().is_none());
    }
}
