use std::io::Write;

use serde::{Deserialize, Serialize};

use super::response::Verdict;
use crate::error::{Error, Result};
use crate::poset::PosetKind;
use crate::prompt::Prompt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum RecordStatus {
    #[default]
    Ok,
    /// The prompt exceeded the model's context budget; not scored as wrong.
    Truncated,
    Error,
}

/// One prompt's parsed verdicts joined with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub prompt_id: String,
    pub kind: PosetKind,
    pub k: usize,
    pub c: usize,
    pub verdicts: Vec<Verdict>,
    pub truths: Vec<bool>,
    pub correct: usize,
    pub total: usize,
    #[serde(default)]
    pub unknown: usize,
    #[serde(default)]
    pub unparseable: usize,
    #[serde(default)]
    pub status: RecordStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl RunRecord {
    pub fn score(prompt: &Prompt, verdicts: Vec<Verdict>) -> Result<Self> {
        if verdicts.len() != prompt.tasks.len() {
            return Err(Error::InvalidArgument(format!(
                "{} verdicts for {} tasks",
                verdicts.len(),
                prompt.tasks.len()
            )));
        }
        let truths: Vec<bool> = prompt.tasks.iter().map(|t| t.truth).collect();
        let correct = verdicts
            .iter()
            .zip(&truths)
            .filter(|(v, &t)| v.agrees(t))
            .count();
        let count = |want: Verdict| verdicts.iter().filter(|&&v| v == want).count();
        Ok(Self {
            prompt_id: prompt.id.clone(),
            kind: prompt.kind,
            k: prompt.k,
            c: prompt.c,
            unknown: count(Verdict::Unknown),
            unparseable: count(Verdict::Unparseable),
            total: verdicts.len(),
            verdicts,
            truths,
            correct,
            status: RecordStatus::Ok,
            error: None,
        })
    }

    /// A cell that produced no verdicts. Contributes nothing to aggregates.
    pub fn failed(prompt: &Prompt, status: RecordStatus, message: String) -> Self {
        Self {
            prompt_id: prompt.id.clone(),
            kind: prompt.kind,
            k: prompt.k,
            c: prompt.c,
            verdicts: Vec::new(),
            truths: Vec::new(),
            correct: 0,
            total: 0,
            unknown: 0,
            unparseable: 0,
            status,
            error: Some(message),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == RecordStatus::Ok
    }
}

pub fn accuracy(record: &RunRecord) -> Result<f64> {
    if record.total == 0 {
        return Err(Error::UndefinedMetric(format!(
            "record {} has no evaluation points",
            record.prompt_id
        )));
    }
    Ok(record.correct as f64 / record.total as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Complexity,
    Shots,
}

impl Axis {
    fn of(self, r: &RunRecord) -> usize {
        match self {
            Axis::Complexity => r.c,
            Axis::Shots => r.k,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Complexity => "complexity",
            Axis::Shots => "shots",
        }
    }
}

impl std::str::FromStr for Axis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "complexity" | "c" => Ok(Axis::Complexity),
            "shots" | "k" => Ok(Axis::Shots),
            other => Err(Error::InvalidArgument(format!("unknown axis {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McaPoint {
    pub axis: Axis,
    pub level: usize,
    pub correct: usize,
    pub total: usize,
    pub value: f64,
}

/// Mean cumulative accuracy: for each level `L <= limit`, correct over total
/// summed across every record whose axis value is at most `L`, all other
/// parameters pooled. Levels with no evaluation points are omitted.
pub fn mean_cumulative_accuracy(
    records: &[RunRecord],
    axis: Axis,
    limit: usize,
) -> Result<Vec<McaPoint>> {
    if records.is_empty() {
        return Err(Error::UndefinedMetric("no records".into()));
    }
    let mut per_level = vec![(0usize, 0usize); limit + 1];
    for r in records {
        let level = axis.of(r);
        if level <= limit {
            per_level[level].0 += r.correct;
            per_level[level].1 += r.total;
        }
    }
    let mut out = Vec::new();
    let (mut correct, mut total) = (0usize, 0usize);
    for (level, &(c, t)) in per_level.iter().enumerate().skip(1) {
        correct += c;
        total += t;
        if total > 0 {
            out.push(McaPoint {
                axis,
                level,
                correct,
                total,
                value: correct as f64 / total as f64,
            });
        }
    }
    Ok(out)
}

pub fn write_mca_csv<W: Write>(points: &[McaPoint], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["axis", "level", "correct", "total", "value"])?;
    for p in points {
        w.write_record([
            p.axis.as_str().to_string(),
            p.level.to_string(),
            p.correct.to_string(),
            p.total.to_string(),
            format!("{}", p.value),
        ])?;
    }
    w.flush()?;
    Ok(())
}
