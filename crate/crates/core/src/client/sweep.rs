use std::collections::HashSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::ops::RangeInclusive;
use std::path::Path;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;

use serde::{Deserialize, Serialize};

use super::{ClientError, Completer};
use crate::error::{invalid, Result};
use crate::metrics::{parse_for_prompt, RecordStatus, RunRecord};
use crate::poset::PosetKind;
use crate::prompt::{make_prompt, PromptStyle};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub kind: PosetKind,
    pub k_range: RangeInclusive<usize>,
    pub c_range: RangeInclusive<usize>,
    pub count: usize,
    pub seed: u64,
    pub style: PromptStyle,
    pub workers: usize,
}

impl SweepSpec {
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.k_range
            .clone()
            .flat_map(|k| self.c_range.clone().map(move |c| (k, c)))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepOutcome {
    /// Records written by this invocation, in completion order.
    pub records: Vec<RunRecord>,
    /// Cells skipped because the output already held them.
    pub skipped: usize,
}

/// Reads a record stream, ignoring a torn final line.
pub fn read_records(path: impl AsRef<Path>) -> Result<Vec<RunRecord>> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for (i, line) in BufReader::new(File::open(path)?).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<RunRecord>(&line) {
            Ok(r) => out.push(r),
            Err(e) => log::warn!("{}:{}: skipping unreadable record: {e}", path.display(), i + 1),
        }
    }
    Ok(out)
}

fn run_cell(spec: &SweepSpec, client: &dyn Completer, k: usize, c: usize) -> RunRecord {
    let prompt = match make_prompt(spec.kind, k, c, spec.count, spec.seed, spec.style) {
        Ok(p) => p,
        Err(e) => {
            return RunRecord {
                prompt_id: crate::prompt::prompt_id(spec.kind, k, c, spec.seed, spec.style),
                kind: spec.kind,
                k,
                c,
                verdicts: Vec::new(),
                truths: Vec::new(),
                correct: 0,
                total: 0,
                unknown: 0,
                unparseable: 0,
                status: RecordStatus::Error,
                error: Some(e.to_string()),
            }
        }
    };
    let text = prompt.render();
    match client.complete(&prompt, &text) {
        Ok(done) => RunRecord::score(&prompt, parse_for_prompt(&prompt, &done.text))
            .unwrap_or_else(|e| RunRecord::failed(&prompt, RecordStatus::Error, e.to_string())),
        Err(ClientError::ContextLength(msg)) => RunRecord::failed(&prompt, RecordStatus::Truncated, msg),
        Err(e) => RunRecord::failed(&prompt, RecordStatus::Error, e.to_string()),
    }
}

/// Runs every `(k, c)` cell of the grid not already present in `output`,
/// appending one record per cell as it completes. Failures are recorded in
/// the cell's record and the sweep continues.
pub fn run_sweep(spec: &SweepSpec, client: &dyn Completer, output: impl AsRef<Path>) -> Result<SweepOutcome> {
    if spec.k_range.is_empty() || spec.c_range.is_empty() {
        return Err(invalid("k and c ranges must be non-empty"));
    }
    let output = output.as_ref();
    let done: HashSet<(usize, usize)> = if output.exists() {
        read_records(output)?
            .into_iter()
            .filter(|r| r.kind == spec.kind)
            .map(|r| (r.k, r.c))
            .collect()
    } else {
        HashSet::new()
    };
    let all = spec.cells();
    let todo: Vec<(usize, usize)> = all.iter().copied().filter(|cell| !done.contains(cell)).collect();
    let skipped = all.len() - todo.len();

    let mut file = OpenOptions::new().create(true).append(true).open(output)?;
    if std::fs::read(output)?.last().is_some_and(|&b| b != b'\n') {
        file.write_all(b"\n")?;
    }
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel::<RunRecord>();
    let mut records = Vec::with_capacity(todo.len());
    std::thread::scope(|s| -> Result<()> {
        for _ in 0..spec.workers.max(1).min(todo.len().max(1)) {
            let tx = tx.clone();
            let (next, todo) = (&next, &todo);
            s.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(&(k, c)) = todo.get(i) else { break };
                if tx.send(run_cell(spec, client, k, c)).is_err() {
                    break;
                }
            });
        }
        drop(tx);
        for record in rx {
            let mut line = serde_json::to_string(&record)?;
            line.push('\n');
            file.write_all(line.as_bytes())?;
            file.flush()?;
            records.push(record);
        }
        Ok(())
    })?;
    Ok(SweepOutcome { records, skipped })
}
