//! Validating parser for rendered standard prompts.
//!
//! Accepts exactly the `S -> I E T` layout produced by [`render_prompt`]
//! (instruction, examples line, task description, task pairs) and recovers the
//! poset kind, the shot count, the extension nodes witnessed by the tasks and
//! the task list.
//!
//! [`render_prompt`]: super::render_prompt

use std::collections::{BTreeSet, HashSet};

use super::render::{description_line, instruction_text, task_description, TASK_HEADER};
use crate::error::{Error, Result};
use crate::poset::{holds, NaturalWord, PosetKind};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPrompt {
    pub kind: PosetKind,
    pub k: usize,
    pub examples: Vec<(u64, u64)>,
    /// Task endpoints above `k`; every task contributes at least one.
    pub window: BTreeSet<u64>,
    pub tasks: Vec<(u64, u64)>,
}

fn fail(line: usize, msg: impl Into<String>) -> Error {
    Error::Format {
        line,
        msg: msg.into(),
    }
}

fn parse_pair(kind: PosetKind, text: &str, line: usize) -> Result<(u64, u64)> {
    let sym = kind.symbol();
    let mut parts = text.split(sym);
    let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
        return Err(fail(line, format!("expected `a {sym} b`, got {text:?}")));
    };
    let word = |s: &str| {
        NaturalWord::parse(kind, s.trim()).map_err(|e| fail(line, e.to_string()))
    };
    let (wa, wb) = (word(a)?, word(b)?);
    let va = wa.value().map_err(|e| fail(line, e.to_string()))?;
    let vb = wb.value().map_err(|e| fail(line, e.to_string()))?;
    Ok((va, vb))
}

pub fn parse_rendered(text: &str) -> Result<ParsedPrompt> {
    let lines: Vec<&str> = text.lines().collect();
    let first = lines.first().ok_or_else(|| fail(1, "empty prompt"))?;
    let kind = PosetKind::ALL
        .into_iter()
        .find(|&k| *first == description_line(k))
        .ok_or_else(|| fail(1, "unrecognized relation description"))?;

    // I: description plus the three property lines
    let instruction = instruction_text(kind);
    let n_instr = instruction.lines().count();
    for (i, want) in instruction.lines().enumerate() {
        match lines.get(i) {
            Some(got) if *got == want => {}
            _ => return Err(fail(i + 1, format!("expected {want:?}"))),
        }
    }

    // E
    let ex_line_no = n_instr + 1;
    let ex_line = lines
        .get(n_instr)
        .and_then(|l| l.strip_prefix("Examples:"))
        .ok_or_else(|| fail(ex_line_no, "expected `Examples:` line"))?;
    let mut examples = Vec::new();
    for item in ex_line.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let inner = item
            .strip_prefix('"')
            .and_then(|s| s.strip_suffix('"'))
            .ok_or_else(|| fail(ex_line_no, format!("unquoted example {item:?}")))?;
        let (a, b) = parse_pair(kind, inner, ex_line_no)?;
        let wa = crate::poset::to_word(kind, a);
        let wb = crate::poset::to_word(kind, b);
        if !holds(kind, &wa, &wb)? {
            return Err(fail(ex_line_no, format!("example {inner:?} does not hold")));
        }
        examples.push((a, b));
    }

    // T: D followed by T'
    let desc = task_description(kind);
    let mut idx = n_instr + 1;
    for want in desc.lines() {
        match lines.get(idx) {
            Some(got) if *got == want => idx += 1,
            _ => return Err(fail(idx + 1, format!("expected {want:?}"))),
        }
    }
    if lines.get(idx) != Some(&TASK_HEADER) {
        return Err(fail(idx + 1, "expected task header"));
    }
    idx += 1;

    let k = examples
        .iter()
        .flat_map(|&(a, b)| [a, b])
        .max()
        .unwrap_or(1) as usize;
    let demo_set: HashSet<(u64, u64)> = examples.iter().copied().collect();
    let mut tasks = Vec::new();
    let mut window = BTreeSet::new();
    for (offset, raw) in lines[idx..].iter().enumerate() {
        let line_no = idx + offset + 1;
        let body = match kind {
            PosetKind::LoBin => raw
                .strip_prefix('"')
                .and_then(|s| s.strip_suffix('"'))
                .ok_or_else(|| fail(line_no, "binary task lines must be quoted"))?,
            _ => raw,
        };
        let (a, b) = parse_pair(kind, body, line_no)?;
        if demo_set.contains(&(a, b)) || demo_set.contains(&(b, a)) {
            return Err(fail(line_no, "task repeats a demonstration"));
        }
        let above: Vec<u64> = [a, b].into_iter().filter(|&v| v > k as u64).collect();
        if above.is_empty() {
            return Err(fail(line_no, format!("task has no endpoint above k={k}")));
        }
        window.extend(above);
        tasks.push((a, b));
    }
    if tasks.is_empty() {
        return Err(fail(idx + 1, "no tasks"));
    }

    Ok(ParsedPrompt {
        kind,
        k,
        examples,
        window,
        tasks,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prompt::{make_prompt, PromptStyle};

    #[test]
    fn recovers_lo_prompt() {
        let p = make_prompt(PosetKind::Lo, 20, 10, 50, 7, PromptStyle::Standard).unwrap();
        let parsed = parse_rendered(&p.render()).unwrap();
        assert_eq!(parsed.kind, PosetKind::Lo);
        assert_eq!(parsed.k, 20);
        assert_eq!(parsed.examples, p.examples);
        assert!(parsed.window.iter().all(|v| (21..=30).contains(v)));
        let tasks: Vec<_> = p.tasks.iter().map(|t| (t.a, t.b)).collect();
        assert_eq!(parsed.tasks, tasks);
    }

    #[test]
    fn rejects_tampered_prompts() {
        let p = make_prompt(PosetKind::Div, 4, 2, 30, 7, PromptStyle::Standard).unwrap();
        let text = p.render();
        let bad = text.replace("(c) x|x is always true", "(c) x|x is always false");
        assert!(parse_rendered(&bad).is_err());
        let bad = text.replace("\"2 | 4\"", "\"2 | 3\"");
        assert!(parse_rendered(&bad).is_err());
        let bad = format!("{text}1 | 2\n");
        assert!(parse_rendered(&bad).is_err());
        assert!(parse_rendered("").is_err());
    }
}
