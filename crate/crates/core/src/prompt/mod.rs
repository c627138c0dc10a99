//! k-shot c-complex prompt generation.
//!
//! A prompt over `({1..k}, ⪯)` carries the covering edges of the Hasse diagram
//! as demonstrations and asks about evaluation pairs that touch the extension
//! window `{k+1..k+c}` without being an edge of the extended diagram.

mod grammar;
mod render;

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::poset::{build_hasse, holds_values, PosetKind};

pub use grammar::{parse_rendered, ParsedPrompt};
pub use render::{instruction_text, render_prompt};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PromptStyle {
    /// Instruction, examples line, task description and one pair per line.
    #[default]
    Standard,
    /// `(a ⪯ b) -> True` demonstrations followed by a single query line.
    Labeled,
    /// Labeled style prefixed by the instruction.
    LabeledInstructed,
}

impl std::str::FromStr for PromptStyle {
    type Err = crate::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "standard" => Ok(Self::Standard),
            "labeled" => Ok(Self::Labeled),
            "labeled_instructed" | "labeled-instructed" => Ok(Self::LabeledInstructed),
            other => Err(invalid(format!("unknown prompt style {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EvalPoint {
    pub a: u64,
    pub b: u64,
    pub truth: bool,
}

/// Realized sampling statistics. The class balance is recorded, never enforced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SampleStats {
    pub requested: usize,
    pub feasible: usize,
    pub realized: usize,
    pub true_count: usize,
    pub false_count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prompt {
    pub id: String,
    pub kind: PosetKind,
    pub k: usize,
    pub c: usize,
    pub style: PromptStyle,
    pub seed: u64,
    pub instruction: String,
    pub examples: Vec<(u64, u64)>,
    pub tasks: Vec<EvalPoint>,
    #[serde(default)]
    pub stats: SampleStats,
}

impl Prompt {
    pub fn render(&self) -> String {
        render_prompt(self)
    }

    pub fn cell(&self) -> (usize, usize) {
        (self.k, self.c)
    }
}

/// Hasse edges of `({1..k}, ⪯)` in target order. DIV also lists the self-loop
/// `(m, m)` right after the edges into `m`.
pub fn minimal_examples(kind: PosetKind, k: usize) -> Result<Vec<(u64, u64)>> {
    let h = build_hasse(kind, k)?;
    Ok(h.all_edges()
        .into_iter()
        .map(|(a, b)| (a as u64, b as u64))
        .collect())
}

/// Every pair that may appear as a task of a `P_{k,c}` prompt, in a fixed order:
/// at least one endpoint in `{k+1..k+c}`, not an edge of the extended diagram
/// over `{1..k+c}`, and not a demonstration in either orientation.
pub fn feasible_pairs(kind: PosetKind, k: usize, c: usize) -> Result<Vec<(u64, u64)>> {
    if k == 0 || c == 0 {
        return Err(invalid("k and c must be at least 1"));
    }
    let top = k + c;
    let extended = build_hasse(kind, top)?;
    let demos: HashSet<(u64, u64)> = minimal_examples(kind, k)?.into_iter().collect();
    let mut out = Vec::new();
    for a in 1..=top {
        for b in 1..=top {
            if a == b || (a <= k && b <= k) {
                continue;
            }
            if extended.has_edge(a, b) {
                continue;
            }
            let pair = (a as u64, b as u64);
            if demos.contains(&pair) || demos.contains(&(pair.1, pair.0)) {
                continue;
            }
            out.push(pair);
        }
    }
    Ok(out)
}

/// Draws up to `count` distinct evaluation points for `P_{k,c}`.
///
/// When the feasible set has at most `count` members all of them are returned
/// in enumeration order. Otherwise a window node and a partner are drawn
/// uniformly, the orientation is a fair coin, and infeasible or repeated pairs
/// are rejected.
pub fn sample_eval_points(
    kind: PosetKind,
    k: usize,
    c: usize,
    count: usize,
    seed: u64,
) -> Result<(Vec<EvalPoint>, SampleStats)> {
    let feasible = feasible_pairs(kind, k, c)?;
    let label = |(a, b): (u64, u64)| EvalPoint {
        a,
        b,
        truth: holds_values(kind, a, b),
    };

    let pairs: Vec<(u64, u64)> = if feasible.len() <= count {
        feasible.clone()
    } else {
        let allowed: HashSet<(u64, u64)> = feasible.iter().copied().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = HashSet::with_capacity(count);
        let mut out = Vec::with_capacity(count);
        let top = (k + c) as u64;
        while out.len() < count {
            let window = rng.random_range(k as u64 + 1..=top);
            let other = rng.random_range(1..=top);
            let pair = if rng.random_bool(0.5) {
                (other, window)
            } else {
                (window, other)
            };
            if allowed.contains(&pair) && chosen.insert(pair) {
                out.push(pair);
            }
        }
        out
    };

    let tasks: Vec<EvalPoint> = pairs.into_iter().map(label).collect();
    let true_count = tasks.iter().filter(|t| t.truth).count();
    let stats = SampleStats {
        requested: count,
        feasible: feasible.len(),
        realized: tasks.len(),
        true_count,
        false_count: tasks.len() - true_count,
    };
    Ok((tasks, stats))
}

pub fn prompt_id(kind: PosetKind, k: usize, c: usize, seed: u64, style: PromptStyle) -> String {
    let suffix = match style {
        PromptStyle::Standard => "",
        PromptStyle::Labeled => "_lab",
        PromptStyle::LabeledInstructed => "_labi",
    };
    format!("{kind}_k{k}_c{c}_s{seed}{suffix}")
}

/// Builds a complete prompt. Labeled styles keep only the first sampled task
/// as their query.
pub fn make_prompt(
    kind: PosetKind,
    k: usize,
    c: usize,
    count: usize,
    seed: u64,
    style: PromptStyle,
) -> Result<Prompt> {
    if count == 0 {
        return Err(invalid("count must be at least 1"));
    }
    let examples = minimal_examples(kind, k)?;
    let (mut tasks, mut stats) = sample_eval_points(kind, k, c, count, seed)?;
    if style != PromptStyle::Standard {
        tasks.truncate(1);
        stats.realized = tasks.len();
        stats.true_count = tasks.iter().filter(|t| t.truth).count();
        stats.false_count = tasks.len() - stats.true_count;
    }
    let instruction = match style {
        PromptStyle::Labeled => String::new(),
        _ => instruction_text(kind),
    };
    Ok(Prompt {
        id: prompt_id(kind, k, c, seed, style),
        kind,
        k,
        c,
        style,
        seed,
        instruction,
        examples,
        tasks,
        stats,
    })
}
