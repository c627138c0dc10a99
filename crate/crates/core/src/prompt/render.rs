use std::fmt::Write as _;

use super::{Prompt, PromptStyle};
use crate::poset::{holds_values, to_word, PosetKind};

pub(super) const INDENT: &str = "    ";
pub(super) const TASK_HEADER: &str = "Follow the specified format for answering:";

pub(super) fn description_line(kind: PosetKind) -> &'static str {
    match kind {
        PosetKind::Lo => {
            "Relation Description: There is a relation less than \"<\" between strings made of decimal digits \"0\", \"1\", \"2\", \"3\", \"4\", \"5\", \"6\", \"7\", \"8\" and \"9\"."
        }
        PosetKind::LoBin => {
            "Relation Description: There is a relation less than \"<\" between binary strings made of characters \"0\" and \"1\"."
        }
        PosetKind::Div => {
            "Relation Description: There is a relation divides '|' between integers composed of digits \"0\", \"1\", \"2\", \"3\", \"4\", \"5\", \"6\", \"7\", \"8\" and \"9\"."
        }
    }
}

fn noun(kind: PosetKind) -> &'static str {
    match kind {
        PosetKind::LoBin => "strings",
        PosetKind::Lo | PosetKind::Div => "integers",
    }
}

fn placeholder(kind: PosetKind) -> &'static str {
    match kind {
        PosetKind::LoBin => "string",
        PosetKind::Lo | PosetKind::Div => "integer",
    }
}

/// The relation description and its properties: alphabet, anti-symmetry,
/// transitivity, then reflexivity or irreflexivity.
pub fn instruction_text(kind: PosetKind) -> String {
    let r = kind.symbol();
    let reflexivity = if kind.reflexive() {
        format!("(c) x{r}x is always true, for any x.")
    } else {
        format!("(c) x{r}x is always false, for any x.")
    };
    let mut s = String::new();
    s.push_str(description_line(kind));
    s.push('\n');
    let _ = writeln!(
        s,
        "Given such {} x, y, and z, the relation has the following properties:",
        noun(kind)
    );
    let _ = writeln!(s, "{INDENT}(a) if x{r}y is true, then y{r}x is false,");
    let _ = writeln!(
        s,
        "{INDENT}(b) if both x{r}y and y{r}z are true, then x{r}z is true, and"
    );
    let _ = write!(s, "{INDENT}{reflexivity}");
    s
}

pub(super) fn task_description(kind: PosetKind) -> String {
    let r = kind.symbol();
    let p = placeholder(kind);
    let one = format!("{{{p} 1}}");
    let two = format!("{{{p} 2}}");
    let mut s = String::new();
    let _ = writeln!(
        s,
        "Task Description: Given the above information, determine if {one} {r} {two} is true."
    );
    let _ = writeln!(
        s,
        "{INDENT}If it is true, your answer must be \"{one} {r} {two}: true\"."
    );
    let _ = writeln!(
        s,
        "{INDENT}If it is false, your answer must be \"{one} {r} {two}: false\"."
    );
    let _ = write!(
        s,
        "{INDENT}If you do not know if it is true or false, you answer must be \"{one} {r} {two} : unknown\"."
    );
    s
}

pub(super) fn pair_text(kind: PosetKind, a: u64, b: u64) -> String {
    format!("{} {} {}", to_word(kind, a), kind.symbol(), to_word(kind, b))
}

/// Task lines are quoted for binary strings, bare for decimal integers.
pub(super) fn task_line(kind: PosetKind, a: u64, b: u64) -> String {
    match kind {
        PosetKind::LoBin => format!("\"{}\"", pair_text(kind, a, b)),
        _ => pair_text(kind, a, b),
    }
}

pub fn render_prompt(p: &Prompt) -> String {
    match p.style {
        PromptStyle::Standard => render_standard(p),
        PromptStyle::Labeled | PromptStyle::LabeledInstructed => render_labeled(p),
    }
}

fn render_standard(p: &Prompt) -> String {
    let mut s = String::new();
    if p.instruction.is_empty() {
        s.push_str(&instruction_text(p.kind));
    } else {
        s.push_str(&p.instruction);
    }
    s.push('\n');
    let examples: Vec<String> = p
        .examples
        .iter()
        .map(|&(a, b)| format!("\"{}\"", pair_text(p.kind, a, b)))
        .collect();
    let _ = writeln!(s, "Examples: {}", examples.join(", "));
    s.push_str(&task_description(p.kind));
    s.push('\n');
    s.push_str(TASK_HEADER);
    for t in &p.tasks {
        s.push('\n');
        s.push_str(&task_line(p.kind, t.a, t.b));
    }
    s.push('\n');
    s
}

fn render_labeled(p: &Prompt) -> String {
    let mut s = String::new();
    if p.style == PromptStyle::LabeledInstructed {
        if p.instruction.is_empty() {
            s.push_str(&instruction_text(p.kind));
        } else {
            s.push_str(&p.instruction);
        }
        s.push('\n');
    }
    for &(a, b) in &p.examples {
        let label = if holds_values(p.kind, a, b) {
            "True"
        } else {
            "False"
        };
        let _ = writeln!(s, "({}) -> {label}", pair_text(p.kind, a, b));
    }
    if let Some(q) = p.tasks.first() {
        let _ = write!(s, "({}) ->", pair_text(p.kind, q.a, q.b));
    }
    s
}
