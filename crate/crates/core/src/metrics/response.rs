use std::collections::HashMap;
use std::sync::LazyLock;

use regex::Regex;
use serde::{Deserialize, Serialize};

use crate::poset::{to_word, PosetKind};
use crate::prompt::{EvalPoint, Prompt, PromptStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    True,
    False,
    Unknown,
    Unparseable,
}

impl Verdict {
    /// 1 when the verdict is the boolean `truth`, 0 otherwise.
    pub fn agrees(self, truth: bool) -> bool {
        matches!(
            (self, truth),
            (Verdict::True, true) | (Verdict::False, false)
        )
    }
}

// `<a> <rel> <b> [:] (true|false|unknown)` on a single line, tolerating quotes.
static ANSWER: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(
        r#"(?i)([0-9]+)[ \t]*["'“”]?[ \t]*(<|\||∣)[ \t]*["'“”]?[ \t]*([0-9]+)[ \t]*["'“”]?[ \t]*:?[ \t]*["'“”]?[ \t]*(true|false|unknown)\b"#,
    )
    .expect("answer pattern compiles")
});

fn symbol_matches(kind: PosetKind, sym: &str) -> bool {
    match kind {
        PosetKind::Lo | PosetKind::LoBin => sym == "<",
        PosetKind::Div => sym == "|" || sym == "∣",
    }
}

/// Extracts one verdict per task. Tasks are matched by their `(a, b)` words
/// anywhere in the text; the first answer for a pair wins. Pairs with no
/// well-formed answer are [`Verdict::Unparseable`].
pub fn parse_response(text: &str, kind: PosetKind, tasks: &[EvalPoint]) -> Vec<Verdict> {
    let mut found: HashMap<(&str, &str), Verdict> = HashMap::new();
    for cap in ANSWER.captures_iter(text) {
        if !symbol_matches(kind, &cap[2]) {
            continue;
        }
        let verdict = match cap[4].to_ascii_lowercase().as_str() {
            "true" => Verdict::True,
            "false" => Verdict::False,
            _ => Verdict::Unknown,
        };
        let a = cap.get(1).map_or("", |m| m.as_str());
        let b = cap.get(3).map_or("", |m| m.as_str());
        found.entry((a, b)).or_insert(verdict);
    }
    tasks
        .iter()
        .map(|t| {
            let a = to_word(kind, t.a);
            let b = to_word(kind, t.b);
            found
                .get(&(a.as_str(), b.as_str()))
                .copied()
                .unwrap_or(Verdict::Unparseable)
        })
        .collect()
}

static BARE: LazyLock<Regex> = LazyLock::new(|| {
    Regex::new(r"(?i)\b(true|false|unknown)\b").expect("bare verdict pattern compiles")
});

/// Parses a completion for `prompt`. Labeled prompts ask a single query, so a
/// bare `True`/`False` is accepted when no full answer line names the pair.
pub fn parse_for_prompt(prompt: &Prompt, text: &str) -> Vec<Verdict> {
    let mut verdicts = parse_response(text, prompt.kind, &prompt.tasks);
    if prompt.style != PromptStyle::Standard && verdicts.len() == 1 && verdicts[0] == Verdict::Unparseable {
        if let Some(m) = BARE.captures(text) {
            verdicts[0] = match m[1].to_ascii_lowercase().as_str() {
                "true" => Verdict::True,
                "false" => Verdict::False,
                _ => Verdict::Unknown,
            };
        }
    }
    verdicts
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tasks(pairs: &[(u64, u64)], kind: PosetKind) -> Vec<EvalPoint> {
        pairs
            .iter()
            .map(|&(a, b)| EvalPoint {
                a,
                b,
                truth: crate::poset::holds_values(kind, a, b),
            })
            .collect()
    }

    #[test]
    fn gemma_divides_block() {
        let text = "\"1 ∣ 5 : true\n2 ∣ 6 : true\n5 ∣ 6 : true ...\"";
        let t = tasks(&[(1, 5), (2, 6), (5, 6)], PosetKind::Div);
        assert_eq!(
            parse_response(text, PosetKind::Div, &t),
            vec![Verdict::True; 3]
        );
    }

    #[test]
    fn empty_text_is_unparseable() {
        let t = tasks(&[(1, 5)], PosetKind::Div);
        assert_eq!(
            parse_response("", PosetKind::Div, &t),
            vec![Verdict::Unparseable]
        );
    }

    #[test]
    fn wrong_symbol_is_ignored() {
        let t = tasks(&[(2, 4)], PosetKind::Div);
        assert_eq!(
            parse_response("2 < 4 : true", PosetKind::Div, &t),
            vec![Verdict::Unparseable]
        );
    }

    #[test]
    fn case_quotes_and_unknown() {
        let t = tasks(&[(3, 9), (9, 3), (4, 5)], PosetKind::Lo);
        let text = "\"3 < 9\": TRUE\n9<3 False\n'4 < 5' : Unknown";
        assert_eq!(
            parse_response(text, PosetKind::Lo, &t),
            vec![Verdict::True, Verdict::False, Verdict::Unknown]
        );
    }

    #[test]
    fn first_answer_wins() {
        let t = tasks(&[(3, 9)], PosetKind::Lo);
        let text = "3 < 9 : false\n3 < 9 : true";
        assert_eq!(parse_response(text, PosetKind::Lo, &t), vec![Verdict::False]);
    }

    #[test]
    fn answer_must_share_the_line() {
        let t = tasks(&[(1, 5), (2, 6)], PosetKind::Lo);
        let text = "1 < 5\n2 < 6 : true";
        assert_eq!(
            parse_response(text, PosetKind::Lo, &t),
            vec![Verdict::Unparseable, Verdict::True]
        );
    }

    #[test]
    fn labeled_accepts_bare_answer() {
        let p = crate::prompt::make_prompt(PosetKind::Lo, 3, 2, 5, 1, PromptStyle::Labeled).unwrap();
        assert_eq!(parse_for_prompt(&p, " True\n"), vec![Verdict::True]);
        assert_eq!(parse_for_prompt(&p, "no idea"), vec![Verdict::Unparseable]);
    }
}
