//! The three studied posets: `(N, <)`, `({0,1}*, <)` under length-lexicographic
//! order, and `(N, |)`, together with their Hasse diagrams over ground sets
//! `{1..n}`.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum PosetKind {
    /// Less-than on decimal naturals. Irreflexive.
    #[serde(rename = "LO")]
    Lo,
    /// Less-than on binary numerals, compared by length then lexicographically.
    #[serde(rename = "LOBIN")]
    LoBin,
    /// Divisibility on decimal naturals. Reflexive.
    #[serde(rename = "DIV")]
    Div,
}

impl PosetKind {
    pub const ALL: [PosetKind; 3] = [PosetKind::Lo, PosetKind::LoBin, PosetKind::Div];

    pub fn reflexive(self) -> bool {
        matches!(self, PosetKind::Div)
    }

    /// Relation symbol used in rendered prompts.
    pub fn symbol(self) -> &'static str {
        match self {
            PosetKind::Lo | PosetKind::LoBin => "<",
            PosetKind::Div => "|",
        }
    }

    pub fn radix(self) -> u32 {
        match self {
            PosetKind::LoBin => 2,
            PosetKind::Lo | PosetKind::Div => 10,
        }
    }

    /// Number of evaluation points per prompt used in the original sweeps.
    pub fn default_task_count(self) -> usize {
        match self {
            PosetKind::Lo | PosetKind::LoBin => 50,
            PosetKind::Div => 30,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PosetKind::Lo => "LO",
            PosetKind::LoBin => "LOBIN",
            PosetKind::Div => "DIV",
        }
    }
}

impl fmt::Display for PosetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PosetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "LO" => Ok(PosetKind::Lo),
            "LOBIN" => Ok(PosetKind::LoBin),
            "DIV" => Ok(PosetKind::Div),
            other => Err(invalid(format!("unknown poset kind {other:?}"))),
        }
    }
}

/// A numeral over the alphabet of a poset kind, without leading zeros
/// (except the word `"0"` itself).
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct NaturalWord {
    digits: String,
    radix: u32,
}

impl NaturalWord {
    pub fn parse(kind: PosetKind, s: &str) -> Result<Self> {
        let radix = kind.radix();
        if s.is_empty() {
            return Err(invalid("empty word"));
        }
        if let Some(bad) = s.chars().find(|c| !c.is_digit(radix)) {
            return Err(invalid(format!(
                "character {bad:?} in {s:?} is outside the {kind} alphabet"
            )));
        }
        if s.len() > 1 && s.starts_with('0') {
            return Err(invalid(format!("word {s:?} has a leading zero")));
        }
        Ok(Self {
            digits: s.to_string(),
            radix,
        })
    }

    pub fn as_str(&self) -> &str {
        &self.digits
    }

    pub fn radix(&self) -> u32 {
        self.radix
    }

    pub fn value(&self) -> Result<u64> {
        u64::from_str_radix(&self.digits, self.radix)
            .map_err(|e| invalid(format!("word {:?}: {e}", self.digits)))
    }

    fn check_kind(&self, kind: PosetKind) -> Result<()> {
        if self.radix != kind.radix() {
            return Err(invalid(format!(
                "word {:?} (radix {}) used with {kind}",
                self.digits, self.radix
            )));
        }
        Ok(())
    }
}

impl fmt::Display for NaturalWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.digits)
    }
}

/// Renders `v` in the kind's alphabet: decimal for LO/DIV, binary for LOBIN.
pub fn to_word(kind: PosetKind, v: u64) -> NaturalWord {
    let digits = match kind {
        PosetKind::LoBin => format!("{v:b}"),
        PosetKind::Lo | PosetKind::Div => v.to_string(),
    };
    NaturalWord {
        digits,
        radix: kind.radix(),
    }
}

/// Ground-truth relation, computed directly from the words.
pub fn holds(kind: PosetKind, a: &NaturalWord, b: &NaturalWord) -> Result<bool> {
    a.check_kind(kind)?;
    b.check_kind(kind)?;
    Ok(match kind {
        PosetKind::Lo => a.value()? < b.value()?,
        // Length first, then byte order ('0' < '1'). No arithmetic involved.
        PosetKind::LoBin => {
            let (x, y) = (a.as_str(), b.as_str());
            x.len() < y.len() || (x.len() == y.len() && x < y)
        }
        PosetKind::Div => divides(a.value()?, b.value()?),
    })
}

/// Value-level ground truth for ground-set members.
pub fn holds_values(kind: PosetKind, a: u64, b: u64) -> bool {
    match kind {
        PosetKind::Lo | PosetKind::LoBin => a < b,
        PosetKind::Div => divides(a, b),
    }
}

fn divides(a: u64, b: u64) -> bool {
    match (a, b) {
        (0, 0) => true,
        (0, _) => false,
        _ => b.is_multiple_of(a),
    }
}

/// Hasse diagram of a poset restricted to `{1..n}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HasseDiagram {
    kind: PosetKind,
    n: usize,
    /// Non-loop covering edges, sorted by (target, source).
    edges: Vec<(usize, usize)>,
    successors: Vec<Vec<usize>>,
    reflexive: bool,
}

impl HasseDiagram {
    pub fn kind(&self) -> PosetKind {
        self.kind
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn reflexive(&self) -> bool {
        self.reflexive
    }

    /// Covering edges without self-loops.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// All edges including self-loops when the relation is reflexive.
    pub fn all_edges(&self) -> Vec<(usize, usize)> {
        let mut out = self.edges.clone();
        if self.reflexive {
            out.extend((1..=self.n).map(|v| (v, v)));
        }
        out.sort_by_key(|&(a, b)| (b, a));
        out
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        if a == b {
            return self.reflexive && (1..=self.n).contains(&a);
        }
        self.edges.binary_search_by_key(&(b, a), |&(x, y)| (y, x)).is_ok()
    }

    /// Builds a diagram from raw parts without checking the Hasse invariants.
    /// Used to probe minimality.
    pub fn from_edges(kind: PosetKind, n: usize, mut edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(invalid("ground set must be non-empty"));
        }
        let mut successors = vec![Vec::new(); n + 1];
        for &(a, b) in &edges {
            if a == 0 || b == 0 || a > n || b > n || a == b {
                return Err(invalid(format!("bad edge ({a},{b}) for n={n}")));
            }
            successors[a].push(b);
        }
        edges.sort_by_key(|&(a, b)| (b, a));
        edges.dedup();
        Ok(Self {
            kind,
            n,
            edges,
            successors,
            reflexive: kind.reflexive(),
        })
    }
}

pub fn build_hasse(kind: PosetKind, n: usize) -> Result<HasseDiagram> {
    if n == 0 {
        return Err(invalid("n must be at least 1"));
    }
    let edges = match kind {
        PosetKind::Lo | PosetKind::LoBin => (1..n).map(|m| (m, m + 1)).collect(),
        PosetKind::Div => divisibility_edges(n),
    };
    HasseDiagram::from_edges(kind, n, edges)
}

/// Edges `(m/p, m)` for each prime `p | m`, via a smallest-prime-factor sieve.
fn divisibility_edges(n: usize) -> Vec<(usize, usize)> {
    let mut spf = vec![0usize; n + 1];
    for i in 2..=n {
        if spf[i] == 0 {
            let mut j = i;
            while j <= n {
                if spf[j] == 0 {
                    spf[j] = i;
                }
                j += i;
            }
        }
    }
    let mut edges = Vec::new();
    for m in 2..=n {
        let mut rest = m;
        let mut sources = Vec::new();
        while rest > 1 {
            let p = spf[rest];
            sources.push(m / p);
            while rest % p == 0 {
                rest /= p;
            }
        }
        sources.sort_unstable();
        edges.extend(sources.into_iter().map(|a| (a, m)));
    }
    edges
}

/// True iff a directed path of length at least one leads from `a` to `b`.
/// For `a == b` that is exactly the self-loop of a reflexive diagram.
pub fn reachable(h: &HasseDiagram, a: usize, b: usize) -> Result<bool> {
    for v in [a, b] {
        if v == 0 || v > h.n {
            return Err(invalid(format!("node {v} outside 1..={}", h.n)));
        }
    }
    if a == b {
        return Ok(h.reflexive);
    }
    let mut seen = vec![false; h.n + 1];
    let mut queue = VecDeque::from([a]);
    seen[a] = true;
    while let Some(v) = queue.pop_front() {
        for &w in &h.successors[v] {
            if w == b {
                return Ok(true);
            }
            if !seen[w] {
                seen[w] = true;
                queue.push_back(w);
            }
        }
    }
    Ok(false)
}
