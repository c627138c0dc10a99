//! Kendall's coefficient of concordance, plain and judge-weighted.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Judge {
    pub name: String,
    #[serde(default = "one")]
    pub weight: f64,
}

fn one() -> f64 {
    1.0
}

/// `ranks[j][i]` is judge `j`'s rank of item `i`, starting at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    pub judges: Vec<Judge>,
    pub items: Vec<String>,
    pub ranks: Vec<Vec<u32>>,
}

impl RankTable {
    pub fn validate(&self) -> Result<()> {
        let n = self.items.len();
        if n < 2 {
            return Err(Error::UndefinedMetric(format!(
                "Kendall's W needs at least 2 items, got {n}"
            )));
        }
        if self.judges.is_empty() || self.ranks.len() != self.judges.len() {
            return Err(Error::InvalidArgument(format!(
                "{} rank rows for {} judges",
                self.ranks.len(),
                self.judges.len()
            )));
        }
        for (judge, row) in self.judges.iter().zip(&self.ranks) {
            if row.len() != n {
                return Err(Error::InvalidArgument(format!(
                    "judge {} ranks {} items, expected {n}",
                    judge.name,
                    row.len()
                )));
            }
            let mut seen = vec![false; n + 1];
            for &r in row {
                let r = r as usize;
                if r == 0 || r > n || seen[r] {
                    return Err(Error::InvalidArgument(format!(
                        "judge {} row {row:?} is not a permutation of 1..={n} (ties are not supported)",
                        judge.name
                    )));
                }
                seen[r] = true;
            }
            if !(judge.weight.is_finite() && judge.weight >= 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "judge {} has weight {}",
                    judge.name, judge.weight
                )));
            }
        }
        Ok(())
    }

    /// Builds a table from per-judge item orderings, best first.
    pub fn from_orderings(
        judges: Vec<Judge>,
        items: Vec<String>,
        orderings: &[Vec<&str>],
    ) -> Result<Self> {
        let mut ranks = Vec::with_capacity(orderings.len());
        for order in orderings {
            let mut row = vec![0u32; items.len()];
            for (pos, name) in order.iter().enumerate() {
                let idx = items.iter().position(|i| i == name).ok_or_else(|| {
                    Error::InvalidArgument(format!("unknown item {name:?}"))
                })?;
                row[idx] = pos as u32 + 1;
            }
            ranks.push(row);
        }
        let table = Self {
            judges,
            items,
            ranks,
        };
        table.validate()?;
        Ok(table)
    }
}

/// Unweighted: `W = Σ(R_i − R̄)² / (m²(n³−n)/12)` with `R_i = Σ_j r_ij`.
/// Weighted: `W = Σ(R_i − R̄)² / (n(n²−1)/12)` with `R_i = Σ_j w_j r_ij` and
/// weights normalized to sum to one.
pub fn kendall_w(table: &RankTable, weighted: bool) -> Result<f64> {
    table.validate()?;
    let m = table.judges.len() as f64;
    let n = table.items.len();
    let nf = n as f64;

    let weights: Vec<f64> = if weighted {
        let total: f64 = table.judges.iter().map(|j| j.weight).sum();
        if total <= 0.0 {
            return Err(Error::InvalidArgument("judge weights sum to zero".into()));
        }
        table.judges.iter().map(|j| j.weight / total).collect()
    } else {
        vec![1.0; table.judges.len()]
    };

    let sums: Vec<f64> = (0..n)
        .map(|i| {
            table
                .ranks
                .iter()
                .zip(&weights)
                .map(|(row, w)| w * row[i] as f64)
                .sum()
        })
        .collect();
    let mean = sums.iter().sum::<f64>() / nf;
    let spread: f64 = sums.iter().map(|r| (r - mean).powi(2)).sum();
    let denom = if weighted {
        nf * (nf * nf - 1.0) / 12.0
    } else {
        m * m * (nf.powi(3) - nf) / 12.0
    };
    Ok(spread / denom)
}
