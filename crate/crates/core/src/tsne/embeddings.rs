use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `Task_k` or `Task_k_c`, e.g. `LO_50` or `DIV_10_30`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TaskLabel {
    pub task: String,
    pub k: usize,
    pub c: Option<usize>,
}

impl FromStr for TaskLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let parts: Vec<&str> = s.split('_').collect();
        let (task, nums) = match parts.as_slice() {
            [task, rest @ ..] if (1..=2).contains(&rest.len()) => (*task, rest),
            _ => return Err(format!("label {s:?} is not Task_k or Task_k_c")),
        };
        if task.is_empty() || !task.chars().all(|c| c.is_ascii_alphanumeric()) {
            return Err(format!("label {s:?} has a malformed task name"));
        }
        let num = |x: &str| {
            x.parse::<usize>()
                .map_err(|_| format!("label {s:?}: {x:?} is not a count"))
        };
        Ok(Self {
            task: task.to_string(),
            k: num(nums[0])?,
            c: nums.get(1).map(|x| num(x)).transpose()?,
        })
    }
}

impl fmt::Display for TaskLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.c {
            Some(c) => write!(f, "{}_{}_{}", self.task, self.k, c),
            None => write!(f, "{}_{}", self.task, self.k),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub label: TaskLabel,
    pub vector: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub entries: Vec<Embedding>,
    pub d: usize,
    /// Extraction layer, carried through as metadata.
    pub layer: Option<i64>,
}

#[derive(Debug, Deserialize, Serialize)]
struct Line {
    label: String,
    vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    layer: Option<i64>,
}

impl EmbeddingSet {
    pub fn new(entries: Vec<Embedding>, layer: Option<i64>) -> Result<Self> {
        let d = entries
            .first()
            .map(|e| e.vector.len())
            .ok_or_else(|| invalid("embedding set is empty"))?;
        if let Some((i, e)) = entries.iter().enumerate().find(|(_, e)| e.vector.len() != d) {
            return Err(invalid(format!(
                "entry {i} ({}) has dimension {}, expected {d}",
                e.label,
                e.vector.len()
            )));
        }
        Ok(Self { entries, d, layer })
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn labels(&self) -> Vec<String> {
        self.entries.iter().map(|e| e.label.to_string()).collect()
    }

    pub fn parse_jsonl<R: BufRead>(reader: R) -> Result<Self> {
        let mut entries = Vec::new();
        let mut layer = None;
        let mut d = None;
        for (i, line) in reader.lines().enumerate() {
            let line_no = i + 1;
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let raw: Line = serde_json::from_str(&line).map_err(|e| Error::Format {
                line: line_no,
                msg: e.to_string(),
            })?;
            let label = raw.label.parse::<TaskLabel>().map_err(|msg| Error::Format {
                line: line_no,
                msg,
            })?;
            match d {
                None => d = Some(raw.vector.len()),
                Some(d) if d != raw.vector.len() => {
                    return Err(Error::Format {
                        line: line_no,
                        msg: format!(
                            "dimension mismatch: {} has {} components, expected {d}",
                            raw.label,
                            raw.vector.len()
                        ),
                    })
                }
                _ => {}
            }
            if raw.vector.iter().any(|v| !v.is_finite()) {
                return Err(Error::Format {
                    line: line_no,
                    msg: "non-finite component".into(),
                });
            }
            layer = layer.or(raw.layer);
            entries.push(Embedding {
                label,
                vector: raw.vector,
            });
        }
        Self::new(entries, layer)
    }

    pub fn write_jsonl<W: std::io::Write>(&self, mut out: W) -> Result<()> {
        for e in &self.entries {
            let line = Line {
                label: e.label.to_string(),
                vector: e.vector.clone(),
                layer: self.layer,
            };
            serde_json::to_writer(&mut out, &line)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    let file = File::open(path)?;
    EmbeddingSet::parse_jsonl(BufReader::new(file))
}

/// `D_ij = 1 − <v_i, v_j> / (|v_i| |v_j|)`, clamped to `[0, 2]`, zero diagonal.
pub fn cosine_distance_matrix(set: &EmbeddingSet) -> Result<DMatrix<f64>> {
    let norms: Vec<f64> = set
        .entries
        .iter()
        .map(|e| e.vector.iter().map(|v| v * v).sum::<f64>().sqrt())
        .collect();
    if let Some(i) = norms.iter().position(|&n| n == 0.0) {
        return Err(invalid(format!("vector {i} has zero norm")));
    }
    let n = set.len();
    let mut dist = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i + 1..n {
            let dot: f64 = set.entries[i]
                .vector
                .iter()
                .zip(&set.entries[j].vector)
                .map(|(a, b)| a * b)
                .sum();
            let v = (1.0 - dot / (norms[i] * norms[j])).clamp(0.0, 2.0);
            dist[(i, j)] = v;
            dist[(j, i)] = v;
        }
    }
    Ok(dist)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(vectors: &[&[f64]]) -> EmbeddingSet {
        let entries = vectors
            .iter()
            .enumerate()
            .map(|(i, v)| Embedding {
                label: format!("LO_{}", i + 1).parse().unwrap(),
                vector: v.to_vec(),
            })
            .collect();
        EmbeddingSet::new(entries, None).unwrap()
    }

    #[test]
    fn labels_parse() {
        let l: TaskLabel = "DIV_10_30".parse().unwrap();
        assert_eq!((l.task.as_str(), l.k, l.c), ("DIV", 10, Some(30)));
        let l: TaskLabel = "LO_50".parse().unwrap();
        assert_eq!((l.task.as_str(), l.k, l.c), ("LO", 50, None));
        assert_eq!(l.to_string(), "LO_50");
        assert!("LO".parse::<TaskLabel>().is_err());
        assert!("LO_x".parse::<TaskLabel>().is_err());
        assert!("LO_1_2_3".parse::<TaskLabel>().is_err());
    }

    #[test]
    fn loads_ten_vectors() {
        let text: String = (1..=10)
            .map(|i| format!("{{\"label\":\"LO_{}\",\"vector\":[{i},1,0]}}\n", i * 10))
            .collect();
        let s = EmbeddingSet::parse_jsonl(text.as_bytes()).unwrap();
        assert_eq!((s.len(), s.d), (10, 3));
    }

    #[test]
    fn mixed_dimension_names_line() {
        let text = "{\"label\":\"LO_1\",\"vector\":[1,2]}\n{\"label\":\"LO_2\",\"vector\":[1,2,3]}\n";
        match EmbeddingSet::parse_jsonl(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        let text = "{\"label\":\"oops\",\"vector\":[1,2]}\n";
        assert!(matches!(
            EmbeddingSet::parse_jsonl(text.as_bytes()),
            Err(Error::Format { line: 1, .. })
        ));
    }

    #[test]
    fn cosine_examples() {
        let s = set(&[&[1.0, 0.0], &[2.0, 0.0], &[0.0, 3.0], &[-1.0, 0.0]]);
        let d = cosine_distance_matrix(&s).unwrap();
        assert!(d[(0, 1)].abs() < 1e-15);
        assert!((d[(0, 2)] - 1.0).abs() < 1e-15);
        assert!((d[(0, 3)] - 2.0).abs() < 1e-15);
        assert_eq!(d, d.transpose());
        assert!((0..4).all(|i| d[(i, i)] == 0.0));
        let z = set(&[&[1.0, 0.0], &[0.0, 0.0]]);
        assert!(cosine_distance_matrix(&z).is_err());
    }
}
