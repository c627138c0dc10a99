use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;

use serde::Serialize;

use super::embeddings::{EmbeddingSet, TaskLabel};
use super::optimize::Projection2D;
use super::silhouette::silhouette_samples;
use crate::error::Result;

/// Rows `label,x,y,kl,seed` for every run.
pub fn write_projection_csv<W: Write>(out: W, set: &EmbeddingSet, runs: &[Projection2D]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["label", "x", "y", "kl", "seed"])?;
    for run in runs {
        for (e, p) in set.entries.iter().zip(&run.points) {
            w.write_record([
                e.label.to_string(),
                p[0].to_string(),
                p[1].to_string(),
                run.kl.to_string(),
                run.seed.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SilhouetteRow {
    pub task: String,
    /// `k` or `k_c`, or `all` for the task-wide mean.
    pub level: String,
    pub n: usize,
    pub silhouette: f64,
}

fn level(l: &TaskLabel) -> String {
    match l.c {
        Some(c) => format!("{}_{}", l.k, c),
        None => l.k.to_string(),
    }
}

/// Points of each task are grouped by level; the mean per-point silhouette is
/// reported per level and over the whole task. Tasks with a single level are
/// skipped.
pub fn silhouette_summary(set: &EmbeddingSet, proj: &Projection2D) -> Result<Vec<SilhouetteRow>> {
    let mut by_task: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
    for (i, e) in set.entries.iter().enumerate() {
        by_task.entry(e.label.task.as_str()).or_default().push(i);
    }
    let mut rows = Vec::new();
    for (task, idx) in by_task {
        let labels: Vec<&TaskLabel> = idx.iter().map(|&i| &set.entries[i].label).collect();
        let points: Vec<[f64; 2]> = idx.iter().map(|&i| proj.points[i]).collect();
        let keys: Vec<(usize, Option<usize>)> = labels.iter().map(|l| (l.k, l.c)).collect();
        let samples = match silhouette_samples(&points, &keys) {
            Ok(s) => s,
            Err(e) => {
                log::warn!("skipping task {task}: {e}");
                continue;
            }
        };
        let mut per_level: BTreeMap<(usize, Option<usize>), (String, Vec<f64>)> = BTreeMap::new();
        for ((key, l), s) in keys.iter().zip(&labels).zip(&samples) {
            per_level
                .entry(*key)
                .or_insert_with(|| (level(l), Vec::new()))
                .1
                .push(*s);
        }
        for (_, (lvl, vals)) in per_level {
            rows.push(SilhouetteRow {
                task: task.to_string(),
                level: lvl,
                n: vals.len(),
                silhouette: vals.iter().sum::<f64>() / vals.len() as f64,
            });
        }
        rows.push(SilhouetteRow {
            task: task.to_string(),
            level: "all".into(),
            n: samples.len(),
            silhouette: samples.iter().sum::<f64>() / samples.len() as f64,
        });
    }
    Ok(rows)
}

pub fn write_silhouette_csv<W: Write>(out: W, rows: &[SilhouetteRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Scatter plot with one hue per level, evenly spaced around the color wheel.
pub fn render_svg(set: &EmbeddingSet, proj: &Projection2D) -> String {
    const SIZE: f64 = 600.0;
    const PAD: f64 = 30.0;
    let (mut lo, mut hi) = ([f64::INFINITY; 2], [f64::NEG_INFINITY; 2]);
    for p in &proj.points {
        for a in 0..2 {
            lo[a] = lo[a].min(p[a]);
            hi[a] = hi[a].max(p[a]);
        }
    }
    let span = (0..2).map(|a| hi[a] - lo[a]).fold(1e-12, f64::max);
    let scale = (SIZE - 2.0 * PAD) / span;

    let mut levels: Vec<String> = set.entries.iter().map(|e| level(&e.label)).collect();
    levels.sort();
    levels.dedup();

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for (e, p) in set.entries.iter().zip(&proj.points) {
        let l = level(&e.label);
        let hue = 360.0 * levels.iter().position(|x| *x == l).unwrap_or(0) as f64 / levels.len() as f64;
        let x = PAD + (p[0] - lo[0]) * scale;
        let y = SIZE - PAD - (p[1] - lo[1]) * scale;
        let _ = writeln!(
            svg,
            r#"<circle cx="{x:.2}" cy="{y:.2}" r="4" fill="hsl({hue:.0},70%,45%)"><title>{}</title></circle>"#,
            e.label
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tsne::embeddings::Embedding;

    fn fixture() -> (EmbeddingSet, Projection2D) {
        let labels = ["LO_1", "LO_1", "LO_2", "LO_2", "DIV_3_4"];
        let entries = labels
            .iter()
            .map(|l| Embedding {
                label: l.parse().unwrap(),
                vector: vec![1.0],
            })
            .collect();
        let set = EmbeddingSet::new(entries, Some(12)).unwrap();
        let proj = Projection2D {
            points: vec![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0], [5.0, 5.0]],
            kl: 0.25,
            kl_after_exaggeration: 0.3,
            seed: 3,
        };
        (set, proj)
    }

    #[test]
    fn summary_skips_single_level_tasks() {
        let (set, proj) = fixture();
        let rows = silhouette_summary(&set, &proj).unwrap();
        assert!(rows.iter().all(|r| r.task == "LO"));
        assert_eq!(rows.len(), 3);
        assert_eq!(rows[2].level, "all");
        assert!(rows[2].silhouette > 0.8);
    }

    #[test]
    fn csv_and_svg() {
        let (set, proj) = fixture();
        let mut buf = Vec::new();
        write_projection_csv(&mut buf, &set, std::slice::from_ref(&proj)).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("label,x,y,kl,seed\nLO_1,0,0,0.25,3\n"));
        assert_eq!(text.lines().count(), 6);
        let svg = render_svg(&set, &proj);
        assert_eq!(svg.matches("<circle").count(), 5);
    }
}
