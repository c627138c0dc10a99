use std::collections::BTreeMap;

use crate::error::{Error, Result};

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
}

/// Silhouette coefficient of every point under Euclidean distance. Points in
/// singleton groups score 0.
pub fn silhouette_samples<L: Ord>(points: &[[f64; 2]], labels: &[L]) -> Result<Vec<f64>> {
    if points.len() != labels.len() {
        return Err(crate::error::invalid(format!(
            "{} points but {} labels",
            points.len(),
            labels.len()
        )));
    }
    let mut groups: BTreeMap<&L, Vec<usize>> = BTreeMap::new();
    for (i, l) in labels.iter().enumerate() {
        groups.entry(l).or_default().push(i);
    }
    if groups.len() < 2 {
        return Err(Error::UndefinedMetric(
            "silhouette needs at least two groups".into(),
        ));
    }
    Ok((0..points.len())
        .map(|i| {
            let own = &groups[&labels[i]];
            if own.len() == 1 {
                return 0.0;
            }
            let mean_to = |members: &[usize]| {
                members
                    .iter()
                    .filter(|&&j| j != i)
                    .map(|&j| dist(points[i], points[j]))
                    .sum::<f64>()
            };
            let a = mean_to(own) / (own.len() - 1) as f64;
            let b = groups
                .iter()
                .filter(|(l, _)| **l != &labels[i])
                .map(|(_, m)| mean_to(m) / m.len() as f64)
                .fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect())
}

/// Mean silhouette coefficient, in `[-1, 1]`.
pub fn cluster_separation<L: Ord>(points: &[[f64; 2]], labels: &[L]) -> Result<f64> {
    let s = silhouette_samples(points, labels)?;
    Ok(s.iter().sum::<f64>() / s.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn far_groups_score_near_one() {
        let pts = [[0.0, 0.0], [0.1, 0.0], [100.0, 0.0], [100.1, 0.0]];
        let s = cluster_separation(&pts, &[0, 0, 1, 1]).unwrap();
        assert!(s > 0.99, "{s}");
    }

    #[test]
    fn coincident_groups_score_low() {
        let pts = [[0.0, 0.0], [1.0, 0.0], [0.0, 0.0], [1.0, 0.0]];
        let s = cluster_separation(&pts, &["a", "a", "b", "b"]).unwrap();
        assert!(s <= 1e-12, "{s}");
    }

    #[test]
    fn hand_computed() {
        // a = 1, b = mean(3, 4) = 3.5 for point 0
        let pts = [[0.0, 0.0], [1.0, 0.0], [3.0, 0.0], [4.0, 0.0]];
        let s = silhouette_samples(&pts, &[0, 0, 1, 1]).unwrap();
        assert!((s[0] - 2.5 / 3.5).abs() < 1e-15);
        assert!((s[1] - (2.5 - 1.0) / 2.5).abs() < 1e-15);
    }

    #[test]
    fn single_group_undefined() {
        let pts = [[0.0, 0.0], [1.0, 0.0]];
        assert!(matches!(
            cluster_separation(&pts, &[1, 1]),
            Err(Error::UndefinedMetric(_))
        ));
    }
}
