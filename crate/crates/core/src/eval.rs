//! Localization metrics: Recall@N, precision-recall curves, and AUC, all
//! against tolerance-aware ground truth.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::matching::SimilarityMatrix;

/// Query-to-reference correspondence with a symmetric place tolerance: a
/// predicted reference within `tolerance` places of the true one counts as
/// correct.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    map: BTreeMap<usize, usize>,
    pub tolerance: usize,
}

impl GroundTruth {
    pub fn new(map: BTreeMap<usize, usize>, tolerance: usize) -> GroundTruth {
        GroundTruth { map, tolerance }
    }

    /// The aligned-traverse default: query `q` corresponds to reference `q`.
    pub fn diagonal(queries: usize, tolerance: usize) -> GroundTruth {
        GroundTruth {
            map: (0..queries).map(|q| (q, q)).collect(),
            tolerance,
        }
    }

    /// Parses `query_index,reference_index` lines; `#` lines are comments.
    pub fn from_text(text: &str, tolerance: usize) -> Result<GroundTruth> {
        let mut map = BTreeMap::new();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (q, r) = line.split_once(',').ok_or_else(|| {
                Error::parse(idx + 1, "expected 'query_index,reference_index'")
            })?;
            let q: usize = q
                .trim()
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad query index '{q}'")))?;
            let r: usize = r
                .trim()
                .parse()
                .map_err(|_| Error::parse(idx + 1, format!("bad reference index '{r}'")))?;
            map.insert(q, r);
        }
        Ok(GroundTruth { map, tolerance })
    }

    pub fn read_file(path: impl AsRef<Path>, tolerance: usize) -> Result<GroundTruth> {
        let text = std::fs::read_to_string(path)?;
        GroundTruth::from_text(&text, tolerance)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn reference_for(&self, query: usize) -> Option<usize> {
        self.map.get(&query).copied()
    }

    /// True reference for `query`, or an error when the query is unmapped.
    fn require(&self, query: usize) -> Result<usize> {
        self.reference_for(query)
            .ok_or_else(|| Error::invalid(format!("query {query} missing from ground truth")))
    }

    /// Whether a predicted reference is within tolerance of the true one.
    pub fn accepts(&self, true_reference: usize, predicted: usize) -> bool {
        true_reference.abs_diff(predicted) <= self.tolerance
    }
}

/// Fraction of queries whose top-N ranked references contain one within
/// tolerance of the true match, for each requested N.
pub fn recall_at_n(
    m: &SimilarityMatrix,
    gt: &GroundTruth,
    ns: &[usize],
) -> Result<Vec<(usize, f64)>> {
    if m.queries() == 0 || m.references() == 0 {
        return Err(Error::invalid("empty similarity matrix"));
    }
    for &n in ns {
        if n == 0 || n > m.references() {
            return Err(Error::invalid(format!(
                "N must be in 1..={}, got {n}",
                m.references()
            )));
        }
    }
    let rankings: Vec<Vec<usize>> = (0..m.queries()).map(|q| m.ranking(q)).collect();
    let truths: Vec<usize> = (0..m.queries())
        .map(|q| gt.require(q))
        .collect::<Result<_>>()?;

    let mut out = Vec::with_capacity(ns.len());
    for &n in ns {
        let hits = rankings
            .iter()
            .zip(&truths)
            .filter(|(ranking, &truth)| ranking[..n].iter().any(|&r| gt.accepts(truth, r)))
            .count();
        out.push((n, hits as f64 / m.queries() as f64));
    }
    Ok(out)
}

/// A precision-recall curve swept over score thresholds.
///
/// Points are `(recall, precision)` ordered from the highest threshold to
/// the lowest, so recall is non-decreasing along the curve. The first point
/// is pinned at `(0, 1)` (no predictions yet) with threshold infinity.
#[derive(Debug, Clone, PartialEq)]
pub struct PrCurve {
    pub points: Vec<(f64, f64)>,
    pub thresholds: Vec<f64>,
}

impl PrCurve {
    /// Area under the curve by the trapezoid rule over recall.
    pub fn auc(&self) -> Result<f64> {
        auc(&self.points)
    }

    /// Export format: `threshold,precision,recall` per line.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("# threshold,precision,recall\n");
        for (t, (recall, precision)) in self.thresholds.iter().zip(&self.points) {
            let _ = writeln!(out, "{t},{precision},{recall}");
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }
}

/// Sweeps `num_thresholds` evenly spaced cutoffs across the observed range
/// of per-query best scores. A query predicts when its best score reaches
/// the cutoff; the prediction is a true positive when the best-scoring
/// reference lies within tolerance of the true match. Precision is
/// TP/(TP+FP); recall is TP over the number of ground-truth positives.
pub fn pr_curve(m: &SimilarityMatrix, gt: &GroundTruth, num_thresholds: usize) -> Result<PrCurve> {
    if num_thresholds < 2 {
        return Err(Error::invalid("num_thresholds must be at least 2"));
    }
    if m.queries() == 0 || m.references() == 0 {
        return Err(Error::invalid("empty similarity matrix"));
    }
    // Best prediction per query.
    let mut best: Vec<(f64, bool)> = Vec::with_capacity(m.queries());
    for q in 0..m.queries() {
        let truth = gt.require(q)?;
        let predicted = m.ranking(q)[0];
        best.push((m.get(q, predicted), gt.accepts(truth, predicted)));
    }
    let gtp = m.queries() as f64;

    let lo = best.iter().map(|(s, _)| *s).fold(f64::INFINITY, f64::min);
    let hi = best.iter().map(|(s, _)| *s).fold(f64::NEG_INFINITY, f64::max);

    let mut thresholds = vec![f64::INFINITY];
    let mut points = vec![(0.0, 1.0)];
    let cutoffs: Vec<f64> = if hi == lo {
        vec![hi]
    } else {
        // Descending so recall grows along the curve.
        (0..num_thresholds)
            .map(|k| hi - (hi - lo) * k as f64 / (num_thresholds - 1) as f64)
            .collect()
    };
    for cutoff in cutoffs {
        let mut tp = 0usize;
        let mut fp = 0usize;
        for &(score, correct) in &best {
            if score >= cutoff {
                if correct {
                    tp += 1;
                } else {
                    fp += 1;
                }
            }
        }
        let predictions = tp + fp;
        let precision = if predictions == 0 {
            1.0
        } else {
            tp as f64 / predictions as f64
        };
        let recall = tp as f64 / gtp;
        thresholds.push(cutoff);
        points.push((recall, precision));
    }
    Ok(PrCurve { points, thresholds })
}

/// Trapezoidal integral of `(x, y)` points over `x`. The points must be
/// sorted by non-decreasing x.
pub fn auc(points: &[(f64, f64)]) -> Result<f64> {
    if points.len() < 2 {
        return Err(Error::invalid("auc needs at least 2 points"));
    }
    let mut total = 0.0;
    for pair in points.windows(2) {
        let (x0, y0) = pair[0];
        let (x1, y1) = pair[1];
        if x1 < x0 {
            return Err(Error::invalid("auc input points are not sorted by x"));
        }
        total += (x1 - x0) * (y0 + y1) / 2.0;
    }
    Ok(total)
}

/// Export format for Recall@N values: `N,value` per line.
pub fn recall_to_csv(values: &[(usize, f64)]) -> String {
    let mut out = String::from("# N,value\n");
    for (n, v) in values {
        let _ = writeln!(out, "{n},{v}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matching::Provenance;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn diagonal_matrix(n: usize) -> SimilarityMatrix {
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            scores[i * n + i] = 1.0;
        }
        SimilarityMatrix::new(scores, n, n, Provenance::Raw).unwrap()
    }

    fn random_matrix(seed: u64, q: usize, r: usize) -> SimilarityMatrix {
        let mut rng = StdRng::seed_from_u64(seed);
        let scores = (0..q * r).map(|_| rng.random::<f64>()).collect();
        SimilarityMatrix::new(scores, q, r, Provenance::Raw).unwrap()
    }

    #[test]
    fn perfect_diagonal_recall_is_one() {
        let m = diagonal_matrix(10);
        let gt = GroundTruth::diagonal(10, 0);
        let r = recall_at_n(&m, &gt, &[1]).unwrap();
        assert_eq!(r, vec![(1, 1.0)]);
    }

    #[test]
    fn anti_diagonal_recall_matches_enumeration() {
        let n = 10;
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            scores[i * n + (n - 1 - i)] = 1.0;
        }
        let m = SimilarityMatrix::new(scores, n, n, Provenance::Raw).unwrap();
        let gt = GroundTruth::diagonal(n, 0);

        // Oracle: enumerate which queries can be correct at all.
        let expected = (0..n).filter(|&i| n - 1 - i == i).count() as f64 / n as f64;
        let r = recall_at_n(&m, &gt, &[1]).unwrap();
        assert_eq!(r[0].1, expected);
        assert_eq!(expected, 0.0); // even n has no center overlap
    }

    #[test]
    fn recall_at_full_n_is_one_when_matches_exist() {
        let m = random_matrix(400, 15, 15);
        let gt = GroundTruth::diagonal(15, 0);
        let r = recall_at_n(&m, &gt, &[15]).unwrap();
        assert_eq!(r[0].1, 1.0);
    }

    #[test]
    fn recall_rejects_bad_n_and_missing_queries() {
        let m = random_matrix(401, 5, 5);
        let gt = GroundTruth::diagonal(5, 0);
        assert!(recall_at_n(&m, &gt, &[0]).is_err());
        assert!(recall_at_n(&m, &gt, &[6]).is_err());
        let partial = GroundTruth::new([(0usize, 0usize)].into_iter().collect(), 0);
        assert!(recall_at_n(&m, &partial, &[1]).is_err());
    }

    #[test]
    fn recall_is_monotone_in_n_and_tolerance() {
        for seed in 0..20 {
            let q = 8 + (seed as usize % 5);
            let m = random_matrix(500 + seed, q, q);
            let mut last = 0.0;
            let ns: Vec<usize> = (1..=q).collect();
            let gt = GroundTruth::diagonal(q, 0);
            for (_, v) in recall_at_n(&m, &gt, &ns).unwrap() {
                assert!(v >= last);
                last = v;
            }
            let mut last_tol = 0.0;
            for tol in 0..4 {
                let gt = GroundTruth::diagonal(q, tol);
                let v = recall_at_n(&m, &gt, &[1]).unwrap()[0].1;
                assert!(v >= last_tol);
                last_tol = v;
            }
        }
    }

    #[test]
    fn relabeling_references_by_permutation_preserves_metrics() {
        let q = 9;
        let m = random_matrix(402, q, q);
        // Reverse permutation of reference indices.
        let mut permuted_scores = vec![0.0; q * q];
        for i in 0..q {
            for j in 0..q {
                permuted_scores[i * q + (q - 1 - j)] = m.get(i, j);
            }
        }
        let pm = SimilarityMatrix::new(permuted_scores, q, q, Provenance::Raw).unwrap();
        let gt = GroundTruth::diagonal(q, 0);
        let pgt = GroundTruth::new((0..q).map(|i| (i, q - 1 - i)).collect(), 0);

        let ns: Vec<usize> = (1..=q).collect();
        assert_eq!(
            recall_at_n(&m, &gt, &ns).unwrap(),
            recall_at_n(&pm, &pgt, &ns).unwrap()
        );
        let a = pr_curve(&m, &gt, 50).unwrap();
        let b = pr_curve(&pm, &pgt, 50).unwrap();
        assert_eq!(a.points, b.points);
    }

    #[test]
    fn pr_perfect_diagonal_has_unit_precision_and_auc() {
        let m = diagonal_matrix(12);
        let gt = GroundTruth::diagonal(12, 0);
        let curve = pr_curve(&m, &gt, 100).unwrap();
        assert_eq!(curve.points[0], (0.0, 1.0));
        assert_eq!(curve.thresholds[0], f64::INFINITY);
        for &(_, precision) in &curve.points {
            assert_eq!(precision, 1.0);
        }
        assert_eq!(curve.points.last().unwrap().0, 1.0);
        assert!((curve.auc().unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn pr_all_wrong_has_zero_precision_once_predicting() {
        let n = 6;
        let mut scores = vec![0.0; n * n];
        for i in 0..n {
            scores[i * n + (i + 3) % n] = 1.0;
        }
        let m = SimilarityMatrix::new(scores, n, n, Provenance::Raw).unwrap();
        let gt = GroundTruth::diagonal(n, 0);
        let curve = pr_curve(&m, &gt, 20).unwrap();
        for (k, &(recall, precision)) in curve.points.iter().enumerate() {
            if k == 0 {
                assert_eq!((recall, precision), (0.0, 1.0));
            } else {
                assert_eq!(precision, 0.0);
                assert_eq!(recall, 0.0);
            }
        }
    }

    #[test]
    fn pr_recall_is_non_decreasing_along_thresholds() {
        let m = random_matrix(403, 25, 25);
        let gt = GroundTruth::diagonal(25, 2);
        let curve = pr_curve(&m, &gt, 100).unwrap();
        let mut last = -1.0;
        for &(recall, _) in &curve.points {
            assert!(recall >= last);
            last = recall;
        }
    }

    #[test]
    fn pr_matches_exhaustive_sweep_oracle() {
        let m = random_matrix(404, 20, 20);
        let gt = GroundTruth::diagonal(20, 1);
        let curve = pr_curve(&m, &gt, 100).unwrap();

        // Oracle: recompute TP/FP at every threshold by scanning all
        // queries' best predictions.
        let mut best: Vec<(f64, bool)> = Vec::new();
        for q in 0..20 {
            let mut arg = 0usize;
            for r in 1..20 {
                if m.get(q, r) > m.get(q, arg) {
                    arg = r;
                }
            }
            best.push((m.get(q, arg), arg.abs_diff(q) <= 1));
        }
        for (k, &threshold) in curve.thresholds.iter().enumerate().skip(1) {
            let tp = best.iter().filter(|(s, c)| *s >= threshold && *c).count();
            let fp = best.iter().filter(|(s, c)| *s >= threshold && !*c).count();
            let precision = if tp + fp == 0 {
                1.0
            } else {
                tp as f64 / (tp + fp) as f64
            };
            let recall = tp as f64 / 20.0;
            assert_eq!(curve.points[k], (recall, precision), "threshold {threshold}");
        }
    }

    #[test]
    fn pr_degenerate_equal_scores_is_single_threshold() {
        let m = SimilarityMatrix::new(vec![0.5; 9], 3, 3, Provenance::Raw).unwrap();
        let gt = GroundTruth::diagonal(3, 0);
        let curve = pr_curve(&m, &gt, 100).unwrap();
        // (0,1) plus exactly one swept threshold.
        assert_eq!(curve.points.len(), 2);
        assert_eq!(curve.thresholds[1], 0.5);
    }

    #[test]
    fn auc_constant_precision_levels() {
        assert!((auc(&[(0.0, 1.0), (1.0, 1.0)]).unwrap() - 1.0).abs() < 1e-15);
        assert!((auc(&[(0.0, 0.5), (1.0, 0.5)]).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn auc_matches_hand_trapezoid() {
        let pts = vec![(0.0, 1.0), (0.25, 0.8), (0.5, 0.9), (1.0, 0.4)];
        let expected = 0.25 * (1.0 + 0.8) / 2.0 + 0.25 * (0.8 + 0.9) / 2.0 + 0.5 * (0.9 + 0.4) / 2.0;
        assert!((auc(&pts).unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn auc_rejects_unsorted_points() {
        assert!(auc(&[(0.5, 1.0), (0.2, 1.0)]).is_err());
        assert!(auc(&[(0.5, 1.0)]).is_err());
    }

    #[test]
    fn ground_truth_file_round_trip() {
        let text = "# query,reference\n0,0\n1,2\n5,4\n";
        let gt = GroundTruth::from_text(text, 3).unwrap();
        assert_eq!(gt.len(), 3);
        assert_eq!(gt.reference_for(5), Some(4));
        assert_eq!(gt.tolerance, 3);
        assert!(gt.accepts(4, 7));
        assert!(!gt.accepts(4, 8));
    }
}
