//! Similarity matrices, sequence smoothing along route diagonals, and place
//! prediction.
//!
//! Scores follow one convention everywhere: larger is a better match. Spike
//! counts satisfy this directly; distance-based scores are negated before
//! storage so a single argmax path serves every matcher.

use std::fmt;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};

/// Whether a matrix holds raw per-query scores or sequence-smoothed ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    Raw,
    Sequence(usize),
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Provenance::Raw => write!(f, "raw"),
            Provenance::Sequence(l) => write!(f, "sequence({l})"),
        }
    }
}

impl Provenance {
    fn parse(s: &str) -> Result<Provenance> {
        if s == "raw" {
            return Ok(Provenance::Raw);
        }
        if let Some(inner) = s.strip_prefix("sequence(").and_then(|r| r.strip_suffix(')')) {
            let l: usize = inner
                .parse()
                .map_err(|_| Error::invalid(format!("bad provenance '{s}'")))?;
            return Ok(Provenance::Sequence(l));
        }
        Err(Error::invalid(format!("bad provenance '{s}'")))
    }
}

/// Query x reference score matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityMatrix {
    scores: Vec<f64>,
    queries: usize,
    references: usize,
    pub provenance: Provenance,
}

impl SimilarityMatrix {
    pub fn new(
        scores: Vec<f64>,
        queries: usize,
        references: usize,
        provenance: Provenance,
    ) -> Result<SimilarityMatrix> {
        if scores.len() != queries * references {
            return Err(Error::invalid(format!(
                "matrix data length {} does not match {}x{}",
                scores.len(),
                queries,
                references
            )));
        }
        if let Some(v) = scores.iter().find(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("non-finite score {v}")));
        }
        Ok(SimilarityMatrix {
            scores,
            queries,
            references,
            provenance,
        })
    }

    /// Builds a matrix from one score row per query.
    pub fn from_rows(rows: Vec<Vec<f64>>, provenance: Provenance) -> Result<SimilarityMatrix> {
        let queries = rows.len();
        let references = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != references) {
            return Err(Error::invalid("ragged score rows"));
        }
        SimilarityMatrix::new(
            rows.into_iter().flatten().collect(),
            queries,
            references,
            provenance,
        )
    }

    pub fn queries(&self) -> usize {
        self.queries
    }

    pub fn references(&self) -> usize {
        self.references
    }

    pub fn get(&self, query: usize, reference: usize) -> f64 {
        self.scores[query * self.references + reference]
    }

    pub fn row(&self, query: usize) -> &[f64] {
        &self.scores[query * self.references..(query + 1) * self.references]
    }

    /// Reference indices of one row sorted by descending score, ties broken
    /// by lowest index.
    pub fn ranking(&self, query: usize) -> Vec<usize> {
        let row = self.row(query);
        let mut order: Vec<usize> = (0..self.references).collect();
        order.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        order
    }

    /// Export format: `# Q,R,provenance` then one CSV row per query.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# {},{},{}", self.queries, self.references, self.provenance);
        for q in 0..self.queries {
            let row: Vec<String> = self.row(q).iter().map(|v| v.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(","));
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        Ok(())
    }

    pub fn from_csv(text: &str) -> Result<SimilarityMatrix> {
        let mut lines = text.lines();
        let header = lines
            .next()
            .ok_or_else(|| Error::parse(1, "empty similarity matrix"))?;
        let rest = header
            .strip_prefix('#')
            .ok_or_else(|| Error::parse(1, "expected '# Q,R,provenance' header"))?
            .trim();
        let parts: Vec<&str> = rest.splitn(3, ',').collect();
        if parts.len() != 3 {
            return Err(Error::parse(1, "expected '# Q,R,provenance' header"));
        }
        let queries: usize = parts[0]
            .parse()
            .map_err(|_| Error::parse(1, "bad query count"))?;
        let references: usize = parts[1]
            .parse()
            .map_err(|_| Error::parse(1, "bad reference count"))?;
        let provenance = Provenance::parse(parts[2])?;

        let mut scores = Vec::with_capacity(queries * references);
        for (idx, line) in lines.enumerate() {
            if line.is_empty() {
                continue;
            }
            for tok in line.split(',') {
                let v: f64 = tok
                    .parse()
                    .map_err(|_| Error::parse(idx + 2, format!("bad score '{tok}'")))?;
                scores.push(v);
            }
        }
        SimilarityMatrix::new(scores, queries, references, provenance)
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<SimilarityMatrix> {
        let text = std::fs::read_to_string(path)?;
        SimilarityMatrix::from_csv(&text)
    }
}

/// Groups per-window score vectors into non-overlapping runs of `bins` and
/// emits the element-wise mean of each complete run. A partial trailing run
/// is deferred (no output for it yet).
#[derive(Debug, Clone)]
pub struct WindowAccumulator {
    bins: usize,
    pending: Vec<Vec<f64>>,
}

impl WindowAccumulator {
    pub fn new(bins: usize) -> Result<WindowAccumulator> {
        if bins == 0 {
            return Err(Error::invalid("bins must be at least 1"));
        }
        Ok(WindowAccumulator {
            bins,
            pending: Vec::new(),
        })
    }

    /// Feeds one score vector; returns the averaged vector once `bins`
    /// vectors have been gathered.
    pub fn push(&mut self, scores: Vec<f64>) -> Result<Option<Vec<f64>>> {
        if let Some(first) = self.pending.first() {
            if first.len() != scores.len() {
                return Err(Error::invalid("score vector length changed mid-stream"));
            }
        }
        self.pending.push(scores);
        if self.pending.len() < self.bins {
            return Ok(None);
        }
        let n = self.pending[0].len();
        let mut mean = vec![0.0; n];
        for v in &self.pending {
            for (m, x) in mean.iter_mut().zip(v) {
                *m += x;
            }
        }
        for m in &mut mean {
            *m /= self.bins as f64;
        }
        self.pending.clear();
        Ok(Some(mean))
    }
}

/// Averages consecutive groups of `bins` score vectors; a trailing partial
/// group is dropped.
pub fn accumulate_windows(vectors: &[Vec<f64>], bins: usize) -> Result<Vec<Vec<f64>>> {
    let mut acc = WindowAccumulator::new(bins)?;
    let mut out = Vec::new();
    for v in vectors {
        if let Some(mean) = acc.push(v.clone())? {
            out.push(mean);
        }
    }
    Ok(out)
}

/// Smooths a score matrix along its diagonals: entry (i, j) becomes the mean
/// of the scores at `(i + d - L/2, j + d - L/2)` for `d` in `0..L`, dropping
/// out-of-range terms and dividing by the number that remain. A centered
/// window keeps edge queries unpenalized. `L = 1` is the identity.
pub fn sequence_convolve(m: &SimilarityMatrix, length: usize) -> Result<SimilarityMatrix> {
    let q = m.queries();
    let r = m.references();
    if length == 0 {
        return Err(Error::invalid("sequence length must be at least 1"));
    }
    if length > q.min(r) {
        return Err(Error::invalid(format!(
            "sequence length {length} exceeds matrix {q}x{r}"
        )));
    }
    let half = (length / 2) as isize;
    let mut scores = Vec::with_capacity(q * r);
    for i in 0..q as isize {
        for j in 0..r as isize {
            let mut sum = 0.0;
            let mut count = 0usize;
            for d in 0..length as isize {
                let di = i + d - half;
                let dj = j + d - half;
                if di >= 0 && di < q as isize && dj >= 0 && dj < r as isize {
                    sum += m.get(di as usize, dj as usize);
                    count += 1;
                }
            }
            scores.push(sum / count as f64);
        }
    }
    SimilarityMatrix::new(scores, q, r, Provenance::Sequence(length))
}

/// Per-query prediction: the best-scoring reference and the full ranking.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchResult {
    pub query_index: usize,
    pub predicted_reference: usize,
    pub score: f64,
    /// References sorted by descending score, ties to the lowest index.
    pub ranking: Vec<usize>,
}

/// Argmax per row; ties resolve to the lowest reference index for
/// determinism.
pub fn match_places(m: &SimilarityMatrix) -> Result<Vec<MatchResult>> {
    if m.queries() == 0 || m.references() == 0 {
        return Err(Error::invalid("cannot match against an empty matrix"));
    }
    Ok((0..m.queries())
        .map(|q| {
            let ranking = m.ranking(q);
            let predicted = ranking[0];
            MatchResult {
                query_index: q,
                predicted_reference: predicted,
                score: m.get(q, predicted),
                ranking,
            }
        })
        .collect())
}

/// Renders match results as CSV: `query,predicted_reference,score`.
pub fn matches_to_csv(matches: &[MatchResult]) -> String {
    let mut out = String::from("# query,predicted_reference,score\n");
    for m in matches {
        let _ = writeln!(out, "{},{},{}", m.query_index, m.predicted_reference, m.score);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::rngs::StdRng;
    use rand::{Rng, SeedableRng};

    fn random_matrix(seed: u64, q: usize, r: usize) -> SimilarityMatrix {
        let mut rng = StdRng::seed_from_u64(seed);
        let scores = (0..q * r).map(|_| rng.random::<f64>()).collect();
        SimilarityMatrix::new(scores, q, r, Provenance::Raw).unwrap()
    }

    /// Brute-force O(QRL) diagonal-mean oracle.
    fn convolve_oracle(m: &SimilarityMatrix, length: usize) -> Vec<f64> {
        let half = (length / 2) as isize;
        let mut out = Vec::new();
        for i in 0..m.queries() as isize {
            for j in 0..m.references() as isize {
                let mut sum = 0.0;
                let mut n = 0usize;
                for d in 0..length as isize {
                    let (a, b) = (i + d - half, j + d - half);
                    if a >= 0 && b >= 0 && (a as usize) < m.queries() && (b as usize) < m.references()
                    {
                        sum += m.get(a as usize, b as usize);
                        n += 1;
                    }
                }
                out.push(sum / n as f64);
            }
        }
        out
    }

    #[test]
    fn accumulate_identity_with_one_bin() {
        let vs = vec![vec![1.0, 2.0], vec![3.0, 4.0]];
        let out = accumulate_windows(&vs, 1).unwrap();
        assert_eq!(out, vs);
    }

    #[test]
    fn accumulate_mean_of_equal_vectors() {
        let v = vec![5.0, 7.0, 9.0];
        let vs = vec![v.clone(), v.clone(), v.clone(), v.clone()];
        let out = accumulate_windows(&vs, 4).unwrap();
        assert_eq!(out, vec![v]);
    }

    #[test]
    fn accumulate_matches_scalar_recomputation() {
        let mut rng = StdRng::seed_from_u64(200);
        let vs: Vec<Vec<f64>> = (0..4)
            .map(|_| (0..6).map(|_| rng.random::<f64>()).collect())
            .collect();
        let out = accumulate_windows(&vs, 4).unwrap();
        assert_eq!(out.len(), 1);
        for k in 0..6 {
            let mean = (vs[0][k] + vs[1][k] + vs[2][k] + vs[3][k]) / 4.0;
            assert!((out[0][k] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn accumulate_defers_partial_group() {
        let mut acc = WindowAccumulator::new(4).unwrap();
        assert!(acc.push(vec![1.0]).unwrap().is_none());
        assert!(acc.push(vec![2.0]).unwrap().is_none());
        assert!(acc.push(vec![3.0]).unwrap().is_none());
        assert_eq!(acc.push(vec![4.0]).unwrap(), Some(vec![2.5]));
        // Partial trailing group is dropped by the batch helper.
        let vs = vec![vec![1.0], vec![2.0], vec![3.0], vec![4.0], vec![9.0]];
        assert_eq!(accumulate_windows(&vs, 4).unwrap(), vec![vec![2.5]]);
    }

    #[test]
    fn convolve_length_one_is_identity() {
        let m = random_matrix(201, 8, 12);
        let c = sequence_convolve(&m, 1).unwrap();
        assert_eq!(c.row(3), m.row(3));
        for q in 0..8 {
            for r in 0..12 {
                assert_eq!(c.get(q, r), m.get(q, r));
            }
        }
        assert_eq!(c.provenance, Provenance::Sequence(1));
    }

    #[test]
    fn convolve_identity_matrix_keeps_diagonal_at_one() {
        let mut scores = vec![0.0; 16];
        for i in 0..4 {
            scores[i * 4 + i] = 1.0;
        }
        let m = SimilarityMatrix::new(scores, 4, 4, Provenance::Raw).unwrap();
        let c = sequence_convolve(&m, 2).unwrap();
        let oracle = convolve_oracle(&m, 2);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(c.get(i, j), oracle[i * 4 + j]);
                if i == j {
                    assert_eq!(c.get(i, j), 1.0);
                } else {
                    assert!(c.get(i, j) < 1.0);
                }
            }
        }
    }

    #[test]
    fn convolve_matches_brute_force_oracle() {
        for (seed, l) in [(202u64, 4usize), (203, 2), (204, 8)] {
            let m = random_matrix(seed, 10, 10);
            let c = sequence_convolve(&m, l).unwrap();
            let oracle = convolve_oracle(&m, l);
            for q in 0..10 {
                for r in 0..10 {
                    assert_eq!(c.get(q, r), oracle[q * 10 + r], "seed {seed} L={l}");
                }
            }
        }
    }

    #[test]
    fn convolve_rejects_oversized_length() {
        let m = random_matrix(205, 4, 6);
        assert!(sequence_convolve(&m, 5).is_err());
        assert!(sequence_convolve(&m, 0).is_err());
    }

    #[test]
    fn convolve_commutes_with_positive_affine_maps() {
        let m = random_matrix(206, 9, 9);
        let (a, b) = (2.5, -1.25);
        let scaled_scores: Vec<f64> = (0..81).map(|k| a * m.get(k / 9, k % 9) + b).collect();
        let scaled = SimilarityMatrix::new(scaled_scores, 9, 9, Provenance::Raw).unwrap();
        let c = sequence_convolve(&m, 4).unwrap();
        let cs = sequence_convolve(&scaled, 4).unwrap();
        for q in 0..9 {
            for r in 0..9 {
                assert!((cs.get(q, r) - (a * c.get(q, r) + b)).abs() < 1e-9);
            }
        }
        // Argmax is invariant under the positive affine map.
        let p1 = match_places(&c).unwrap();
        let p2 = match_places(&cs).unwrap();
        for (x, y) in p1.iter().zip(&p2) {
            assert_eq!(x.predicted_reference, y.predicted_reference);
        }
    }

    #[test]
    fn match_single_column() {
        let m = SimilarityMatrix::new(vec![0.3, 0.9, 0.1], 3, 1, Provenance::Raw).unwrap();
        for r in match_places(&m).unwrap() {
            assert_eq!(r.predicted_reference, 0);
        }
    }

    #[test]
    fn match_breaks_ties_to_lowest_index() {
        let m = SimilarityMatrix::new(vec![0.1, 0.9, 0.9], 1, 3, Provenance::Raw).unwrap();
        let r = match_places(&m).unwrap();
        assert_eq!(r[0].predicted_reference, 1);
        assert_eq!(r[0].ranking, vec![1, 2, 0]);
    }

    #[test]
    fn match_matches_linear_scan_oracle() {
        let m = random_matrix(207, 50, 50);
        let results = match_places(&m).unwrap();
        for (q, res) in results.iter().enumerate() {
            let mut best = 0usize;
            for r in 1..50 {
                if m.get(q, r) > m.get(q, best) {
                    best = r;
                }
            }
            assert_eq!(res.predicted_reference, best);
            assert_eq!(res.score, m.get(q, best));
        }
    }

    #[test]
    fn match_is_invariant_to_row_constant_shift() {
        let m = random_matrix(208, 12, 7);
        let mut shifted_scores = Vec::new();
        for q in 0..12 {
            let shift = q as f64 * 3.7 - 11.0;
            shifted_scores.extend(m.row(q).iter().map(|v| v + shift));
        }
        let shifted = SimilarityMatrix::new(shifted_scores, 12, 7, Provenance::Raw).unwrap();
        let a = match_places(&m).unwrap();
        let b = match_places(&shifted).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.predicted_reference, y.predicted_reference);
            assert_eq!(x.ranking, y.ranking);
        }
    }

    #[test]
    fn block_margin_predictions_are_exact_for_any_window_within_block() {
        // Ground-truth-aligned diagonal with margin 0.2 over the off-diagonal.
        let q = 12;
        let mut scores = vec![0.4; q * q];
        for i in 0..q {
            scores[i * q + i] = 0.6;
        }
        let m = SimilarityMatrix::new(scores, q, q, Provenance::Raw).unwrap();
        for l in [1usize, 2, 4, 6] {
            let c = sequence_convolve(&m, l).unwrap();
            for r in match_places(&c).unwrap() {
                assert_eq!(r.predicted_reference, r.query_index, "L={l}");
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let m = random_matrix(209, 5, 8);
        let c = sequence_convolve(&m, 4).unwrap();
        let parsed = SimilarityMatrix::from_csv(&c.to_csv()).unwrap();
        assert_eq!(parsed, c);
        assert_eq!(parsed.provenance, Provenance::Sequence(4));
    }
}
