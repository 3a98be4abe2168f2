//! Sum-of-absolute-differences reference matcher over the same normalized,
//! downsampled frames the network consumes, keeping storage and accuracy
//! comparisons meaningful.

use crate::error::{Error, Result};
use crate::framegen::NormalizedFrame;
use crate::matching::{Provenance, SimilarityMatrix};

/// An ordered set of uniformly shaped frames, one per place.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameDatabase {
    frames: Vec<NormalizedFrame>,
}

impl FrameDatabase {
    pub fn new(frames: Vec<NormalizedFrame>) -> Result<FrameDatabase> {
        if frames.is_empty() {
            return Err(Error::invalid("frame database cannot be empty"));
        }
        let (h, w) = (frames[0].height(), frames[0].width());
        if frames.iter().any(|f| f.height() != h || f.width() != w) {
            return Err(Error::invalid("frames in a database must share one shape"));
        }
        Ok(FrameDatabase { frames })
    }

    pub fn frames(&self) -> &[NormalizedFrame] {
        &self.frames
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Sum of absolute pixel differences between two same-shaped frames.
pub fn sad_distance(a: &NormalizedFrame, b: &NormalizedFrame) -> Result<f64> {
    if a.height() != b.height() || a.width() != b.width() {
        return Err(Error::invalid(format!(
            "frame shapes differ: {}x{} vs {}x{}",
            a.height(),
            a.width(),
            b.height(),
            b.width()
        )));
    }
    Ok(a.pixels()
        .iter()
        .zip(b.pixels())
        .map(|(x, y)| (x - y).abs())
        .sum())
}

/// Scores every query against every reference as the negated SAD distance,
/// so larger stays better and the matrix feeds the same sequence-matching
/// and argmax path as network scores.
pub fn sad_matrix(refs: &FrameDatabase, queries: &FrameDatabase) -> Result<SimilarityMatrix> {
    let mut scores = Vec::with_capacity(queries.len() * refs.len());
    for q in queries.frames() {
        for r in refs.frames() {
            scores.push(-sad_distance(q, r)?);
        }
    }
    SimilarityMatrix::new(scores, queries.len(), refs.len(), Provenance::Raw)
}
