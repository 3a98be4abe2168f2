//! Neuromorphic visual place recognition with a compact three-layer spiking
//! network trained on event-camera traverses.
//!
//! The pipeline runs in stages:
//!
//! 1. [`events`] parses timestamped DVS event streams and slices them by
//!    region of interest and time window.
//! 2. [`framegen`] bins event windows into per-pixel count frames, downsamples
//!    them via pixel selection, and normalizes intensities to `[0, 1]`.
//! 3. [`snn`] defines the input/feature/output network, integrate-and-fire
//!    dynamics, and rate-coded spike simulation for inference.
//! 4. [`training`] fits the network: unsupervised STDP for the input-to-feature
//!    weights, a supervised delta rule for the feature-to-output weights.
//! 5. [`matching`] turns per-window output spike counts into similarity
//!    matrices, smooths them along route diagonals, and predicts places.
//! 6. [`baseline`] provides the sum-of-absolute-differences reference matcher.
//! 7. [`eval`] computes Recall@N, precision-recall curves, and AUC against
//!    tolerance-aware ground truth.
//!
//! All randomized operations are seeded and fully reproducible.

pub mod baseline;
pub mod error;
pub mod eval;
pub mod events;
pub mod framegen;
pub mod matching;
pub mod persist;
pub mod snn;
pub mod training;

pub use error::{Error, Result};
