//! Network training: unsupervised STDP for the input-to-feature weights and
//! a supervised delta rule for the feature-to-output weights.
//!
//! Both rules share the same scalar form applied per (pre, post) pair; the
//! same delta is added to the excitatory and inhibitory entries of a
//! connection independently, each clamped to the layer's magnitude bound.
//! Sign flips are permitted. Training is a pure function of the data,
//! hyperparameters, and seed.

use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::SeedableRng;

use crate::error::{Error, Result};
use crate::framegen::NormalizedFrame;
use crate::snn::{forward_abstract, NetworkModel};

/// Epoch count, initial learning rate, and presentation order for one layer.
///
/// The learning rate anneals linearly: epoch `e` of `epochs` runs at
/// `eta_init * (1 - e / epochs)`, which stays positive throughout.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingSchedule {
    pub epochs: usize,
    pub eta_init: f64,
    /// When set, frame presentation order is reshuffled each epoch from this
    /// seed. Default is dataset order, which keeps training bit-reproducible
    /// without any RNG involvement.
    pub shuffle_seed: Option<u64>,
}

impl TrainingSchedule {
    pub fn new(epochs: usize, eta_init: f64) -> TrainingSchedule {
        TrainingSchedule {
            epochs,
            eta_init,
            shuffle_seed: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::invalid("schedule needs at least one epoch"));
        }
        // Zero is the degenerate fixed point (no learning); negative rates
        // would invert both rules.
        if self.eta_init < 0.0 {
            return Err(Error::invalid("eta_init must be non-negative"));
        }
        Ok(())
    }

    /// Annealed learning rate for a 0-based epoch index.
    pub fn eta_at(&self, epoch: usize) -> f64 {
        self.eta_init * (1.0 - epoch as f64 / self.epochs as f64)
    }
}

/// Which layer an epoch log line belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Layer {
    Feature,
    Output,
}

impl Layer {
    pub fn as_str(self) -> &'static str {
        match self {
            Layer::Feature => "feature",
            Layer::Output => "output",
        }
    }
}

/// One training-log record: `epoch,layer,eta,mean_abs_delta`.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochStats {
    pub epoch: usize,
    pub layer: Layer,
    pub eta: f64,
    pub mean_abs_delta: f64,
}

/// Renders epoch records in the log format, one line per epoch.
pub fn format_training_log(stats: &[EpochStats]) -> String {
    let mut out = String::new();
    for s in stats {
        out.push_str(&format!(
            "{},{},{},{}\n",
            s.epoch,
            s.layer.as_str(),
            s.eta,
            s.mean_abs_delta
        ));
    }
    out
}

/// STDP weight change for one connection:
/// `(eta / f_post) * step(x_pre) * step(x_post) * (0.5 - x_post)`
/// with `step` the Heaviside function and `step(0) = 0`.
///
/// Active pairs are pulled toward the 0.5 set point; either side being
/// silent gates the update to zero.
pub fn stdp_delta(x_pre: f64, x_post: f64, eta: f64, f_post: f64) -> f64 {
    assert!(f_post > 0.0, "target firing rate must be positive");
    let gate = heaviside(x_pre) * heaviside(x_post);
    (eta / f_post) * gate * (0.5 - x_post)
}

/// Supervised delta-rule weight change for one connection:
/// `(eta / f_post) * x_pre * (x_force - x_post)`.
pub fn delta_rule(x_pre: f64, x_post: f64, x_force: f64, eta: f64, f_post: f64) -> f64 {
    assert!(f_post > 0.0, "target firing rate must be positive");
    (eta / f_post) * x_pre * (x_force - x_post)
}

fn heaviside(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        0.0
    }
}

/// Presentation order for one epoch.
fn epoch_order(n_frames: usize, epoch: usize, schedule: &TrainingSchedule) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n_frames).collect();
    if let Some(seed) = schedule.shuffle_seed {
        let mut rng = StdRng::seed_from_u64(seed.wrapping_add(epoch as u64));
        order.shuffle(&mut rng);
    }
    order
}

/// Trains the input-to-feature weights with STDP over the reference frames.
///
/// Every connected weight (excitatory and inhibitory entries independently)
/// receives [`stdp_delta`] per frame, with the input intensity as the
/// pre-synaptic state and the feature activation as the post-synaptic state.
/// Unconnected entries are untouched. Returns per-epoch log records.
#[allow(clippy::needless_range_loop)]
pub fn train_feature_layer(
    model: &mut NetworkModel,
    frames: &[NormalizedFrame],
    schedule: &TrainingSchedule,
) -> Result<Vec<EpochStats>> {
    schedule.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("cannot train on an empty frame set"));
    }
    if model.trained {
        return Err(Error::invalid("model is already trained"));
    }
    let n_in = model.n_in;
    let n_feat = model.n_feat;
    let mut stats = Vec::with_capacity(schedule.epochs);

    for epoch in 0..schedule.epochs {
        let eta = schedule.eta_at(epoch);
        let mut abs_delta_sum = 0.0;
        let mut updates = 0usize;
        for &fi in &epoch_order(frames.len(), epoch, schedule) {
            let frame = &frames[fi];
            let (x_feat, _) = forward_abstract(model, frame)?;
            let x_in = frame.pixels();
            for j in 0..n_feat {
                let f_j = model.f_feat[j];
                let x_j = x_feat[j];
                for i in 0..n_in {
                    let delta = stdp_delta(x_in[i], x_j, eta, f_j);
                    let applied = model.if_weights_mut().apply_delta(j, i, delta);
                    abs_delta_sum += delta.abs() * applied as f64;
                    updates += applied;
                }
            }
        }
        stats.push(EpochStats {
            epoch,
            layer: Layer::Feature,
            eta,
            mean_abs_delta: if updates == 0 {
                0.0
            } else {
                abs_delta_sum / updates as f64
            },
        });
    }
    Ok(stats)
}

/// Trains the feature-to-output weights with the supervised delta rule.
///
/// Per frame, the labeled output neuron's target is forced to `x_force` and
/// every other target is 0; each connected weight moves by [`delta_rule`]
/// with the feature activation as the pre-synaptic state. Marks the model
/// trained on success.
#[allow(clippy::needless_range_loop)]
pub fn train_output_layer(
    model: &mut NetworkModel,
    frames: &[NormalizedFrame],
    labels: &[usize],
    schedule: &TrainingSchedule,
    x_force: f64,
) -> Result<Vec<EpochStats>> {
    schedule.validate()?;
    if frames.is_empty() {
        return Err(Error::invalid("cannot train on an empty frame set"));
    }
    if frames.len() != labels.len() {
        return Err(Error::invalid(format!(
            "{} frames but {} labels",
            frames.len(),
            labels.len()
        )));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= model.n_out) {
        return Err(Error::invalid(format!(
            "place label {bad} outside the {} output neurons",
            model.n_out
        )));
    }
    let n_feat = model.n_feat;
    let n_out = model.n_out;
    let mut stats = Vec::with_capacity(schedule.epochs);

    for epoch in 0..schedule.epochs {
        let eta = schedule.eta_at(epoch);
        let mut abs_delta_sum = 0.0;
        let mut updates = 0usize;
        for &fi in &epoch_order(frames.len(), epoch, schedule) {
            let frame = &frames[fi];
            let (x_feat, x_out) = forward_abstract(model, frame)?;
            let label = labels[fi];
            for k in 0..n_out {
                let f_k = model.f_out[k];
                let target = if k == label { x_force } else { 0.0 };
                let x_k = x_out[k];
                for j in 0..n_feat {
                    let delta = delta_rule(x_feat[j], x_k, target, eta, f_k);
                    let applied = model.fo_weights_mut().apply_delta(k, j, delta);
                    abs_delta_sum += delta.abs() * applied as f64;
                    updates += applied;
                }
            }
        }
        stats.push(EpochStats {
            epoch,
            layer: Layer::Output,
            eta,
            mean_abs_delta: if updates == 0 {
                0.0
            } else {
                abs_delta_sum / updates as f64
            },
        });
    }
    model.set_trained();
    Ok(stats)
}
