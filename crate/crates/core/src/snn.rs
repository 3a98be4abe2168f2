//! The three-layer network: initialization from connection probabilities, the
//! abstract activation used during training, constant-leak integrate-and-fire
//! dynamics, and rate-coded spike simulation for inference.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use crate::error::{Error, Result};
use crate::framegen::NormalizedFrame;

/// Training hyperparameters. Defaults are the tuned production values.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperParams {
    /// Weight magnitude bound, input -> feature.
    pub theta_max_if: f64,
    /// Weight magnitude bound, feature -> output.
    pub theta_max_fo: f64,
    /// Initial STDP learning rate (input -> feature).
    pub eta_stdp_init: f64,
    /// Initial delta-rule learning rate (feature -> output).
    pub eta_itp_init: f64,
    /// Per-neuron target firing rate range, feature layer.
    pub f_range_if: (f64, f64),
    /// Per-neuron target firing rate range, output layer.
    pub f_range_fo: (f64, f64),
    /// Excitatory connection probability, input -> feature.
    pub p_exc_if: f64,
    /// Inhibitory connection probability, input -> feature.
    pub p_inh_if: f64,
    /// Excitatory connection probability, feature -> output.
    pub p_exc_fo: f64,
    /// Inhibitory connection probability, feature -> output.
    pub p_inh_fo: f64,
    /// Training epochs, input -> feature.
    pub epochs_if: usize,
    /// Training epochs, feature -> output.
    pub epochs_fo: usize,
}

impl Default for HyperParams {
    fn default() -> HyperParams {
        HyperParams {
            theta_max_if: 0.75,
            theta_max_fo: 0.5,
            eta_stdp_init: 0.01,
            eta_itp_init: 0.02,
            f_range_if: (0.4, 0.6),
            f_range_fo: (0.5, 0.5),
            p_exc_if: 0.35,
            p_inh_if: 0.75,
            p_exc_fo: 1.0,
            p_inh_fo: 1.0,
            epochs_if: 64,
            epochs_fo: 128,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        for (name, p) in [
            ("p_exc_if", self.p_exc_if),
            ("p_inh_if", self.p_inh_if),
            ("p_exc_fo", self.p_exc_fo),
            ("p_inh_fo", self.p_inh_fo),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(Error::invalid(format!("{name} must be in [0,1], got {p}")));
            }
        }
        if self.theta_max_if <= 0.0 || self.theta_max_fo <= 0.0 {
            return Err(Error::invalid("theta_max must be positive"));
        }
        for (name, (lo, hi)) in [("f_range_if", self.f_range_if), ("f_range_fo", self.f_range_fo)]
        {
            if !(lo > 0.0 && lo <= hi && hi <= 1.0) {
                return Err(Error::invalid(format!(
                    "{name} must satisfy 0 < min <= max <= 1, got [{lo}, {hi}]"
                )));
            }
        }
        if self.epochs_if == 0 || self.epochs_fo == 0 {
            return Err(Error::invalid("epoch counts must be at least 1"));
        }
        Ok(())
    }
}

/// Constant-leak integrate-and-fire parameters.
///
/// The membrane update per timestep is
/// `v' = v + (-v_leak + resistance * (i_syn + i_bias)) / tau`, spiking and
/// resetting to `v_reset` when `v' >= v_thresh`, then flooring at 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IafParams {
    /// Membrane time constant, in timesteps.
    pub tau: f64,
    /// Constant leak per step.
    pub v_leak: f64,
    /// Resistance scale matching current to potential units.
    pub resistance: f64,
    /// Constant bias current.
    pub i_bias: f64,
    pub v_thresh: f64,
    pub v_reset: f64,
}

impl Default for IafParams {
    fn default() -> IafParams {
        IafParams {
            tau: 1.0,
            v_leak: 0.0,
            resistance: 1.0,
            i_bias: 0.0,
            v_thresh: 1.0,
            v_reset: 0.0,
        }
    }
}

impl IafParams {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 {
            return Err(Error::invalid("tau must be positive"));
        }
        if self.v_thresh <= self.v_reset {
            return Err(Error::invalid("v_thresh must exceed v_reset"));
        }
        Ok(())
    }
}

/// One layer's signed weights: overlapping excitatory and inhibitory
/// matrices plus their connectivity masks.
///
/// Rows index post-synaptic neurons, columns pre-synaptic neurons, row-major.
/// Unconnected entries are exactly zero and are never updated; connected
/// entries stay within `[-theta_max, +theta_max]` under training updates.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerWeights {
    rows: usize,
    cols: usize,
    exc: Vec<f64>,
    inh: Vec<f64>,
    exc_mask: Vec<bool>,
    inh_mask: Vec<bool>,
    theta_max: f64,
}

impl LayerWeights {
    /// Draws connectivity and initial weights: each (post, pre) pair
    /// independently receives an excitatory weight with probability `p_exc`
    /// (uniform in `(0, theta_max]`) and, independently, an inhibitory weight
    /// with probability `p_inh` (uniform in `[-theta_max, 0)`).
    fn init(
        rows: usize,
        cols: usize,
        p_exc: f64,
        p_inh: f64,
        theta_max: f64,
        rng: &mut StdRng,
    ) -> LayerWeights {
        let n = rows * cols;
        let mut exc = vec![0.0; n];
        let mut exc_mask = vec![false; n];
        for k in 0..n {
            if rng.random::<f64>() < p_exc {
                exc_mask[k] = true;
                exc[k] = theta_max * (1.0 - rng.random::<f64>());
            }
        }
        let mut inh = vec![0.0; n];
        let mut inh_mask = vec![false; n];
        for k in 0..n {
            if rng.random::<f64>() < p_inh {
                inh_mask[k] = true;
                inh[k] = -theta_max * (1.0 - rng.random::<f64>());
            }
        }
        LayerWeights {
            rows,
            cols,
            exc,
            inh,
            exc_mask,
            inh_mask,
            theta_max,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn theta_max(&self) -> f64 {
        self.theta_max
    }

    pub fn exc(&self, post: usize, pre: usize) -> f64 {
        self.exc[post * self.cols + pre]
    }

    pub fn inh(&self, post: usize, pre: usize) -> f64 {
        self.inh[post * self.cols + pre]
    }

    pub fn exc_connected(&self, post: usize, pre: usize) -> bool {
        self.exc_mask[post * self.cols + pre]
    }

    pub fn inh_connected(&self, post: usize, pre: usize) -> bool {
        self.inh_mask[post * self.cols + pre]
    }

    /// Sum of the excitatory and inhibitory entries: the effective synaptic
    /// weight used by both the abstract forward pass and IAF inference.
    pub fn effective(&self, post: usize, pre: usize) -> f64 {
        let k = post * self.cols + pre;
        self.exc[k] + self.inh[k]
    }

    /// Row-major dense effective weight matrix.
    pub fn effective_matrix(&self) -> Vec<f64> {
        self.exc.iter().zip(&self.inh).map(|(e, i)| e + i).collect()
    }

    /// Synapse count: entries connected in either matrix.
    pub fn connected_count(&self) -> usize {
        self.exc_mask
            .iter()
            .zip(&self.inh_mask)
            .filter(|(e, i)| **e || **i)
            .count()
    }

    /// Adds `delta` to the excitatory and inhibitory entries of (post, pre)
    /// where connected, clamping each to the magnitude bound. Returns how
    /// many entries were updated (0, 1, or 2).
    pub(crate) fn apply_delta(&mut self, post: usize, pre: usize, delta: f64) -> usize {
        let k = post * self.cols + pre;
        let mut applied = 0;
        if self.exc_mask[k] {
            self.exc[k] = (self.exc[k] + delta).clamp(-self.theta_max, self.theta_max);
            applied += 1;
        }
        if self.inh_mask[k] {
            self.inh[k] = (self.inh[k] + delta).clamp(-self.theta_max, self.theta_max);
            applied += 1;
        }
        applied
    }

    #[cfg(test)]
    pub(crate) fn from_dense(
        rows: usize,
        cols: usize,
        exc: Vec<f64>,
        inh: Vec<f64>,
        theta_max: f64,
    ) -> LayerWeights {
        assert_eq!(exc.len(), rows * cols);
        assert_eq!(inh.len(), rows * cols);
        let exc_mask = exc.iter().map(|&w| w != 0.0).collect();
        let inh_mask = inh.iter().map(|&w| w != 0.0).collect();
        LayerWeights {
            rows,
            cols,
            exc,
            inh,
            exc_mask,
            inh_mask,
            theta_max,
        }
    }
}

/// The trainable three-layer network.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel {
    pub(crate) n_in: usize,
    pub(crate) n_feat: usize,
    pub(crate) n_out: usize,
    pub(crate) if_weights: LayerWeights,
    pub(crate) fo_weights: LayerWeights,
    /// Per-neuron target firing rates, feature layer.
    pub(crate) f_feat: Vec<f64>,
    /// Per-neuron target firing rates, output layer.
    pub(crate) f_out: Vec<f64>,
    pub hyper: HyperParams,
    pub iaf: IafParams,
    pub seed: u64,
    pub(crate) trained: bool,
}

/// Initializes a network from layer sizes and connection probabilities.
/// Fully reproducible: the same seed and sizes give identical matrices.
pub fn init_network(
    n_in: usize,
    n_feat: usize,
    n_out: usize,
    hyper: HyperParams,
    seed: u64,
) -> Result<NetworkModel> {
    if n_in == 0 || n_feat == 0 || n_out == 0 {
        return Err(Error::invalid("layer sizes must be at least 1"));
    }
    hyper.validate()?;
    let mut rng = StdRng::seed_from_u64(seed);
    let if_weights = LayerWeights::init(
        n_feat,
        n_in,
        hyper.p_exc_if,
        hyper.p_inh_if,
        hyper.theta_max_if,
        &mut rng,
    );
    let f_feat = draw_targets(n_feat, hyper.f_range_if, &mut rng);
    let fo_weights = LayerWeights::init(
        n_out,
        n_feat,
        hyper.p_exc_fo,
        hyper.p_inh_fo,
        hyper.theta_max_fo,
        &mut rng,
    );
    let f_out = draw_targets(n_out, hyper.f_range_fo, &mut rng);
    Ok(NetworkModel {
        n_in,
        n_feat,
        n_out,
        if_weights,
        fo_weights,
        f_feat,
        f_out,
        hyper,
        iaf: IafParams::default(),
        seed,
        trained: false,
    })
}

fn draw_targets(n: usize, range: (f64, f64), rng: &mut StdRng) -> Vec<f64> {
    (0..n)
        .map(|_| range.0 + (range.1 - range.0) * rng.random::<f64>())
        .collect()
}

impl NetworkModel {
    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_feat(&self) -> usize {
        self.n_feat
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    pub fn if_weights(&self) -> &LayerWeights {
        &self.if_weights
    }

    pub fn fo_weights(&self) -> &LayerWeights {
        &self.fo_weights
    }

    pub(crate) fn if_weights_mut(&mut self) -> &mut LayerWeights {
        &mut self.if_weights
    }

    pub(crate) fn fo_weights_mut(&mut self) -> &mut LayerWeights {
        &mut self.fo_weights
    }

    /// Target firing rates of the feature neurons.
    pub fn f_feat(&self) -> &[f64] {
        &self.f_feat
    }

    /// Target firing rates of the output neurons.
    pub fn f_out(&self) -> &[f64] {
        &self.f_out
    }

    pub fn trained(&self) -> bool {
        self.trained
    }

    pub(crate) fn set_trained(&mut self) {
        self.trained = true;
    }

    /// Synapse count: connections present in either the excitatory or the
    /// inhibitory matrix, summed over both layers. One synapse carries one
    /// effective weight at deployment.
    pub fn parameter_count(&self) -> usize {
        self.if_weights.connected_count() + self.fo_weights.connected_count()
    }

    /// Collapses to the inference-time representation (effective weights).
    pub fn deploy(&self) -> DeployedModel {
        DeployedModel {
            n_in: self.n_in,
            n_feat: self.n_feat,
            n_out: self.n_out,
            w_if: self.if_weights.effective_matrix(),
            w_fo: self.fo_weights.effective_matrix(),
            params: self.parameter_count(),
            hyper: self.hyper.clone(),
            iaf: self.iaf,
            seed: self.seed,
            trained: self.trained,
        }
    }
}

/// Inference-time model: one effective weight per synapse, row-major per
/// layer. Immutable; safe to share across concurrent inference calls.
#[derive(Debug, Clone, PartialEq)]
pub struct DeployedModel {
    n_in: usize,
    n_feat: usize,
    n_out: usize,
    w_if: Vec<f64>,
    w_fo: Vec<f64>,
    params: usize,
    pub hyper: HyperParams,
    pub iaf: IafParams,
    pub seed: u64,
    pub trained: bool,
}

impl DeployedModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        n_in: usize,
        n_feat: usize,
        n_out: usize,
        w_if: Vec<f64>,
        w_fo: Vec<f64>,
        params: usize,
        hyper: HyperParams,
        iaf: IafParams,
        seed: u64,
        trained: bool,
    ) -> Result<DeployedModel> {
        if n_in == 0 || n_feat == 0 || n_out == 0 {
            return Err(Error::invalid("layer sizes must be at least 1"));
        }
        if w_if.len() != n_feat * n_in || w_fo.len() != n_out * n_feat {
            return Err(Error::invalid("weight matrix shape mismatch"));
        }
        Ok(DeployedModel {
            n_in,
            n_feat,
            n_out,
            w_if,
            w_fo,
            params,
            hyper,
            iaf,
            seed,
            trained,
        })
    }

    pub fn n_in(&self) -> usize {
        self.n_in
    }

    pub fn n_feat(&self) -> usize {
        self.n_feat
    }

    pub fn n_out(&self) -> usize {
        self.n_out
    }

    /// Effective input -> feature weights, row-major (n_feat x n_in).
    pub fn w_if(&self) -> &[f64] {
        &self.w_if
    }

    /// Effective feature -> output weights, row-major (n_out x n_feat).
    pub fn w_fo(&self) -> &[f64] {
        &self.w_fo
    }

    pub fn parameter_count(&self) -> usize {
        self.params
    }
}

/// Abstract forward pass used during training: each layer is the effective
/// linear map clamped into `[0, 1]`, matching the value range of the
/// intensity-as-activity coding.
///
/// Returns `(feature_activations, output_activations)`.
pub fn forward_abstract(
    model: &NetworkModel,
    frame: &NormalizedFrame,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let x_in = frame.pixels();
    if x_in.len() != model.n_in {
        return Err(Error::invalid(format!(
            "frame has {} pixels but the network expects {}",
            x_in.len(),
            model.n_in
        )));
    }
    let x_feat = clamped_linear(&model.if_weights, x_in);
    let x_out = clamped_linear(&model.fo_weights, &x_feat);
    Ok((x_feat, x_out))
}

fn clamped_linear(weights: &LayerWeights, x: &[f64]) -> Vec<f64> {
    let mut out = Vec::with_capacity(weights.rows());
    for j in 0..weights.rows() {
        let mut acc = 0.0;
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                acc += weights.effective(j, i) * xi;
            }
        }
        out.push(acc.clamp(0.0, 1.0));
    }
    out
}

/// A boolean spike tensor over `t_steps` timesteps and `n_neurons` neurons.
#[derive(Debug, Clone, PartialEq)]
pub struct SpikeRaster {
    spikes: Vec<bool>,
    t_steps: usize,
    n_neurons: usize,
    /// Seconds represented by one timestep.
    pub dt: f64,
}

impl SpikeRaster {
    pub fn new(spikes: Vec<bool>, t_steps: usize, n_neurons: usize, dt: f64) -> Result<SpikeRaster> {
        if spikes.len() != t_steps * n_neurons {
            return Err(Error::invalid("raster shape mismatch"));
        }
        Ok(SpikeRaster {
            spikes,
            t_steps,
            n_neurons,
            dt,
        })
    }

    pub fn t_steps(&self) -> usize {
        self.t_steps
    }

    pub fn n_neurons(&self) -> usize {
        self.n_neurons
    }

    pub fn spike(&self, t: usize, neuron: usize) -> bool {
        self.spikes[t * self.n_neurons + neuron]
    }

    /// Total spikes per neuron over the raster duration.
    pub fn counts(&self) -> Vec<u32> {
        let mut counts = vec![0u32; self.n_neurons];
        for t in 0..self.t_steps {
            for (i, c) in counts.iter_mut().enumerate() {
                *c += self.spikes[t * self.n_neurons + i] as u32;
            }
        }
        counts
    }
}

/// Time-based rate code: neuron (h, w) spikes at step t iff a fresh uniform
/// draw from `[0, 1)` falls below the pixel intensity. Intensity 1 therefore
/// spikes at every step. Deterministic per seed.
///
/// The raster represents one second of collection, so `dt = 1 / t_steps`
/// (0.001 s at the default 1000 steps).
pub fn rate_encode(frame: &NormalizedFrame, t_steps: usize, seed: u64) -> Result<SpikeRaster> {
    if t_steps == 0 {
        return Err(Error::invalid("t_steps must be at least 1"));
    }
    let x = frame.pixels();
    let mut rng = StdRng::seed_from_u64(seed);
    let mut spikes = Vec::with_capacity(t_steps * x.len());
    for _ in 0..t_steps {
        for &intensity in x {
            spikes.push(rng.random::<f64>() < intensity);
        }
    }
    SpikeRaster::new(spikes, t_steps, x.len(), 1.0 / t_steps as f64)
}

/// One integrate-and-fire step: integrates the leak, bias, and synaptic
/// current, fires and resets at threshold, then floors the potential at 0.
pub fn iaf_step(v: f64, i_syn: f64, p: &IafParams) -> (f64, bool) {
    let mut v_next = v + (-p.v_leak + p.resistance * (i_syn + p.i_bias)) / p.tau;
    let spiked = v_next >= p.v_thresh;
    if spiked {
        v_next = p.v_reset;
    }
    if v_next < 0.0 {
        v_next = 0.0;
    }
    (v_next, spiked)
}

/// Propagates an input spike raster through the feature and output IAF
/// layers and accumulates per-output-neuron spike totals.
///
/// Within one timestep, input spikes drive the feature layer and the feature
/// spikes produced at that step drive the output layer. The dynamics contain
/// no randomness: results are fully determined by the raster and model.
pub fn infer(model: &DeployedModel, raster: &SpikeRaster, p: &IafParams) -> Result<Vec<u32>> {
    if raster.n_neurons() != model.n_in() {
        return Err(Error::invalid(format!(
            "raster has {} neurons but the network expects {}",
            raster.n_neurons(),
            model.n_in()
        )));
    }
    p.validate()?;
    let n_in = model.n_in();
    let n_feat = model.n_feat();
    let n_out = model.n_out();

    // Column access dominates; transpose once so each active pre-neuron
    // contributes a contiguous slice.
    let wt_if = transpose(model.w_if(), n_feat, n_in);
    let wt_fo = transpose(model.w_fo(), n_out, n_feat);

    let mut v_feat = vec![0.0f64; n_feat];
    let mut v_out = vec![0.0f64; n_out];
    let mut counts = vec![0u32; n_out];
    let mut i_syn_feat = vec![0.0f64; n_feat];
    let mut i_syn_out = vec![0.0f64; n_out];
    let mut feat_spikes = vec![false; n_feat];

    for t in 0..raster.t_steps() {
        i_syn_feat.fill(0.0);
        for i in 0..n_in {
            if raster.spike(t, i) {
                let col = &wt_if[i * n_feat..(i + 1) * n_feat];
                for (j, w) in col.iter().enumerate() {
                    i_syn_feat[j] += w;
                }
            }
        }
        for j in 0..n_feat {
            let (v, spiked) = iaf_step(v_feat[j], i_syn_feat[j], p);
            v_feat[j] = v;
            feat_spikes[j] = spiked;
        }

        i_syn_out.fill(0.0);
        for (j, &spiked) in feat_spikes.iter().enumerate() {
            if spiked {
                let col = &wt_fo[j * n_out..(j + 1) * n_out];
                for (k, w) in col.iter().enumerate() {
                    i_syn_out[k] += w;
                }
            }
        }
        for k in 0..n_out {
            let (v, spiked) = iaf_step(v_out[k], i_syn_out[k], p);
            v_out[k] = v;
            counts[k] += spiked as u32;
        }
    }
    Ok(counts)
}

fn transpose(m: &[f64], rows: usize, cols: usize) -> Vec<f64> {
    let mut t = vec![0.0; m.len()];
    for r in 0..rows {
        for c in 0..cols {
            t[c * rows + r] = m[r * cols + c];
        }
    }
    t
}
