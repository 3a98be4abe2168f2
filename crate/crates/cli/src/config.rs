//! Flat key=value configuration with tuned defaults and command-line
//! overrides. Unknown keys are errors so typos in sweep configs surface
//! immediately.

use std::fmt::Write as _;
use std::path::Path;

use lens_core::events::RegionOfInterest;
use lens_core::snn::{HyperParams, IafParams};

use crate::{CliError, Result};

/// Which pixel-selection mode downsamples binned frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectorKind {
    /// Convolution-style center-pixel selection (kernel/stride/offset).
    Center,
    /// Seeded random pixel subset (`random_pixels`, `selector_seed`).
    Random,
}

impl SelectorKind {
    fn parse(s: &str) -> Result<SelectorKind> {
        match s {
            "center" => Ok(SelectorKind::Center),
            "random" => Ok(SelectorKind::Random),
            other => Err(CliError::validation(format!(
                "selector must be 'center' or 'random', got '{other}'"
            ))),
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            SelectorKind::Center => "center",
            SelectorKind::Random => "random",
        }
    }
}

/// Full experiment configuration. Every field carries a working default;
/// a config file only needs the overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub hyper: HyperParams,
    pub iaf: IafParams,
    /// Explicit feature layer size; 0 derives it from `feat_multiplier`.
    pub n_feat: usize,
    /// Feature layer size as a multiple of the input size (used when
    /// `n_feat` is 0). The robot architecture 100x200x75 is multiplier 2.
    pub feat_multiplier: f64,
    /// Forced target activation for the labeled output neuron.
    pub x_force: f64,
    /// Opt-in per-epoch seeded shuffling of frame presentation order.
    pub shuffle: bool,
    pub roi_enabled: bool,
    pub roi: RegionOfInterest,
    pub selector: SelectorKind,
    pub kernel: usize,
    pub stride: usize,
    pub offset_y: usize,
    pub offset_x: usize,
    pub random_pixels: usize,
    pub selector_seed: u64,
    /// Place window length in microseconds.
    pub window_us: u64,
    pub seq_len: usize,
    /// Spike-count vectors averaged per query (1 scores each window
    /// directly; 4 reproduces the online robot pipeline).
    pub bins: usize,
    /// Ground-truth tolerance in places.
    pub tolerance: usize,
    /// Rate-code simulation steps per window; one step represents
    /// `1 / timesteps` seconds of the collection window.
    pub timesteps: usize,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Config {
        Config {
            hyper: HyperParams::default(),
            iaf: IafParams::default(),
            n_feat: 0,
            feat_multiplier: 2.0,
            x_force: 0.5,
            shuffle: false,
            roi_enabled: true,
            roi: RegionOfInterest::new(24, 0, 80, 80),
            selector: SelectorKind::Center,
            kernel: 8,
            stride: 8,
            offset_y: 4,
            offset_x: 4,
            random_pixels: 49,
            selector_seed: 7,
            window_us: 1_000_000,
            seq_len: 4,
            bins: 1,
            tolerance: 2,
            timesteps: 1000,
            seed: 42,
        }
    }
}

impl Config {
    /// Parses a config file on top of the defaults.
    pub fn from_text(text: &str) -> Result<Config> {
        let mut config = Config::default();
        for (idx, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                CliError::validation(format!("config line {}: expected 'key = value'", idx + 1))
            })?;
            config
                .apply(key.trim(), value.trim())
                .map_err(|e| CliError::validation(format!("config line {}: {e}", idx + 1)))?;
        }
        config.validate()?;
        Ok(config)
    }

    pub fn read_file(path: impl AsRef<Path>) -> Result<Config> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Config::from_text(&text).map_err(|e| match e {
            CliError::Validation(msg) => {
                CliError::Validation(format!("{}: {msg}", path.display()))
            }
            other => other,
        })
    }

    fn apply(&mut self, key: &str, value: &str) -> Result<()> {
        fn num<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
            value
                .parse()
                .map_err(|_| CliError::validation(format!("bad value '{value}' for {key}")))
        }
        match key {
            "theta_max_if" => self.hyper.theta_max_if = num(key, value)?,
            "theta_max_fo" => self.hyper.theta_max_fo = num(key, value)?,
            "eta_stdp" => self.hyper.eta_stdp_init = num(key, value)?,
            "eta_itp" => self.hyper.eta_itp_init = num(key, value)?,
            "f_min_if" => self.hyper.f_range_if.0 = num(key, value)?,
            "f_max_if" => self.hyper.f_range_if.1 = num(key, value)?,
            "f_min_fo" => self.hyper.f_range_fo.0 = num(key, value)?,
            "f_max_fo" => self.hyper.f_range_fo.1 = num(key, value)?,
            "p_exc_if" => self.hyper.p_exc_if = num(key, value)?,
            "p_inh_if" => self.hyper.p_inh_if = num(key, value)?,
            "p_exc_fo" => self.hyper.p_exc_fo = num(key, value)?,
            "p_inh_fo" => self.hyper.p_inh_fo = num(key, value)?,
            "epochs_if" => self.hyper.epochs_if = num(key, value)?,
            "epochs_fo" => self.hyper.epochs_fo = num(key, value)?,
            "tau" => self.iaf.tau = num(key, value)?,
            "v_leak" => self.iaf.v_leak = num(key, value)?,
            "resistance" => self.iaf.resistance = num(key, value)?,
            "i_bias" => self.iaf.i_bias = num(key, value)?,
            "v_thresh" => self.iaf.v_thresh = num(key, value)?,
            "v_reset" => self.iaf.v_reset = num(key, value)?,
            "n_feat" => self.n_feat = num(key, value)?,
            "feat_multiplier" => self.feat_multiplier = num(key, value)?,
            "x_force" => self.x_force = num(key, value)?,
            "shuffle" => self.shuffle = parse_bool(key, value)?,
            "roi_enabled" => self.roi_enabled = parse_bool(key, value)?,
            "roi_x0" => self.roi.x0 = num(key, value)?,
            "roi_y0" => self.roi.y0 = num(key, value)?,
            "roi_width" => self.roi.width = num(key, value)?,
            "roi_height" => self.roi.height = num(key, value)?,
            "selector" => self.selector = SelectorKind::parse(value)?,
            "kernel" => self.kernel = num(key, value)?,
            "stride" => self.stride = num(key, value)?,
            "offset_y" => self.offset_y = num(key, value)?,
            "offset_x" => self.offset_x = num(key, value)?,
            "random_pixels" => self.random_pixels = num(key, value)?,
            "selector_seed" => self.selector_seed = num(key, value)?,
            "window_us" => self.window_us = num(key, value)?,
            "seq_len" => self.seq_len = num(key, value)?,
            "bins" => self.bins = num(key, value)?,
            "tolerance" => self.tolerance = num(key, value)?,
            "timesteps" => self.timesteps = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            other => {
                return Err(CliError::validation(format!("unknown config key '{other}'")));
            }
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.hyper.validate()?;
        self.iaf.validate()?;
        if self.window_us == 0 {
            return Err(CliError::validation("window_us must be positive"));
        }
        if self.seq_len == 0 || self.bins == 0 || self.timesteps == 0 {
            return Err(CliError::validation(
                "seq_len, bins, and timesteps must be at least 1",
            ));
        }
        if self.feat_multiplier <= 0.0 && self.n_feat == 0 {
            return Err(CliError::validation(
                "feat_multiplier must be positive when n_feat is 0",
            ));
        }
        Ok(())
    }

    /// Renders every key; parsing the output reproduces the config exactly.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        kv("theta_max_if", self.hyper.theta_max_if.to_string());
        kv("theta_max_fo", self.hyper.theta_max_fo.to_string());
        kv("eta_stdp", self.hyper.eta_stdp_init.to_string());
        kv("eta_itp", self.hyper.eta_itp_init.to_string());
        kv("f_min_if", self.hyper.f_range_if.0.to_string());
        kv("f_max_if", self.hyper.f_range_if.1.to_string());
        kv("f_min_fo", self.hyper.f_range_fo.0.to_string());
        kv("f_max_fo", self.hyper.f_range_fo.1.to_string());
        kv("p_exc_if", self.hyper.p_exc_if.to_string());
        kv("p_inh_if", self.hyper.p_inh_if.to_string());
        kv("p_exc_fo", self.hyper.p_exc_fo.to_string());
        kv("p_inh_fo", self.hyper.p_inh_fo.to_string());
        kv("epochs_if", self.hyper.epochs_if.to_string());
        kv("epochs_fo", self.hyper.epochs_fo.to_string());
        kv("tau", self.iaf.tau.to_string());
        kv("v_leak", self.iaf.v_leak.to_string());
        kv("resistance", self.iaf.resistance.to_string());
        kv("i_bias", self.iaf.i_bias.to_string());
        kv("v_thresh", self.iaf.v_thresh.to_string());
        kv("v_reset", self.iaf.v_reset.to_string());
        kv("n_feat", self.n_feat.to_string());
        kv("feat_multiplier", self.feat_multiplier.to_string());
        kv("x_force", self.x_force.to_string());
        kv("shuffle", self.shuffle.to_string());
        kv("roi_enabled", self.roi_enabled.to_string());
        kv("roi_x0", self.roi.x0.to_string());
        kv("roi_y0", self.roi.y0.to_string());
        kv("roi_width", self.roi.width.to_string());
        kv("roi_height", self.roi.height.to_string());
        kv("selector", self.selector.as_str().to_string());
        kv("kernel", self.kernel.to_string());
        kv("stride", self.stride.to_string());
        kv("offset_y", self.offset_y.to_string());
        kv("offset_x", self.offset_x.to_string());
        kv("random_pixels", self.random_pixels.to_string());
        kv("selector_seed", self.selector_seed.to_string());
        kv("window_us", self.window_us.to_string());
        kv("seq_len", self.seq_len.to_string());
        kv("bins", self.bins.to_string());
        kv("tolerance", self.tolerance.to_string());
        kv("timesteps", self.timesteps.to_string());
        kv("seed", self.seed.to_string());
        out
    }

    pub fn write_file(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text())
            .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
        Ok(())
    }

    /// Feature layer size for a given input size.
    pub fn feature_size(&self, n_in: usize) -> usize {
        if self.n_feat > 0 {
            self.n_feat
        } else {
            ((n_in as f64 * self.feat_multiplier).round() as usize).max(1)
        }
    }
}

fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        other => Err(CliError::validation(format!(
            "bad value '{other}' for {key}, expected true/false"
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_hold_stock_values() {
        let c = Config::default();
        assert_eq!(c.hyper.theta_max_if, 0.75);
        assert_eq!(c.hyper.theta_max_fo, 0.5);
        assert_eq!(c.hyper.eta_stdp_init, 0.01);
        assert_eq!(c.hyper.eta_itp_init, 0.02);
        assert_eq!(c.hyper.f_range_if, (0.4, 0.6));
        assert_eq!(c.hyper.f_range_fo, (0.5, 0.5));
        assert_eq!(c.hyper.p_exc_if, 0.35);
        assert_eq!(c.hyper.p_inh_if, 0.75);
        assert_eq!(c.hyper.p_exc_fo, 1.0);
        assert_eq!(c.hyper.p_inh_fo, 1.0);
        assert_eq!(c.hyper.epochs_if, 64);
        assert_eq!(c.hyper.epochs_fo, 128);
        assert_eq!(c.roi, RegionOfInterest::new(24, 0, 80, 80));
        assert_eq!((c.kernel, c.stride, c.offset_y, c.offset_x), (8, 8, 4, 4));
        assert_eq!(c.window_us, 1_000_000);
        assert_eq!(c.timesteps, 1000);
    }

    #[test]
    fn round_trip_through_text() {
        let c = Config {
            seq_len: 30,
            tolerance: 3,
            selector: SelectorKind::Random,
            random_pixels: 49,
            ..Config::default()
        };
        let parsed = Config::from_text(&c.to_text()).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn unknown_key_is_an_error() {
        let err = Config::from_text("sequence_length = 4\n").unwrap_err();
        assert!(matches!(err, CliError::Validation(_)));
        assert!(err.to_string().contains("unknown config key"));
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let c = Config::from_text("# a comment\n\nseq_len = 30\n").unwrap();
        assert_eq!(c.seq_len, 30);
    }

    #[test]
    fn bad_values_are_rejected() {
        assert!(Config::from_text("seq_len = many\n").is_err());
        assert!(Config::from_text("p_exc_if = 1.5\n").is_err());
        assert!(Config::from_text("shuffle = maybe\n").is_err());
    }

    #[test]
    fn feature_size_derivation() {
        let mut c = Config::default();
        assert_eq!(c.feature_size(100), 200);
        c.n_feat = 63;
        assert_eq!(c.feature_size(49), 63);
    }
}
