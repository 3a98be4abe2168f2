//! Model persistence.
//!
//! A model file is a `LENSMDL1` container: the magic line, a key=value text
//! header (layer sizes, hyperparameters, IAF parameters, seed, synapse
//! count), a `---` separator, then one section per layer holding the
//! effective weight matrix row-major as little-endian f32, each section
//! terminated by a `---` line. One synapse stores one effective weight, so
//! the 49x63x641 architecture persists in under 180 KB. Round-trips are
//! bit-exact at f32 precision and byte-identical across runs.

use std::path::Path;

use crate::error::{Error, Result};
use crate::snn::{DeployedModel, HyperParams, IafParams, NetworkModel};

pub const MAGIC: &str = "LENSMDL1";
const SEP: &[u8] = b"---\n";

/// Serializes a model to the container bytes.
pub fn model_to_bytes(model: &NetworkModel) -> Vec<u8> {
    deployed_to_bytes(&model.deploy())
}

/// Serializes an inference-time model to the container bytes.
pub fn deployed_to_bytes(model: &DeployedModel) -> Vec<u8> {
    let h = &model.hyper;
    let iaf = &model.iaf;
    let mut out = Vec::new();
    let mut header = String::new();
    header.push_str(MAGIC);
    header.push('\n');
    let mut kv = |k: &str, v: String| {
        header.push_str(k);
        header.push('=');
        header.push_str(&v);
        header.push('\n');
    };
    kv("n_in", model.n_in().to_string());
    kv("n_feat", model.n_feat().to_string());
    kv("n_out", model.n_out().to_string());
    kv("seed", model.seed.to_string());
    kv("trained", (model.trained as u8).to_string());
    kv("params", model.parameter_count().to_string());
    kv("theta_max_if", h.theta_max_if.to_string());
    kv("theta_max_fo", h.theta_max_fo.to_string());
    kv("eta_stdp_init", h.eta_stdp_init.to_string());
    kv("eta_itp_init", h.eta_itp_init.to_string());
    kv("f_min_if", h.f_range_if.0.to_string());
    kv("f_max_if", h.f_range_if.1.to_string());
    kv("f_min_fo", h.f_range_fo.0.to_string());
    kv("f_max_fo", h.f_range_fo.1.to_string());
    kv("p_exc_if", h.p_exc_if.to_string());
    kv("p_inh_if", h.p_inh_if.to_string());
    kv("p_exc_fo", h.p_exc_fo.to_string());
    kv("p_inh_fo", h.p_inh_fo.to_string());
    kv("epochs_if", h.epochs_if.to_string());
    kv("epochs_fo", h.epochs_fo.to_string());
    kv("tau", iaf.tau.to_string());
    kv("v_leak", iaf.v_leak.to_string());
    kv("resistance", iaf.resistance.to_string());
    kv("i_bias", iaf.i_bias.to_string());
    kv("v_thresh", iaf.v_thresh.to_string());
    kv("v_reset", iaf.v_reset.to_string());
    kv("weights", "f32le".to_string());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(SEP);
    for matrix in [model.w_if(), model.w_fo()] {
        for &w in matrix {
            out.extend_from_slice(&(w as f32).to_le_bytes());
        }
        out.extend_from_slice(SEP);
    }
    out
}

/// Writes a model file.
pub fn save_model(model: &NetworkModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model_to_bytes(model))?;
    Ok(())
}

/// Writes an inference-time model file.
pub fn save_deployed(model: &DeployedModel, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, deployed_to_bytes(model))?;
    Ok(())
}

/// Parses a model container back into its inference-time form.
pub fn model_from_bytes(bytes: &[u8]) -> Result<DeployedModel> {
    let header_end = find(bytes, SEP, 0)
        .ok_or_else(|| Error::invalid("model file: missing header separator"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| Error::invalid("model file: header is not UTF-8"))?;

    let mut lines = header.lines();
    let magic = lines.next().unwrap_or("");
    if magic != MAGIC {
        return Err(Error::invalid(format!(
            "not a model file: expected magic '{MAGIC}', found '{magic}'"
        )));
    }
    let mut fields = std::collections::BTreeMap::new();
    for (i, line) in lines.enumerate() {
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| Error::parse(i + 2, format!("model header line '{line}' is not key=value")))?;
        fields.insert(k.to_string(), v.to_string());
    }
    let get = |k: &str| -> Result<&String> {
        fields
            .get(k)
            .ok_or_else(|| Error::invalid(format!("model header missing '{k}'")))
    };
    let parse_usize = |k: &str| -> Result<usize> {
        get(k)?
            .parse()
            .map_err(|_| Error::invalid(format!("model header: bad integer for '{k}'")))
    };
    let parse_f64 = |k: &str| -> Result<f64> {
        get(k)?
            .parse()
            .map_err(|_| Error::invalid(format!("model header: bad number for '{k}'")))
    };

    let n_in = parse_usize("n_in")?;
    let n_feat = parse_usize("n_feat")?;
    let n_out = parse_usize("n_out")?;
    let seed: u64 = get("seed")?
        .parse()
        .map_err(|_| Error::invalid("model header: bad seed"))?;
    let trained = get("trained")?.as_str() == "1";
    let params = parse_usize("params")?;
    if get("weights")?.as_str() != "f32le" {
        return Err(Error::invalid("model file: unsupported weight encoding"));
    }
    let hyper = HyperParams {
        theta_max_if: parse_f64("theta_max_if")?,
        theta_max_fo: parse_f64("theta_max_fo")?,
        eta_stdp_init: parse_f64("eta_stdp_init")?,
        eta_itp_init: parse_f64("eta_itp_init")?,
        f_range_if: (parse_f64("f_min_if")?, parse_f64("f_max_if")?),
        f_range_fo: (parse_f64("f_min_fo")?, parse_f64("f_max_fo")?),
        p_exc_if: parse_f64("p_exc_if")?,
        p_inh_if: parse_f64("p_inh_if")?,
        p_exc_fo: parse_f64("p_exc_fo")?,
        p_inh_fo: parse_f64("p_inh_fo")?,
        epochs_if: parse_usize("epochs_if")?,
        epochs_fo: parse_usize("epochs_fo")?,
    };
    let iaf = IafParams {
        tau: parse_f64("tau")?,
        v_leak: parse_f64("v_leak")?,
        resistance: parse_f64("resistance")?,
        i_bias: parse_f64("i_bias")?,
        v_thresh: parse_f64("v_thresh")?,
        v_reset: parse_f64("v_reset")?,
    };

    let sized = |a: usize, b: usize| {
        a.checked_mul(b)
            .filter(|&n| n <= bytes.len())
            .ok_or_else(|| Error::invalid("model file: layer sizes exceed file size"))
    };
    let mut offset = header_end + SEP.len();
    let w_if = read_matrix(bytes, &mut offset, sized(n_feat, n_in)?, "input->feature")?;
    let w_fo = read_matrix(bytes, &mut offset, sized(n_out, n_feat)?, "feature->output")?;
    if offset != bytes.len() {
        return Err(Error::invalid("model file: trailing bytes after last section"));
    }
    DeployedModel::new(n_in, n_feat, n_out, w_if, w_fo, params, hyper, iaf, seed, trained)
}

/// Reads and parses a model file from disk.
pub fn load_model(path: impl AsRef<Path>) -> Result<DeployedModel> {
    let bytes = std::fs::read(path)?;
    model_from_bytes(&bytes)
}

fn read_matrix(bytes: &[u8], offset: &mut usize, len: usize, name: &str) -> Result<Vec<f64>> {
    let end = *offset + len * 4; // len bounded by the file size above
    if bytes.len() < end + SEP.len() {
        return Err(Error::invalid(format!(
            "model file: truncated {name} weight section"
        )));
    }
    let mut out = Vec::with_capacity(len);
    for chunk in bytes[*offset..end].chunks_exact(4) {
        out.push(f32::from_le_bytes(chunk.try_into().unwrap()) as f64);
    }
    if &bytes[end..end + SEP.len()] != SEP {
        return Err(Error::invalid(format!(
            "model file: missing separator after {name} weights"
        )));
    }
    *offset = end + SEP.len();
    Ok(out)
}

fn find(haystack: &[u8], needle: &[u8], from: usize) -> Option<usize> {
    haystack[from..]
        .windows(needle.len())
        .position(|w| w == needle)
        .map(|p| p + from)
}
