//! The six pipeline commands. Each returns a summary struct so the same
//! entry points serve the binary and the test suites.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use lens_core::baseline::{sad_matrix, FrameDatabase};
use lens_core::eval::{pr_curve, recall_at_n, recall_to_csv, GroundTruth, PrCurve};
use lens_core::events;
use lens_core::framegen::NormalizedFrame;
use lens_core::matching::{
    accumulate_windows, match_places, matches_to_csv, sequence_convolve, SimilarityMatrix,
};
use lens_core::persist;
use lens_core::snn::{infer, init_network, rate_encode, DeployedModel, NetworkModel};
use lens_core::training::{
    format_training_log, train_feature_layer, train_output_layer, EpochStats, TrainingSchedule,
};

use crate::config::{Config, SelectorKind};
use crate::pipeline::{frames_from_stream, load_dataset, selected_frames, window_seed};
use crate::synth::{write_dataset, SynthPaths, SynthSpec};
use crate::{with_path, CliError, Result};

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

fn ensure_dir(path: &Path) -> Result<()> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(format!("{}: {e}", path.display())))
}

/// Fits both layers on a labeled frame set, using the schedules from the
/// config. Shared by `train` and `sweep`.
pub fn train_model(
    config: &Config,
    frames: &[NormalizedFrame],
    labels: &[usize],
) -> Result<(NetworkModel, Vec<EpochStats>)> {
    let n_in = frames
        .first()
        .map(|f| f.pixels().len())
        .ok_or_else(|| CliError::validation("no frames to train on"))?;
    let n_feat = config.feature_size(n_in);
    let n_out = labels.iter().max().map(|m| m + 1).unwrap_or(0);
    let mut model = init_network(n_in, n_feat, n_out, config.hyper.clone(), config.seed)?;
    model.iaf = config.iaf;

    let shuffle_seed = config.shuffle.then(|| config.seed.wrapping_add(0x5AFF));
    let feature_schedule = TrainingSchedule {
        epochs: config.hyper.epochs_if,
        eta_init: config.hyper.eta_stdp_init,
        shuffle_seed,
    };
    let output_schedule = TrainingSchedule {
        epochs: config.hyper.epochs_fo,
        eta_init: config.hyper.eta_itp_init,
        shuffle_seed,
    };
    let mut stats = train_feature_layer(&mut model, frames, &feature_schedule)?;
    stats.extend(train_output_layer(
        &mut model,
        frames,
        labels,
        &output_schedule,
        config.x_force,
    )?);
    Ok((model, stats))
}

/// Localization inner loop shared by `localize` and `sweep`: rate-encode
/// each window, run IAF inference, group by `bins`, then sequence-match.
pub fn localization_matrices(
    model: &DeployedModel,
    config: &Config,
    frames: &[NormalizedFrame],
) -> Result<(SimilarityMatrix, SimilarityMatrix)> {
    if frames.is_empty() {
        return Err(CliError::validation("query traverse produced no windows"));
    }
    let n_in = frames[0].pixels().len();
    if n_in != model.n_in() {
        return Err(CliError::validation(format!(
            "geometry mismatch: query frames have {n_in} pixels but the model expects {}",
            model.n_in()
        )));
    }
    let mut vectors = Vec::with_capacity(frames.len());
    for (w, frame) in frames.iter().enumerate() {
        let raster = rate_encode(frame, config.timesteps, window_seed(config.seed, w))?;
        let counts = infer(model, &raster, &model.iaf)?;
        vectors.push(counts.into_iter().map(f64::from).collect::<Vec<f64>>());
    }
    let rows = accumulate_windows(&vectors, config.bins)?;
    if rows.is_empty() {
        return Err(CliError::validation(format!(
            "{} windows form no complete group of {} bins",
            vectors.len(),
            config.bins
        )));
    }
    let raw = SimilarityMatrix::from_rows(rows, lens_core::matching::Provenance::Raw)?;
    let seq = sequence_convolve(&raw, config.seq_len)?;
    Ok((raw, seq))
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub n_in: usize,
    pub n_feat: usize,
    pub n_out: usize,
    pub parameters: usize,
    pub model_bytes: usize,
    pub model_path: PathBuf,
    pub log_path: PathBuf,
}

/// `lens train`: events -> frames -> two-stage training -> model file +
/// training log.
pub fn cmd_train(
    config: &Config,
    events_path: &Path,
    out_model: &Path,
    log_path: Option<&Path>,
    dump_frames: Option<&Path>,
) -> Result<TrainSummary> {
    let dataset = load_dataset(events_path, config)?;
    if dataset.is_empty() {
        return Err(CliError::validation(format!(
            "{}: no events to train on",
            events_path.display()
        )));
    }
    let (model, stats) = train_model(config, &dataset.frames, &dataset.labels)?;

    if let Some(parent) = out_model.parent() {
        if !parent.as_os_str().is_empty() {
            ensure_dir(parent)?;
        }
    }
    let bytes = persist::model_to_bytes(&model);
    std::fs::write(out_model, &bytes)
        .map_err(|e| CliError::io(format!("{}: {e}", out_model.display())))?;

    let log_path = log_path
        .map(Path::to_path_buf)
        .unwrap_or_else(|| append_extension(out_model, "log"));
    write_text(&log_path, &format_training_log(&stats))?;

    if let Some(dir) = dump_frames {
        let stream =
            events::read_event_file(events_path).map_err(|e| with_path(e, events_path))?;
        dump_selected_frames(&stream, config, dir)?;
    }

    let summary = TrainSummary {
        n_in: model.n_in(),
        n_feat: model.n_feat(),
        n_out: model.n_out(),
        parameters: model.parameter_count(),
        model_bytes: bytes.len(),
        model_path: out_model.to_path_buf(),
        log_path,
    };
    println!(
        "layers: {} -> {} -> {}",
        summary.n_in, summary.n_feat, summary.n_out
    );
    println!("parameters: {}", summary.parameters);
    println!(
        "model: {} ({} bytes)",
        summary.model_path.display(),
        summary.model_bytes
    );
    Ok(summary)
}

fn append_extension(path: &Path, ext: &str) -> PathBuf {
    let mut name = path.file_name().unwrap_or_default().to_os_string();
    name.push(".");
    name.push(ext);
    path.with_file_name(name)
}

fn dump_selected_frames(
    stream: &events::EventStream,
    config: &Config,
    dir: &Path,
) -> Result<usize> {
    ensure_dir(dir)?;
    let frames = selected_frames(stream, config)?;
    let mut total = 0usize;
    for frame in &frames {
        let idx = frame.place_index.unwrap_or(0);
        let path = dir.join(format!("frame_{idx:05}.csv"));
        let text = frame.to_text();
        total += text.len();
        write_text(&path, &text)?;
    }
    println!(
        "dumped {} frames to {} ({} bytes)",
        frames.len(),
        dir.display(),
        total
    );
    Ok(total)
}

#[derive(Debug, Clone)]
pub struct LocalizeSummary {
    pub queries: usize,
    pub references: usize,
    pub raw_path: PathBuf,
    pub seq_path: PathBuf,
    pub matches_path: PathBuf,
}

/// `lens localize`: events -> rate-coded IAF inference against a trained
/// model -> raw + sequence-matched similarity matrices and match list.
pub fn cmd_localize(
    config: &Config,
    model_path: &Path,
    events_path: &Path,
    out_dir: &Path,
) -> Result<LocalizeSummary> {
    let model = persist::load_model(model_path).map_err(|e| with_path(e, model_path))?;
    let dataset = load_dataset(events_path, config)?;
    let (raw, seq) = localization_matrices(&model, config, &dataset.frames)?;
    let matches = match_places(&seq)?;

    ensure_dir(out_dir)?;
    let summary = LocalizeSummary {
        queries: seq.queries(),
        references: seq.references(),
        raw_path: out_dir.join("similarity_raw.csv"),
        seq_path: out_dir.join("similarity_seq.csv"),
        matches_path: out_dir.join("matches.csv"),
    };
    write_text(&summary.raw_path, &raw.to_csv())?;
    write_text(&summary.seq_path, &seq.to_csv())?;
    write_text(&summary.matches_path, &matches_to_csv(&matches))?;
    println!(
        "localized {} queries against {} places -> {}",
        summary.queries,
        summary.references,
        out_dir.display()
    );
    Ok(summary)
}

#[derive(Debug, Clone)]
pub struct EvalEntry {
    pub name: String,
    pub recall_at_1: f64,
    pub pr_auc: f64,
    pub recall_path: PathBuf,
    pub pr_path: PathBuf,
}

#[derive(Debug, Clone)]
pub struct EvalSummary {
    pub entries: Vec<EvalEntry>,
    pub auc_path: PathBuf,
}

/// `lens evaluate`: similarity matrices -> Recall@N, PR curves, and AUC,
/// side by side for every input matrix.
pub fn cmd_evaluate(
    matrix_paths: &[PathBuf],
    gt_path: Option<&Path>,
    tolerance: usize,
    out_dir: &Path,
    emit_plot: bool,
) -> Result<EvalSummary> {
    if matrix_paths.is_empty() {
        return Err(CliError::validation("no similarity matrices given"));
    }
    let mut matrices = Vec::new();
    for path in matrix_paths {
        let m = SimilarityMatrix::read_csv(path).map_err(|e| with_path(e, path))?;
        let stem = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        matrices.push((stem, m));
    }
    let q = matrices[0].1.queries();
    if let Some((name, m)) = matrices.iter().find(|(_, m)| m.queries() != q) {
        return Err(CliError::validation(format!(
            "matrix '{name}' has {} queries, expected {q}",
            m.queries()
        )));
    }
    let gt = match gt_path {
        Some(path) => GroundTruth::read_file(path, tolerance).map_err(|e| with_path(e, path))?,
        None => GroundTruth::diagonal(q, tolerance),
    };

    ensure_dir(out_dir)?;
    let single = matrices.len() == 1;
    let mut used_names: Vec<String> = Vec::new();
    let mut entries = Vec::new();
    let mut curves: Vec<(String, PrCurve)> = Vec::new();
    let mut auc_csv = String::from("# matrix,auc\n");

    for (stem, m) in &matrices {
        // Disambiguate repeated stems so no output overwrites another.
        let mut name = stem.clone();
        let mut k = 2;
        while used_names.contains(&name) {
            name = format!("{stem}_{k}");
            k += 1;
        }
        used_names.push(name.clone());

        let ns: Vec<usize> = (1..=m.references().min(25)).collect();
        let recalls = recall_at_n(m, &gt, &ns)?;
        let curve = pr_curve(m, &gt, 100)?;
        let curve_auc = curve.auc()?;

        let target = if single {
            out_dir.to_path_buf()
        } else {
            let d = out_dir.join(&name);
            ensure_dir(&d)?;
            d
        };
        let recall_path = target.join("recall_at_n.csv");
        let pr_path = target.join("pr_curve.csv");
        write_text(&recall_path, &recall_to_csv(&recalls))?;
        write_text(&pr_path, &curve.to_csv())?;
        let _ = writeln!(auc_csv, "{name},{curve_auc}");

        println!(
            "{name}: recall@1 = {:.4}, pr auc = {curve_auc:.4}",
            recalls[0].1
        );
        entries.push(EvalEntry {
            name: name.clone(),
            recall_at_1: recalls[0].1,
            pr_auc: curve_auc,
            recall_path,
            pr_path,
        });
        curves.push((name, curve));
    }
    let auc_path = out_dir.join("auc.csv");
    write_text(&auc_path, &auc_csv)?;
    if emit_plot {
        let refs: Vec<(String, &PrCurve)> =
            curves.iter().map(|(n, c)| (n.clone(), c)).collect();
        write_text(&out_dir.join("pr_curves.svg"), &crate::plot::pr_curves_svg(&refs))?;
    }
    Ok(EvalSummary { entries, auc_path })
}

#[derive(Debug, Clone)]
pub struct BaselineSummary {
    pub queries: usize,
    pub references: usize,
    pub raw_path: PathBuf,
    pub seq_path: PathBuf,
    pub matches_path: PathBuf,
    /// Bytes of dumped reference frames, when requested (storage-size
    /// accounting for the SAD method).
    pub stored_bytes: Option<usize>,
}

/// `lens baseline`: SAD matcher over the same preprocessed frames, through
/// the same sequence-matching path as the network scores.
pub fn cmd_baseline(
    config: &Config,
    ref_path: &Path,
    query_path: &Path,
    out_dir: &Path,
    dump_frames: bool,
) -> Result<BaselineSummary> {
    let refs = load_dataset(ref_path, config)?;
    let queries = load_dataset(query_path, config)?;
    let ref_db = FrameDatabase::new(refs.frames.clone())?;
    let query_db = FrameDatabase::new(queries.frames.clone())?;
    let raw = sad_matrix(&ref_db, &query_db)?;
    let seq = sequence_convolve(&raw, config.seq_len)?;
    let matches = match_places(&seq)?;

    ensure_dir(out_dir)?;
    let mut summary = BaselineSummary {
        queries: seq.queries(),
        references: seq.references(),
        raw_path: out_dir.join("sad_raw.csv"),
        seq_path: out_dir.join("sad_seq.csv"),
        matches_path: out_dir.join("sad_matches.csv"),
        stored_bytes: None,
    };
    write_text(&summary.raw_path, &raw.to_csv())?;
    write_text(&summary.seq_path, &seq.to_csv())?;
    write_text(&summary.matches_path, &matches_to_csv(&matches))?;

    if dump_frames {
        let stream = events::read_event_file(ref_path).map_err(|e| with_path(e, ref_path))?;
        let bytes = dump_selected_frames(&stream, config, &out_dir.join("frames"))?;
        summary.stored_bytes = Some(bytes);
    }
    println!(
        "baseline scored {} queries against {} references -> {}",
        summary.queries,
        summary.references,
        out_dir.display()
    );
    Ok(summary)
}

/// `lens synth`: writes a reference/query event-file pair plus a matching
/// config.
pub fn cmd_synth(spec: &SynthSpec, out_dir: &Path) -> Result<SynthPaths> {
    let paths = write_dataset(spec, out_dir)?;
    println!(
        "synthesized {} places x {} pixels (noise {}) -> {}",
        spec.places,
        spec.pixels,
        spec.noise,
        out_dir.display()
    );
    Ok(paths)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub pixels: usize,
    pub feat_multiplier: f64,
    pub seq_len: usize,
    pub recall_at_1: f64,
    pub pr_auc: f64,
}

#[derive(Debug, Clone)]
pub struct SweepSummary {
    pub rows: Vec<SweepRow>,
    pub csv_path: PathBuf,
}

/// Parsed sweep grid: dataset paths plus the axis value lists.
struct SweepGrid {
    ref_path: PathBuf,
    query_path: PathBuf,
    gt_path: Option<PathBuf>,
    config_path: Option<PathBuf>,
    tolerance: Option<usize>,
    pixels: Vec<usize>,
    feat_multiplier: Vec<f64>,
    seq_len: Vec<usize>,
}

fn parse_sweep_grid(path: &Path) -> Result<SweepGrid> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::io(format!("{}: {e}", path.display())))?;
    let mut ref_path = None;
    let mut query_path = None;
    let mut gt_path = None;
    let mut config_path = None;
    let mut tolerance = None;
    let mut pixels = Vec::new();
    let mut feat_multiplier = Vec::new();
    let mut seq_len = Vec::new();

    fn list<T: std::str::FromStr>(key: &str, value: &str) -> Result<Vec<T>> {
        value
            .split(',')
            .map(|tok| {
                tok.trim()
                    .parse()
                    .map_err(|_| CliError::validation(format!("bad value '{tok}' in {key}")))
            })
            .collect()
    }

    for (idx, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            CliError::validation(format!(
                "{}:{}: expected 'key = value'",
                path.display(),
                idx + 1
            ))
        })?;
        let (key, value) = (key.trim(), value.trim());
        match key {
            "ref" => ref_path = Some(PathBuf::from(value)),
            "query" => query_path = Some(PathBuf::from(value)),
            "gt" => gt_path = Some(PathBuf::from(value)),
            "config" => config_path = Some(PathBuf::from(value)),
            "tolerance" => {
                tolerance = Some(value.parse().map_err(|_| {
                    CliError::validation(format!("bad tolerance '{value}'"))
                })?)
            }
            "pixels" => pixels = list(key, value)?,
            "feat_multiplier" => feat_multiplier = list(key, value)?,
            "seq_len" => seq_len = list(key, value)?,
            other => {
                return Err(CliError::validation(format!(
                    "{}:{}: unknown grid key '{other}'",
                    path.display(),
                    idx + 1
                )));
            }
        }
    }
    let missing = |what: &str| CliError::validation(format!("sweep grid missing '{what}'"));
    if pixels.is_empty() {
        return Err(missing("pixels"));
    }
    if feat_multiplier.is_empty() {
        return Err(missing("feat_multiplier"));
    }
    if seq_len.is_empty() {
        return Err(missing("seq_len"));
    }
    Ok(SweepGrid {
        ref_path: ref_path.ok_or_else(|| missing("ref"))?,
        query_path: query_path.ok_or_else(|| missing("query"))?,
        gt_path,
        config_path,
        tolerance,
        pixels,
        feat_multiplier,
        seq_len,
    })
}

/// `lens sweep`: retrains and relocalizes over a pixels x feature-multiplier
/// x sequence-length grid, recording Recall@1 and PR AUC per cell. Pixel
/// counts select random subsets, so any value that is a perfect square works
/// on any source geometry.
pub fn cmd_sweep(grid_path: &Path, out_dir: &Path) -> Result<SweepSummary> {
    let grid = parse_sweep_grid(grid_path)?;
    let base = match &grid.config_path {
        Some(p) => Config::read_file(p)?,
        None => Config::default(),
    };
    let tolerance = grid.tolerance.unwrap_or(base.tolerance);

    let ref_stream = events::read_event_file(&grid.ref_path)
        .map_err(|e| with_path(e, &grid.ref_path))?;
    let query_stream = events::read_event_file(&grid.query_path)
        .map_err(|e| with_path(e, &grid.query_path))?;

    ensure_dir(out_dir)?;
    let mut rows = Vec::new();
    let mut csv = String::from("# pixels,feat_multiplier,seq_len,recall_at_1,pr_auc\n");
    for &px in &grid.pixels {
        for &mult in &grid.feat_multiplier {
            for &l in &grid.seq_len {
                let cfg = Config {
                    selector: SelectorKind::Random,
                    random_pixels: px,
                    n_feat: 0,
                    feat_multiplier: mult,
                    seq_len: l,
                    ..base.clone()
                };
                let ref_frames = frames_from_stream(&ref_stream, &cfg)?;
                let query_frames = frames_from_stream(&query_stream, &cfg)?;
                let labels: Vec<usize> = (0..ref_frames.len()).collect();
                let (model, _) = train_model(&cfg, &ref_frames, &labels)?;
                // Round-trip through the container so sweep results match
                // the train-then-localize file flow exactly.
                let deployed = persist::model_from_bytes(&persist::model_to_bytes(&model))?;
                let (_, seq) = localization_matrices(&deployed, &cfg, &query_frames)?;
                let gt = match &grid.gt_path {
                    Some(p) => GroundTruth::read_file(p, tolerance)
                        .map_err(|e| with_path(e, p))?,
                    None => GroundTruth::diagonal(seq.queries(), tolerance),
                };
                let recall = recall_at_n(&seq, &gt, &[1])?[0].1;
                let curve = pr_curve(&seq, &gt, 100)?;
                let pr_auc = curve.auc()?;
                let _ = writeln!(csv, "{px},{mult},{l},{recall},{pr_auc}");
                println!(
                    "pixels={px} feat_multiplier={mult} seq_len={l}: recall@1={recall:.4} auc={pr_auc:.4}"
                );
                rows.push(SweepRow {
                    pixels: px,
                    feat_multiplier: mult,
                    seq_len: l,
                    recall_at_1: recall,
                    pr_auc,
                });
            }
        }
    }
    let csv_path = out_dir.join("sweep.csv");
    write_text(&csv_path, &csv)?;
    Ok(SweepSummary { rows, csv_path })
}
