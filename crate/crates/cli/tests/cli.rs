//! Binary-level behavior: exit codes, output files, reproducibility, and
//! the golden-file regression for `evaluate`.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lens_cli::commands::{cmd_localize, cmd_sweep, cmd_synth, cmd_train};
use lens_cli::config::Config;
use lens_cli::synth::SynthSpec;
use lens_core::eval::{recall_at_n, GroundTruth};
use lens_core::matching::SimilarityMatrix;
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};

fn lens() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lens"))
}

fn run(args: &[&str]) -> Output {
    lens().args(args).output().expect("failed to spawn lens")
}

fn assert_code(output: &Output, expected: i32) {
    let code = output.status.code().unwrap_or(-1);
    assert_eq!(
        code,
        expected,
        "exit code {code}, expected {expected}\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&output.stdout),
        String::from_utf8_lossy(&output.stderr)
    );
}

fn path_str(p: &Path) -> String {
    p.to_string_lossy().into_owned()
}

/// Writes a tiny synthetic dataset and returns (dir, ref, query, config).
fn small_dataset(dir: &Path, noise: f64, seed: u64) -> (PathBuf, PathBuf, PathBuf) {
    let paths = cmd_synth(&SynthSpec::new(6, 16, noise, seed), dir).unwrap();
    (paths.reference, paths.query, paths.config)
}

#[test]
fn help_and_version_exit_zero() {
    assert_code(&run(&["--help"]), 0);
    assert_code(&run(&["--version"]), 0);
    assert_code(&run(&["train", "--help"]), 0);
}

#[test]
fn usage_errors_exit_one() {
    assert_code(&run(&[]), 1);
    assert_code(&run(&["train"]), 1); // missing required args
    assert_code(&run(&["no-such-command"]), 1);
}

#[test]
fn missing_input_file_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "train",
        "--events",
        "/no/such/file.events",
        "--out",
        &path_str(&dir.path().join("model.lens")),
    ]);
    assert_code(&out, 2);
}

#[test]
fn malformed_events_exit_one_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.events");
    std::fs::write(&bad, "# 16,16\n100,3,4,1\nbogus line\n").unwrap();
    let out = run(&[
        "train",
        "--events",
        &path_str(&bad),
        "--out",
        &path_str(&dir.path().join("model.lens")),
    ]);
    assert_code(&out, 1);
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains(":3"), "stderr should carry the line: {stderr}");
}

#[test]
fn unknown_config_key_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (reference, _, _) = small_dataset(dir.path(), 0.0, 1);
    let cfg = dir.path().join("bad.cfg");
    std::fs::write(&cfg, "sequence_len = 4\n").unwrap();
    let out = run(&[
        "train",
        "--events",
        &path_str(&reference),
        "--config",
        &path_str(&cfg),
        "--out",
        &path_str(&dir.path().join("model.lens")),
    ]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown config key"));
}

#[test]
fn geometry_mismatch_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let (reference, _, config) = small_dataset(dir.path(), 0.0, 2);
    let model = dir.path().join("model.lens");
    assert_code(
        &run(&[
            "train",
            "--events",
            &path_str(&reference),
            "--config",
            &path_str(&config),
            "--out",
            &path_str(&model),
        ]),
        0,
    );
    // A 25-pixel query cannot feed a 16-input model.
    let other = cmd_synth(&SynthSpec::new(6, 25, 0.0, 3), &dir.path().join("other")).unwrap();
    let out = run(&[
        "localize",
        "--model",
        &path_str(&model),
        "--events",
        &path_str(&other.query),
        "--config",
        &path_str(&other.config),
        "--out",
        &path_str(&dir.path().join("loc")),
    ]);
    assert_code(&out, 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("geometry mismatch"));
}

#[test]
fn evaluate_rejects_mismatched_query_counts() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    std::fs::write(&a, "# 2,2,raw\n1,0\n0,1\n").unwrap();
    std::fs::write(&b, "# 3,2,raw\n1,0\n0,1\n1,1\n").unwrap();
    let out = run(&[
        "evaluate",
        "--matrix",
        &path_str(&a),
        "--matrix",
        &path_str(&b),
        "--tolerance",
        "0",
        "--out",
        &path_str(&dir.path().join("m")),
    ]);
    assert_code(&out, 1);
}

#[test]
fn synth_is_byte_reproducible_from_the_binary() {
    let dir = tempfile::tempdir().unwrap();
    for sub in ["a", "b"] {
        assert_code(
            &run(&[
                "synth",
                "--places",
                "5",
                "--pixels",
                "16",
                "--noise",
                "0.3",
                "--seed",
                "99",
                "--out",
                &path_str(&dir.path().join(sub)),
            ]),
            0,
        );
    }
    for name in ["reference.events", "query.events", "lens.cfg"] {
        let a = std::fs::read(dir.path().join("a").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between identical runs");
    }
}

#[test]
fn train_reports_architecture_and_writes_log() {
    let dir = tempfile::tempdir().unwrap();
    let (reference, _, config) = small_dataset(dir.path(), 0.0, 4);
    let model = dir.path().join("model.lens");
    let out = run(&[
        "train",
        "--events",
        &path_str(&reference),
        "--config",
        &path_str(&config),
        "--out",
        &path_str(&model),
    ]);
    assert_code(&out, 0);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert!(stdout.contains("layers: 16 -> 32 -> 6"));
    assert!(stdout.contains("parameters: "));

    // One `epoch,layer,eta,mean_abs_delta` line per epoch for both layers.
    let log = std::fs::read_to_string(dir.path().join("model.lens.log")).unwrap();
    let lines: Vec<&str> = log.lines().collect();
    assert_eq!(lines.len(), 64 + 128);
    assert!(lines[0].starts_with("0,feature,0.01,"));
    assert!(lines[64].starts_with("0,output,0.02,"));
    for line in &lines {
        assert_eq!(line.split(',').count(), 4);
    }
}

#[test]
fn evaluate_golden_regression() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "evaluate",
        "--matrix",
        &path_str(&golden.join("matrix.csv")),
        "--tolerance",
        "1",
        "--out",
        &path_str(dir.path()),
    ]);
    assert_code(&out, 0);
    for name in ["recall_at_n.csv", "pr_curve.csv", "auc.csv"] {
        let got = std::fs::read(dir.path().join(name)).unwrap();
        let want = std::fs::read(golden.join(name)).unwrap();
        assert_eq!(got, want, "{name} deviates from the golden file");
    }
}

#[test]
fn evaluate_same_matrix_twice_yields_identical_files() {
    let golden = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden");
    let dir = tempfile::tempdir().unwrap();
    let matrix = path_str(&golden.join("matrix.csv"));
    let out = run(&[
        "evaluate",
        "--matrix",
        &matrix,
        "--matrix",
        &matrix,
        "--tolerance",
        "1",
        "--out",
        &path_str(dir.path()),
    ]);
    assert_code(&out, 0);
    for name in ["recall_at_n.csv", "pr_curve.csv"] {
        let a = std::fs::read(dir.path().join("matrix").join(name)).unwrap();
        let b = std::fs::read(dir.path().join("matrix_2").join(name)).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn longer_sequences_do_not_hurt_noisy_recall() {
    // Paired run on one noisy set: L=4 must do at least as well as L=1.
    let dir = tempfile::tempdir().unwrap();
    let paths = cmd_synth(&SynthSpec::new(30, 64, 0.25, 11), dir.path()).unwrap();
    let config = Config::read_file(&paths.config).unwrap();
    let model = dir.path().join("model.lens");
    cmd_train(&config, &paths.reference, &model, None, None).unwrap();

    let mut recalls = Vec::new();
    for seq_len in [1usize, 4] {
        let cfg = Config { seq_len, ..config.clone() };
        let out = dir.path().join(format!("loc_{seq_len}"));
        let summary = cmd_localize(&cfg, &model, &paths.query, &out).unwrap();
        let m = SimilarityMatrix::read_csv(summary.seq_path).unwrap();
        let gt = GroundTruth::diagonal(summary.queries, 0);
        recalls.push(recall_at_n(&m, &gt, &[1]).unwrap()[0].1);
    }
    assert!(
        recalls[1] >= recalls[0],
        "L=4 recall {} fell below L=1 recall {}",
        recalls[1],
        recalls[0]
    );
}

#[test]
fn bins_average_consecutive_windows() {
    // The online pipeline groups four 1 s windows per query.
    let dir = tempfile::tempdir().unwrap();
    let paths = cmd_synth(&SynthSpec::new(8, 16, 0.0, 12), dir.path()).unwrap();
    let config = Config::read_file(&paths.config).unwrap();
    let model = dir.path().join("model.lens");
    cmd_train(&config, &paths.reference, &model, None, None).unwrap();

    let cfg = Config { bins: 4, seq_len: 1, ..config };
    let summary = cmd_localize(&cfg, &model, &paths.query, &dir.path().join("loc")).unwrap();
    assert_eq!(summary.queries, 2); // 8 windows / 4 bins
    assert_eq!(summary.references, 8);
}

#[test]
fn sweep_writes_one_row_per_grid_cell() {
    let dir = tempfile::tempdir().unwrap();
    let paths = cmd_synth(&SynthSpec::new(10, 36, 0.1, 13), dir.path()).unwrap();
    let grid = dir.path().join("grid.cfg");
    std::fs::write(
        &grid,
        format!(
            "ref = {}\nquery = {}\nconfig = {}\ntolerance = 1\npixels = 16,25\nfeat_multiplier = 1.5\nseq_len = 1,2\n",
            paths.reference.display(),
            paths.query.display(),
            paths.config.display(),
        ),
    )
    .unwrap();
    let summary = cmd_sweep(&grid, &dir.path().join("sweep")).unwrap();
    assert_eq!(summary.rows.len(), 4);
    let csv = std::fs::read_to_string(&summary.csv_path).unwrap();
    assert_eq!(csv.lines().count(), 5); // header + 4 cells
    assert!(csv.starts_with("# pixels,feat_multiplier,seq_len,recall_at_1,pr_auc"));
    for row in &summary.rows {
        assert!((0.0..=1.0).contains(&row.recall_at_1));
        assert!((0.0..=1.0).contains(&row.pr_auc));
    }
}

#[test]
fn localize_emits_matrices_and_matches() {
    let dir = tempfile::tempdir().unwrap();
    let (reference, query, config) = small_dataset(dir.path(), 0.0, 14);
    let model = dir.path().join("model.lens");
    let cfg = Config::read_file(&config).unwrap();
    cmd_train(&cfg, &reference, &model, None, None).unwrap();
    let out = run(&[
        "localize",
        "--model",
        &path_str(&model),
        "--events",
        &path_str(&query),
        "--config",
        &path_str(&config),
        "--seq-len",
        "2",
        "--out",
        &path_str(&dir.path().join("loc")),
    ]);
    assert_code(&out, 0);
    let seq = SimilarityMatrix::read_csv(dir.path().join("loc").join("similarity_seq.csv")).unwrap();
    assert_eq!((seq.queries(), seq.references()), (6, 6));
    assert_eq!(seq.provenance, lens_core::matching::Provenance::Sequence(2));
    let matches = std::fs::read_to_string(dir.path().join("loc").join("matches.csv")).unwrap();
    assert_eq!(matches.lines().count(), 7); // header + one line per query
}

/// Robot-style traverse on the full 128x128 sensor: each place lights a
/// subset of the pixels the default ROI + 8x8 center selection keeps, plus
/// background clutter that the crop and selection must discard.
fn robot_style_traverse(seed: u64, places: usize) -> String {
    let mut rng = StdRng::seed_from_u64(seed);
    let mut text = String::from("# 128,128\n");
    for p in 0..places {
        let t0 = p as u64 * 1_000_000;
        let mut cells: Vec<(u16, u16)> = (0..10)
            .flat_map(|r| (0..10).map(move |c| (r, c)))
            .collect();
        cells.shuffle(&mut rng);
        for &(r, c) in &cells[..20] {
            let x = 24 + 8 * c + 4;
            let y = 8 * r + 4;
            let n = rng.random_range(12..30u64);
            for k in 0..n {
                let _ = writeln!(text, "{},{x},{y},{}", t0 + k * (1_000_000 / n), k % 2);
            }
        }
        for _ in 0..60 {
            let x = rng.random_range(0..128u16);
            let y = rng.random_range(0..128u16);
            let t = t0 + rng.random_range(0..1_000_000u64);
            let _ = writeln!(text, "{t},{x},{y},1");
        }
    }
    text
}

#[test]
fn default_config_handles_a_full_sensor_traverse() {
    let dir = tempfile::tempdir().unwrap();
    let events = dir.path().join("traverse.events");
    std::fs::write(&events, robot_style_traverse(21, 12)).unwrap();

    let config = Config::default(); // 128x128 -> ROI 80x80 -> 10x10 inputs
    let model = dir.path().join("model.lens");
    let summary = cmd_train(&config, &events, &model, None, None).unwrap();
    assert_eq!((summary.n_in, summary.n_feat, summary.n_out), (100, 200, 12));

    // Noiseless replay of the mapping traverse must localize exactly.
    let loc = cmd_localize(&config, &model, &events, &dir.path().join("loc")).unwrap();
    let seq = SimilarityMatrix::read_csv(loc.seq_path).unwrap();
    let gt = GroundTruth::diagonal(12, 0);
    assert_eq!(recall_at_n(&seq, &gt, &[1]).unwrap()[0].1, 1.0);
}
