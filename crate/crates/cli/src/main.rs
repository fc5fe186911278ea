//! Command-line front end: dataset generation, contrastive training,
//! evaluation sweeps, and sliding-window detection runs.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};

use awsp_core::encoder::{
    embed_forward, prepare_training_views, train_encoder, EncoderParams, TrainConfig,
};
use awsp_core::error::CoreError;
use awsp_core::io;
use awsp_core::jamming::{FalseTargetParams, FamilyParams, JammingSpec, PullOffMode, PullOffParams, SamplingParams};
use awsp_core::protonet::{classify, compute_prototypes, evaluate, PrototypeSet};
use awsp_core::scattering::{
    build_filterbank, compute_norm_scales, feature_normalize, scatter, FilterBank, NormScales,
    ScatterConfig,
};
use awsp_core::scene::{
    compose_scene, generate_dataset, DatasetOptions, LabeledSample, Protocol, SceneSpec,
    TargetSpec, NUM_CLASSES,
};
use awsp_core::suppression::{
    build_window_training_set, detect, ClassifierBundle, DetectionConfig, WindowTrainOptions,
};
use awsp_core::waveform::{PulseMatrix, RadarConfig, SPEED_OF_LIGHT};

#[derive(Parser)]
#[command(name = "awsp", about = "Radar jamming recognition and suppression pipeline")]
struct Cli {
    /// JSON configuration file; command-line overrides take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Dotted-path overrides, e.g. --set train.epochs=10.
    #[arg(long = "set", global = true)]
    sets: Vec<String>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a labeled dataset file plus its JSON manifest.
    Gen {
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the encoder on a dataset; writes weights, an auxiliary bundle
    /// (feature scales + prototypes), and the loss curve.
    Train {
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Train a binary window-level detector instead of the 11-class
        /// recognizer.
        #[arg(long)]
        windowed: bool,
    },
    /// Evaluate trained weights over an SNR sweep; one metrics JSON and
    /// confusion CSV per SNR point.
    Eval {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run sliding-window detection on a synthesized jamming scene.
    Detect {
        #[arg(long)]
        weights: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DatasetSection {
    protocol: String,
    per_class: usize,
    seed: u64,
    snr_override_db: Option<f64>,
}

impl Default for DatasetSection {
    fn default() -> Self {
        DatasetSection { protocol: "train".into(), per_class: 200, seed: 1, snr_override_db: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ScatterSection {
    scales_j: usize,
    max_order: usize,
}

impl Default for ScatterSection {
    fn default() -> Self {
        ScatterSection { scales_j: 4, max_order: 1 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct EvalSection {
    support_per_class: usize,
    query_per_class: usize,
    snrs_db: Vec<f64>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            support_per_class: 100,
            query_per_class: 50,
            snrs_db: vec![-10.0, -6.0, -3.0, 0.0, 10.0],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct DetectSection {
    window_len: usize,
    threshold_frac: f64,
    target_bin: usize,
    snr_db: f64,
    cnr_db: Option<f64>,
    seed: u64,
}

impl Default for DetectSection {
    fn default() -> Self {
        DetectSection {
            window_len: 48,
            threshold_frac: 0.5,
            target_bin: 60,
            snr_db: 10.0,
            cnr_db: None,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct WindowSection {
    scenes_per_kind: usize,
    window_len: usize,
    padded_len: usize,
    snr_db: f64,
}

impl Default for WindowSection {
    fn default() -> Self {
        let d = WindowTrainOptions::default();
        WindowSection {
            scenes_per_kind: d.scenes_per_kind,
            window_len: d.window_len,
            padded_len: d.padded_len,
            snr_db: d.snr_db,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct AppConfig {
    dataset: DatasetSection,
    scatter: ScatterSection,
    train: TrainConfig,
    eval: EvalSection,
    detect: DetectSection,
    window: WindowSection,
}

/// Everything besides raw weights that a classifier needs at run time.
#[derive(Debug, Clone, Serialize, Deserialize)]
struct AuxBundle {
    scatter: ScatterSection,
    norm_scales: Vec<f64>,
    prototype_centers: Vec<Vec<f64>>,
    prototype_class_ids: Vec<usize>,
    train_width: usize,
}

#[derive(Debug)]
enum CliError {
    Config(String),
    Io(String),
    Numeric(String),
    Acceptance(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Numeric(_) => 4,
            CliError::Acceptance(_) => 5,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Config(m) | CliError::Io(m) | CliError::Numeric(m) | CliError::Acceptance(m) => m,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::Io(_) | CoreError::Serde(_) => CliError::Io(msg),
            CoreError::Numeric(_) | CoreError::Training { .. } => CliError::Numeric(msg),
            _ => CliError::Config(msg),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Ok(threads) = std::env::var("AWSP_THREADS") {
        if let Ok(n) = threads.parse::<usize>() {
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn load_config(cli: &Cli) -> Result<AppConfig, CliError> {
    let mut value = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)?;
            serde_json::from_str::<serde_json::Value>(&text)
                .map_err(|e| CliError::Config(format!("bad config file: {e}")))?
        }
        None => serde_json::json!({}),
    };
    for set in &cli.sets {
        let (key, raw) = set
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects key=value, got {set:?}")))?;
        let parsed: serde_json::Value =
            serde_json::from_str(raw).unwrap_or(serde_json::Value::String(raw.to_string()));
        let mut cursor = &mut value;
        let parts: Vec<&str> = key.split('.').collect();
        for part in &parts[..parts.len() - 1] {
            cursor = cursor
                .as_object_mut()
                .ok_or_else(|| CliError::Config(format!("cannot set {key}: not an object")))?
                .entry(part.to_string())
                .or_insert(serde_json::json!({}));
        }
        cursor
            .as_object_mut()
            .ok_or_else(|| CliError::Config(format!("cannot set {key}: not an object")))?
            .insert(parts[parts.len() - 1].to_string(), parsed);
    }
    let mut config: AppConfig = serde_json::from_value(value)
        .map_err(|e| CliError::Config(format!("invalid configuration: {e}")))?;
    if let Some(seed) = cli.seed {
        config.dataset.seed = seed;
        config.train.seed = seed;
        config.detect.seed = seed;
    }
    Ok(config)
}

fn protocol_of(cfg: &AppConfig) -> Result<Protocol, CliError> {
    match cfg.dataset.protocol.as_str() {
        "train" => Ok(Protocol::Train),
        "test" => Ok(Protocol::Test),
        other => Err(CliError::Config(format!("unknown protocol {other:?}"))),
    }
}

fn scatter_config(s: &ScatterSection) -> ScatterConfig {
    ScatterConfig {
        scales_j: s.scales_j,
        max_order: s.max_order,
        orientations: 6,
        input_channels: 2,
    }
}

fn aux_path(weights: &Path) -> PathBuf {
    weights.with_extension("aux.json")
}

fn run(cli: Cli) -> Result<(), CliError> {
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Gen { out } => cmd_gen(&config, out),
        Command::Train { data, out, windowed } => {
            if *windowed {
                cmd_train_windowed(&config, out)
            } else {
                cmd_train(&config, data.as_deref(), out)
            }
        }
        Command::Eval { weights, out_dir } => cmd_eval(&config, weights, out_dir),
        Command::Detect { weights, out_dir } => cmd_detect(&config, weights, out_dir),
        Command::Selftest => cmd_selftest(),
    }
}

fn dataset_options(cfg: &AppConfig) -> Result<DatasetOptions, CliError> {
    Ok(DatasetOptions {
        protocol: protocol_of(cfg)?,
        per_class: cfg.dataset.per_class,
        seed: cfg.dataset.seed,
        snr_override_db: cfg.dataset.snr_override_db,
    })
}

fn cmd_gen(cfg: &AppConfig, out: &Path) -> Result<(), CliError> {
    let opts = dataset_options(cfg)?;
    let (samples, manifest) = generate_dataset(&opts)?;
    io::write_dataset(out, &samples, &manifest)?;
    println!(
        "wrote {} samples ({} per class) to {}",
        samples.len(),
        opts.per_class,
        out.display()
    );
    Ok(())
}

/// Scatter + normalize a set of labeled matrices with frozen scales.
fn featurize(
    samples: &[(PulseMatrix, usize)],
    bank: &FilterBank,
    sc: &ScatterConfig,
    norm: &NormScales,
) -> Result<Vec<(awsp_core::scattering::ScatterFeatures, usize)>, CliError> {
    use rayon::prelude::*;
    samples
        .par_iter()
        .map(|(m, label)| {
            let f = scatter(m, bank, sc)?;
            Ok((feature_normalize(&f, norm)?, *label))
        })
        .collect()
}

fn train_on_matrices(
    cfg: &AppConfig,
    base: &[(PulseMatrix, usize)],
    train_width: usize,
    out: &Path,
) -> Result<(), CliError> {
    let bank = build_filterbank(14, 14)?;
    let sc = scatter_config(&cfg.scatter);
    let mut views = prepare_training_views(base, &bank, &sc, &cfg.train)?;
    let features: Vec<awsp_core::scattering::ScatterFeatures> =
        views.iter().map(|v| v.features.clone()).collect();
    let norm = compute_norm_scales(&features)?;
    for v in views.iter_mut() {
        v.features = feature_normalize(&v.features, &norm)?;
    }
    let (params, curve) = train_encoder(&views, &cfg.train)?;
    // Prototypes from the original (non-augmented) training views.
    let mut support = Vec::new();
    for v in views.iter().step_by(3) {
        support.push((embed_forward(&v.features, &params)?, v.label));
    }
    let protos = compute_prototypes(&support)?;
    params.save(out)?;
    let aux = AuxBundle {
        scatter: cfg.scatter.clone(),
        norm_scales: norm.scales,
        prototype_centers: protos.centers,
        prototype_class_ids: protos.class_ids,
        train_width,
    };
    std::fs::write(aux_path(out), serde_json::to_string_pretty(&aux).unwrap())?;
    io::write_loss_csv(&out.with_extension("loss.csv"), &curve)?;
    println!(
        "trained {} epochs, final mean loss {:.4}; weights at {}",
        curve.len(),
        curve.last().copied().unwrap_or(f64::NAN),
        out.display()
    );
    Ok(())
}

fn cmd_train(cfg: &AppConfig, data: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let radar = RadarConfig::table_train();
    let samples: Vec<LabeledSample> = match data {
        Some(path) => io::read_dataset(path, &radar)?,
        None => generate_dataset(&dataset_options(cfg)?)?.0,
    };
    let width = samples
        .first()
        .map(|s| s.matrix.data.dim().1)
        .ok_or_else(|| CliError::Config("dataset is empty".into()))?;
    let base: Vec<(PulseMatrix, usize)> =
        samples.into_iter().map(|s| (s.matrix, s.label as usize)).collect();
    train_on_matrices(cfg, &base, width, out)
}

fn cmd_train_windowed(cfg: &AppConfig, out: &Path) -> Result<(), CliError> {
    let radar = RadarConfig::table_train();
    let opts = WindowTrainOptions {
        scenes_per_kind: cfg.window.scenes_per_kind,
        window_len: cfg.window.window_len,
        padded_len: cfg.window.padded_len,
        snr_db: cfg.window.snr_db,
        seed: cfg.dataset.seed,
    };
    let base = build_window_training_set(&radar, &opts)?;
    train_on_matrices(cfg, &base, opts.padded_len, out)
}

fn load_bundle(weights: &Path) -> Result<(ClassifierBundle, AuxBundle), CliError> {
    let params = EncoderParams::load(weights)?;
    let text = std::fs::read_to_string(aux_path(weights))?;
    let aux: AuxBundle = serde_json::from_str(&text)
        .map_err(|e| CliError::Io(format!("bad auxiliary bundle: {e}")))?;
    let bundle = ClassifierBundle {
        params,
        protos: PrototypeSet {
            centers: aux.prototype_centers.clone(),
            class_ids: aux.prototype_class_ids.clone(),
        },
        bank: build_filterbank(14, 14)?,
        scatter_cfg: scatter_config(&aux.scatter),
        norm: NormScales { scales: aux.norm_scales.clone() },
        train_width: aux.train_width,
    };
    Ok((bundle, aux))
}

fn cmd_eval(cfg: &AppConfig, weights: &Path, out_dir: &Path) -> Result<(), CliError> {
    let (bundle, _) = load_bundle(weights)?;
    std::fs::create_dir_all(out_dir)?;
    for &snr in &cfg.eval.snrs_db {
        // Fresh support and query sets at this SNR point.
        let support_opts = DatasetOptions {
            protocol: Protocol::Train,
            per_class: cfg.eval.support_per_class,
            seed: cfg.dataset.seed ^ 0x5355_5050,
            snr_override_db: Some(snr),
        };
        let query_opts = DatasetOptions {
            protocol: Protocol::Train,
            per_class: cfg.eval.query_per_class,
            seed: cfg.dataset.seed ^ 0x5155_4552,
            snr_override_db: Some(snr),
        };
        let (support, _) = generate_dataset(&support_opts)?;
        let (queries, _) = generate_dataset(&query_opts)?;
        let sup: Vec<(PulseMatrix, usize)> =
            support.into_iter().map(|s| (s.matrix, s.label as usize)).collect();
        let qry: Vec<(PulseMatrix, usize)> =
            queries.into_iter().map(|s| (s.matrix, s.label as usize)).collect();
        let sup_feats = featurize(&sup, &bundle.bank, &bundle.scatter_cfg, &bundle.norm)?;
        let qry_feats = featurize(&qry, &bundle.bank, &bundle.scatter_cfg, &bundle.norm)?;
        let mut sup_emb = Vec::with_capacity(sup_feats.len());
        for (f, label) in &sup_feats {
            sup_emb.push((embed_forward(f, &bundle.params)?, *label));
        }
        let protos = compute_prototypes(&sup_emb)?;
        let mut preds = Vec::with_capacity(qry_feats.len());
        let mut truths = Vec::with_capacity(qry_feats.len());
        for (f, label) in &qry_feats {
            let emb = embed_forward(f, &bundle.params)?;
            let pred = classify(&emb, &protos)?;
            preds.push(protos.class_ids[pred.class_index]);
            truths.push(*label);
        }
        let metrics = evaluate(&preds, &truths, NUM_CLASSES)?;
        let tag = format!("snr_{}", snr).replace('-', "m").replace('.', "p");
        std::fs::write(
            out_dir.join(format!("metrics_{tag}.json")),
            serde_json::to_string_pretty(&metrics).unwrap(),
        )?;
        let confusion = ndarray::Array2::from_shape_fn(
            (NUM_CLASSES, NUM_CLASSES),
            |(i, j)| metrics.confusion[i][j] as usize,
        );
        io::write_confusion_csv(&out_dir.join(format!("confusion_{tag}.csv")), &confusion)?;
        println!(
            "SNR {snr:+.1} dB: accuracy {:.4}, macro-F1 {:.4}",
            metrics.accuracy, metrics.macro_f1
        );
    }
    Ok(())
}

fn detect_scene(cfg: &DetectSection, radar: &RadarConfig) -> Result<SceneSpec, CliError> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(cfg.seed);
    let fs = radar.sample_rate_hz;
    let range_m = cfg.target_bin as f64 * SPEED_OF_LIGHT / (2.0 * fs);
    let cpi = radar.cpi_duration();
    let rgj = JammingSpec {
        family: FamilyParams::Rgj {
            pull: PullOffParams {
                mode: PullOffMode::Range,
                drag_speed_mps: rng.gen_range(300.0..600.0),
                drag_accel_mps2: rng.gen_range(50.0..200.0),
                standoff_frac: 0.2,
                pull_frac: 0.6,
                close_frac: 0.2,
                peak_range_m: None,
                peak_velocity_mps: None,
                time_dilation: rng.gen_range(300.0..600.0),
            },
            targets: FalseTargetParams {
                gains: vec![num_complex::Complex64::new(1.0, 0.0)],
                delays_s: vec![0.0],
                dopplers_hz: vec![0.0],
            },
        },
        theta_rad: rng.gen_range(-0.3..0.3),
        tau_s: rng.gen_range(1.5e-6..2.5e-6),
        velocity_mps: 0.0,
        seed: cfg.seed ^ 0x1111,
    };
    let isrj = JammingSpec {
        family: FamilyParams::Isrj {
            sampling: SamplingParams {
                slice_width_s: 0.05e-6,
                slice_period_s: 0.25e-6,
                repeat_spacing_s: rng.gen_range(0.06e-6..0.12e-6),
            },
        },
        theta_rad: rng.gen_range(-0.3..0.3),
        tau_s: rng.gen_range(2.5e-6..3.2e-6),
        velocity_mps: 0.0,
        seed: cfg.seed ^ 0x2222,
    };
    let _ = cpi;
    Ok(SceneSpec {
        config: radar.clone(),
        targets: vec![TargetSpec {
            range_m,
            velocity_mps: rng.gen_range(-300.0..300.0),
            angle_rad: 0.0,
            amplitude: num_complex::Complex64::new(1.0, 0.0),
        }],
        jammers: vec![rgj, isrj],
        snr_db: cfg.snr_db,
        inr_db: cfg.snr_db,
        cnr_db: cfg.cnr_db,
        clutter_correlation: 0.9,
        look_angle_rad: 0.0,
        seed: cfg.seed ^ 0x3333,
    })
}

fn cmd_detect(cfg: &AppConfig, weights: &Path, out_dir: &Path) -> Result<(), CliError> {
    let (bundle, _) = load_bundle(weights)?;
    std::fs::create_dir_all(out_dir)?;
    let radar = RadarConfig::table_train();
    let scene = detect_scene(&cfg.detect, &radar)?;
    let z = compose_scene(&scene)?;
    let det_cfg = DetectionConfig {
        window_len: cfg.detect.window_len,
        threshold_frac: cfg.detect.threshold_frac,
        target_class: 0,
    };
    let profile = detect(&z, &bundle, &det_cfg)?;
    let mut probs = profile.probs.clone();
    probs.resize(profile.accumulated.len(), 0.0);
    io::write_profile_csv(&out_dir.join("profile.csv"), &probs, &profile.accumulated)?;
    std::fs::write(
        out_dir.join("detections.json"),
        serde_json::to_string_pretty(&profile.detections).unwrap(),
    )?;
    println!(
        "target bin {}: {} detection(s): {:?}",
        cfg.detect.target_bin,
        profile.detections.len(),
        profile.detections.iter().map(|d| d.bin).collect::<Vec<_>>()
    );
    Ok(())
}

fn cmd_selftest() -> Result<(), CliError> {
    use awsp_core::scattering::{dtcwt_forward, dtcwt_inverse};
    use ndarray::Array2;
    use num_complex::Complex64;
    use rand::{Rng, SeedableRng};
    let mut failures = 0;
    let mut check = |name: &str, ok: bool| {
        println!("{}: {}", name, if ok { "pass" } else { "FAIL" });
        if !ok {
            failures += 1;
        }
    };
    let bank = build_filterbank(14, 14)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);

    // Transform round trip.
    let plane = Array2::from_shape_simple_fn((64, 64), || rng.gen::<f64>() - 0.5);
    let pyr = dtcwt_forward(&plane, &bank, 3)?;
    let back = dtcwt_inverse(&pyr, &bank)?;
    let err = (&back - &plane).iter().map(|v| v * v).sum::<f64>().sqrt()
        / plane.iter().map(|v| v * v).sum::<f64>().sqrt();
    check("wavelet round trip", err <= 1e-10);

    // Scattering non-expansiveness.
    let sc = ScatterConfig { scales_j: 2, max_order: 1, orientations: 6, input_channels: 2 };
    let radar = RadarConfig::table_train();
    let mk = |rng: &mut rand_chacha::ChaCha8Rng| PulseMatrix {
        data: Array2::from_shape_simple_fn((16, 16), || {
            Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        }),
        config: radar.clone(),
    };
    let mut ok = true;
    for _ in 0..5 {
        let x = mk(&mut rng);
        let y = mk(&mut rng);
        let fx = scatter(&x, &bank, &sc)?;
        let fy = scatter(&y, &bank, &sc)?;
        let df = (&fx.tensor - &fy.tensor).iter().map(|v| v * v).sum::<f64>().sqrt();
        let dz = (&x.data - &y.data).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        ok &= df <= dz * (1.0 + 1e-6);
    }
    check("scattering non-expansive", ok);

    // Contrastive loss at the identical-embedding point.
    let raw = ndarray::Array2::from_elem((6, 8), 1.0);
    let labels = vec![0usize, 0, 0, 1, 1, 1];
    let (loss, _) = awsp_core::encoder::scl_loss(&raw, &labels, 0.07)?;
    check("contrastive loss identity point", (loss - 6.0 * 5f64.ln()).abs() < 1e-12);

    // Isolated-spike suppression.
    let mut probs = vec![0.0; 100];
    probs[10] = 1.0;
    probs[40] = 1.0;
    probs[90] = 1.0;
    let acc = awsp_core::suppression::accumulate_profile(&probs, 8);
    check(
        "isolated spike suppression",
        awsp_core::suppression::detect_targets(&acc, 8, 0.5).is_empty(),
    );

    if failures > 0 {
        return Err(CliError::Acceptance(format!("{failures} selftest check(s) failed")));
    }
    Ok(())
}
