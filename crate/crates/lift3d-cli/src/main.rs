//! `lift3d` — recover 3D landmark shape (up to scale) from 2D landmarks.
//!
//! Subcommands: `synth` generates synthetic 3D landmark datasets, `train`
//! fits a depth-regression model, `eval` scores a model on a dataset,
//! `reconstruct` lifts one 2D landmark file to 3D, and `bench` measures
//! reconstruction throughput.
//!
//! Every failure exits nonzero and prints a single line to stderr of the
//! form `error[E_CODE]: message`. Exit codes by error class:
//!
//! | code | class                | meaning                                   |
//! |------|----------------------|-------------------------------------------|
//! | 2    | (clap)               | bad command-line usage                    |
//! | 3    | E_CONFIG             | invalid training/eval configuration       |
//! | 4    | E_SPEC               | invalid synthetic-family specification    |
//! | 5    | E_PARSE              | malformed structured-text file            |
//! | 6    | E_CORRUPT            | file failed checksum / truncated          |
//! | 7    | E_VERSION            | unsupported format version                |
//! | 8    | E_IO                 | file system error                         |
//! | 9    | E_EMPTY              | empty dataset                             |
//! | 10   | E_HETEROGENEOUS      | samples disagree on landmark count        |
//! | 11   | E_LANDMARK_COUNT     | model/input landmark count mismatch       |
//! | 12   | E_MISSING_NO_IMPUTER | missing landmarks but no imputer          |
//! | 13   | E_DEGENERATE         | shape too degenerate to standardize       |
//! | 14   | E_LENGTH             | internal dimension mismatch               |
//! | 15   | E_INVARIANT (etc.)   | any other invariant violation             |

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lift3d::dataset::{load_dataset, load_landmarks2d, save_dataset, DatasetFile};
use lift3d::geometry::{Landmarks2D, Shape3D, WeakPerspectiveCamera};
use lift3d::pipeline::{
    benchmark_reconstruction, evaluate, load_model, reconstruct, save_model, train, BatchSize,
    TrainingConfig,
};
use lift3d::rng::{self, TAG_EVAL};
use lift3d::synth::{generate_synthetic, FamilyKind, SyntheticFamilySpec};
use lift3d::{Error, Result};

#[derive(Parser)]
#[command(
    name = "lift3d",
    version,
    about = "Recover 3D landmark shape (up to scale) from 2D landmarks in one image",
    long_about = None,
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic 3D landmark dataset (chain, sheet, or box family)
    Synth(SynthArgs),
    /// Train a depth-regression model on a 3D landmark dataset
    Train(TrainArgs),
    /// Evaluate a trained model on a 3D landmark dataset
    Eval(EvalArgs),
    /// Reconstruct a 3D shape from one 2D landmark file
    Reconstruct(ReconstructArgs),
    /// Measure reconstruction throughput
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Shape family to generate
    #[arg(long, value_parser = parse_family, required_unless_present = "spec")]
    family: Option<FamilyKind>,
    /// TOML spec file; flags override its fields
    #[arg(long)]
    spec: Option<PathBuf>,
    /// Landmarks per sample
    #[arg(long)]
    n: Option<usize>,
    /// Number of samples
    #[arg(long)]
    samples: Option<usize>,
    /// Generator seed
    #[arg(long)]
    seed: Option<u64>,
    /// Sheet: depth-wave amplitude range
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    amplitude: Option<Vec<f64>>,
    /// Sheet: depth-wave spatial frequency range
    #[arg(long, num_args = 2, value_names = ["LO", "HI"], allow_negative_numbers = true)]
    frequency: Option<Vec<f64>>,
    /// Sheet: in-plane warp coupling
    #[arg(long, allow_negative_numbers = true)]
    warp: Option<f64>,
    /// Chain: maximum bend angle per joint (degrees)
    #[arg(long, allow_negative_numbers = true)]
    bend_range: Option<f64>,
    /// Chain: maximum sway angle per joint (degrees)
    #[arg(long, allow_negative_numbers = true)]
    sway_range: Option<f64>,
    /// Box: relative axis-length jitter
    #[arg(long, allow_negative_numbers = true)]
    aspect_jitter: Option<f64>,
    /// Box: per-vertex Gaussian jitter
    #[arg(long, allow_negative_numbers = true)]
    vertex_jitter: Option<f64>,
    /// Output dataset file
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct TrainArgs {
    /// Training dataset (3D landmark file)
    #[arg(long)]
    data: PathBuf,
    /// TOML config file mirroring the training configuration; flags override
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output checkpoint file
    #[arg(long)]
    out: PathBuf,
    /// Also write the epoch-by-epoch training history here
    #[arg(long)]
    history: Option<PathBuf>,
    /// Maximum number of epochs
    #[arg(long)]
    epochs: Option<usize>,
    /// Gradient steps per epoch batch
    #[arg(long)]
    max_iters: Option<usize>,
    /// RMSProp learning rate
    #[arg(long, allow_negative_numbers = true)]
    learning_rate: Option<f64>,
    /// Non-improving validation evaluations before stopping
    #[arg(long)]
    patience: Option<usize>,
    /// Master seed for every random stream
    #[arg(long)]
    seed: Option<u64>,
    /// Samples per gradient step: "full" or a positive integer
    #[arg(long, value_parser = parse_batch_size)]
    batch_size: Option<BatchSize>,
    /// Fraction of samples held out for validation
    #[arg(long, allow_negative_numbers = true)]
    validation_fraction: Option<f64>,
    /// Augmented copies of each validation shape
    #[arg(long)]
    validation_expansion: Option<usize>,
    /// 2D noise fraction used in augmentation
    #[arg(long, allow_negative_numbers = true)]
    noise_fraction: Option<f64>,
    /// Train an imputer with this many landmarks hidden per sample
    /// (0 disables missing-data training)
    #[arg(long)]
    missing: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Trained model checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Test dataset (3D landmark file)
    #[arg(long)]
    data: PathBuf,
    /// Camera scale used to project the test shapes
    #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
    lambda: f64,
    /// 2D noise fraction added to the projected test landmarks
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    noise: f64,
    /// Landmarks hidden per test sample
    #[arg(long, default_value_t = 0)]
    missing: usize,
    /// Seed for test-time noise and missing masks
    #[arg(long, default_value_t = 7)]
    seed: u64,
    /// Write the report here instead of stdout (throughput goes to stderr)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ReconstructArgs {
    /// Trained model checkpoint
    #[arg(long)]
    model: PathBuf,
    /// 2D landmark file ("missing" lines allowed with an imputer-equipped model)
    #[arg(long)]
    landmarks: PathBuf,
    /// Output 3D shape file (single-sample dataset format)
    #[arg(long)]
    out: PathBuf,
    /// Also write a Wavefront OBJ mesh (quads when the landmark count
    /// factors as a p x q grid in row-major order; point cloud otherwise)
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// Trained model checkpoint
    #[arg(long)]
    model: PathBuf,
    /// Number of reconstructions to time
    #[arg(long, default_value_t = 10_000)]
    repetitions: usize,
    /// 2D landmark file to reconstruct; defaults to a deterministic
    /// synthetic probe matching the model's landmark count
    #[arg(long)]
    landmarks: Option<PathBuf>,
}

fn parse_family(s: &str) -> std::result::Result<FamilyKind, String> {
    s.parse::<FamilyKind>().map_err(|e| e.to_string())
}

fn parse_batch_size(s: &str) -> std::result::Result<BatchSize, String> {
    if s == "full" {
        return Ok(BatchSize::Full);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected \"full\" or a positive integer, got '{s}'")),
        Ok(k) => Ok(BatchSize::Size(k)),
    }
}

fn main() -> ExitCode {
    env_logger::init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Synth(args) => run_synth(args),
        Command::Train(args) => run_train(args),
        Command::Eval(args) => run_eval(args),
        Command::Reconstruct(args) => run_reconstruct(args),
        Command::Bench(args) => run_bench(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error[{}]: {err}", err.code());
            ExitCode::from(exit_code(&err))
        }
    }
}

/// Stable exit code per error class (documented in the crate-level help).
fn exit_code(err: &Error) -> u8 {
    match err.code() {
        "E_CONFIG" => 3,
        "E_SPEC" => 4,
        "E_PARSE" => 5,
        "E_CORRUPT" => 6,
        "E_VERSION" => 7,
        "E_IO" => 8,
        "E_EMPTY" => 9,
        "E_HETEROGENEOUS" => 10,
        "E_LANDMARK_COUNT" => 11,
        "E_MISSING_NO_IMPUTER" => 12,
        "E_DEGENERATE" => 13,
        "E_LENGTH" => 14,
        _ => 15,
    }
}

fn read_toml<T: serde::de::DeserializeOwned>(path: &Path, what: &str) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })?;
    toml::from_str(&text).map_err(|e| {
        let line = e
            .span()
            .map(|s| text[..s.start.min(text.len())].matches('\n').count() + 1)
            .unwrap_or(0);
        // The pretty multi-line TOML rendering breaks the single-line error
        // contract; keep just the message.
        let message: String = e.message().split_whitespace().collect::<Vec<_>>().join(" ");
        Error::ParseError {
            line,
            message: format!("{what} {}: {message}", path.display()),
        }
    })
}

fn run_synth(args: SynthArgs) -> Result<()> {
    let mut spec = match (&args.spec, args.family) {
        (Some(path), _) => read_toml::<SyntheticFamilySpec>(path, "synthetic spec")?,
        (None, Some(kind)) => match kind {
            FamilyKind::Chain => SyntheticFamilySpec::chain_default(),
            FamilyKind::Sheet => SyntheticFamilySpec::sheet_default(),
            FamilyKind::Box => SyntheticFamilySpec::box_default(),
        },
        (None, None) => unreachable!("clap requires --family unless --spec is present"),
    };
    if let Some(kind) = args.family {
        if args.spec.is_some() && kind != spec.kind {
            // Switching family on top of a spec file: take the new family's
            // default landmark count unless --n also overrides it.
            let defaults = match kind {
                FamilyKind::Chain => SyntheticFamilySpec::chain_default(),
                FamilyKind::Sheet => SyntheticFamilySpec::sheet_default(),
                FamilyKind::Box => SyntheticFamilySpec::box_default(),
            };
            spec.n = defaults.n;
        }
        spec.kind = kind;
    }
    if let Some(n) = args.n {
        spec.n = n;
    }
    if let Some(samples) = args.samples {
        spec.sample_count = samples;
    }
    if let Some(seed) = args.seed {
        spec.seed = seed;
    }
    if let Some(a) = &args.amplitude {
        spec.sheet.amplitude = (a[0], a[1]);
    }
    if let Some(f) = &args.frequency {
        spec.sheet.frequency = (f[0], f[1]);
    }
    if let Some(w) = args.warp {
        spec.sheet.warp = w;
    }
    if let Some(b) = args.bend_range {
        spec.chain.bend_range = b;
    }
    if let Some(s) = args.sway_range {
        spec.chain.sway_range = s;
    }
    if let Some(a) = args.aspect_jitter {
        spec.box_.aspect_jitter = a;
    }
    if let Some(v) = args.vertex_jitter {
        spec.box_.vertex_jitter = v;
    }

    let dataset = generate_synthetic(&spec)?;
    save_dataset(&args.out, &dataset)?;
    log::info!("generated {} {} samples (n = {})", dataset.len(), spec.kind, spec.n);
    eprintln!(
        "wrote {} samples (family {}, n = {}, seed {}) to {}",
        dataset.len(),
        spec.kind,
        spec.n,
        spec.seed,
        args.out.display()
    );
    Ok(())
}

fn run_train(args: TrainArgs) -> Result<()> {
    let mut config = match &args.config {
        Some(path) => read_toml::<TrainingConfig>(path, "training config")?,
        None => TrainingConfig::default(),
    };
    if let Some(v) = args.epochs {
        config.epochs = v;
    }
    if let Some(v) = args.max_iters {
        config.max_iters_per_epoch = v;
    }
    if let Some(v) = args.learning_rate {
        config.learning_rate = v;
    }
    if let Some(v) = args.patience {
        config.patience = v;
    }
    if let Some(v) = args.seed {
        config.seed = v;
        config.augmentation.seed = v;
    }
    if let Some(v) = args.batch_size {
        config.batch_size = v;
    }
    if let Some(v) = args.validation_fraction {
        config.validation_fraction = v;
    }
    if let Some(v) = args.validation_expansion {
        config.validation_expansion = v;
    }
    if let Some(v) = args.noise_fraction {
        config.augmentation.noise_fraction = v;
    }
    if let Some(k) = args.missing {
        config.missing_data.enabled = k > 0;
        if k > 0 {
            config.missing_data.count = k;
        }
    }

    let dataset = load_dataset(&args.data)?;
    log::info!("loaded {} shapes (n = {}) from {}", dataset.len(), dataset.n(), args.data.display());
    let shapes: Vec<Shape3D> = dataset.shapes().cloned().collect();
    let (model, history) = train(&shapes, &config)?;
    save_model(&args.out, &model)?;
    if let Some(path) = &args.history {
        write_text(path, &history.render_text())?;
    }
    log::debug!("config hash {}", model.config_hash);
    eprintln!(
        "trained {} epochs (best epoch {}, validation error {:.6}{}); checkpoint written to {}",
        history.epochs_run,
        history.best_epoch,
        history.best_val_error,
        if history.stopped_early { ", stopped early" } else { "" },
        args.out.display()
    );
    Ok(())
}

fn run_eval(args: EvalArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let dataset = load_dataset(&args.data)?;
    let shapes: Vec<Shape3D> = dataset.shapes().cloned().collect();
    let camera = WeakPerspectiveCamera::new(args.lambda)?;
    let mut rng = rng::derive(args.seed, &[TAG_EVAL]);
    let report = evaluate(&model, &shapes, &camera, args.noise, args.missing, &mut rng)?;

    let text = report.render_text();
    match &args.out {
        Some(path) => write_text(path, &text)?,
        None => print!("{text}"),
    }
    eprintln!(
        "mean error {:.6} over {} samples; throughput {:.1} reconstructions/s ({:.3} s)",
        report.mean_error,
        report.per_sample_errors.len(),
        report.reconstructions_per_second,
        report.wall_seconds
    );
    Ok(())
}

fn run_reconstruct(args: ReconstructArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let landmarks = load_landmarks2d(&args.landmarks)?;
    let shape = reconstruct(&model, &landmarks)?;

    let mut out = DatasetFile::new(shape.n(), "standardized")?;
    out.push("reconstruction", shape.clone())?;
    save_dataset(&args.out, &out)?;
    if let Some(path) = &args.mesh {
        write_text(path, &mesh_text(&shape))?;
    }
    eprintln!(
        "reconstructed {} landmarks ({} observed) to {}",
        shape.n(),
        landmarks.observed_count(),
        args.out.display()
    );
    Ok(())
}

fn run_bench(args: BenchArgs) -> Result<()> {
    let model = load_model(&args.model)?;
    let landmarks = match &args.landmarks {
        Some(path) => load_landmarks2d(path)?,
        None => bench_probe(model.n)?,
    };
    let report = benchmark_reconstruction(&model, &landmarks, args.repetitions)?;
    let mut out = String::new();
    let _ = writeln!(out, "lift3d bench v1");
    let _ = writeln!(out, "repetitions {}", report.repetitions);
    let _ = writeln!(out, "landmarks {}", landmarks.n());
    let _ = writeln!(out, "wall_seconds {:.6}", report.wall_seconds);
    let _ = writeln!(out, "reconstructions_per_second {:.1}", report.per_second);
    let _ = writeln!(out, "checksum {:.16e}", report.checksum);
    let _ = writeln!(out, "end");
    print!("{out}");
    Ok(())
}

/// Deterministic non-degenerate 2D probe for throughput runs: n points on a
/// gently modulated circle.
fn bench_probe(n: usize) -> Result<Landmarks2D> {
    let mut u = Vec::with_capacity(n);
    let mut v = Vec::with_capacity(n);
    for j in 0..n {
        let t = std::f64::consts::TAU * j as f64 / n as f64;
        let r = 1.0 + 0.25 * (3.0 * t).sin();
        u.push(r * t.cos());
        v.push(r * t.sin());
    }
    Landmarks2D::from_rows(&u, &v)
}

/// Wavefront OBJ text for a reconstructed shape. Quads are emitted when the
/// landmark count factors as a p x q grid (p = largest divisor <= sqrt(n)),
/// assuming row-major vertex order; otherwise the file is a point cloud.
fn mesh_text(shape: &Shape3D) -> String {
    let n = shape.n();
    let mut out = String::from("# reconstructed landmark mesh\n");
    for j in 0..n {
        let p = shape.landmark(j);
        let _ = writeln!(out, "v {:.9} {:.9} {:.9}", p[0], p[1], p[2]);
    }
    let rows = largest_divisor_up_to_sqrt(n);
    let cols = n / rows;
    if rows >= 2 && cols >= 2 {
        for r in 0..rows - 1 {
            for c in 0..cols - 1 {
                // 1-based OBJ indices, row-major grid.
                let a = r * cols + c + 1;
                let b = a + 1;
                let d = (r + 1) * cols + c + 1;
                let e = d + 1;
                let _ = writeln!(out, "f {a} {b} {e} {d}");
            }
        }
    }
    out
}

fn largest_divisor_up_to_sqrt(n: usize) -> usize {
    let mut best = 1;
    let mut d = 1;
    while d * d <= n {
        if n % d == 0 {
            best = d;
        }
        d += 1;
    }
    best
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| {
        Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display())))
    })
}
