use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use collarnet::config::CliConfig;
use collarnet::infer::{self, InferenceConfig};
use collarnet::nn::{checkpoint, ArchName};
use collarnet::signal::{self, Waveform};
use collarnet::synth::{self, Interference, SynthSpec};
use collarnet::train::{self, BEST_CHECKPOINT, LAST_CHECKPOINT};

/// Casing-collar recognition on CCL waveforms.
#[derive(Parser)]
#[command(name = "collarnet", version, about)]
struct Cli {
    #[command(flatten)]
    shared: Shared,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Shared {
    /// Master seed; overrides `train.seed` from the config [default: 0]
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// JSON config with normalization/labels/augment/arch/train/inference blocks [default: built-in defaults]
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Worker threads; results do not depend on this
    #[arg(long, global = true, default_value_t = 1, value_name = "N")]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate an annotated synthetic waveform (CCLW)
    Synth(SynthArgs),
    /// Train a model on a directory of annotated CCLW waveforms
    Train(TrainArgs),
    /// Sliding-window probability map for one waveform
    Infer(InferArgs),
    /// Threshold a probability map into collar marks
    Detect(DetectArgs),
    /// Score detected marks against annotated ones
    Eval(EvalArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Output stem; writes <STEM>.json and <STEM>.bin
    #[arg(long, value_name = "STEM")]
    out: PathBuf,
    #[arg(long, default_value_t = 60.0)]
    duration_s: f64,
    #[arg(long, default_value_t = 1000.0)]
    sample_rate_hz: f64,
    /// Mean collar spacing (each gap jittered by +-20%)
    #[arg(long, default_value_t = 0.4)]
    collar_spacing_s: f64,
    #[arg(long, default_value_t = 0.012)]
    signature_width_s: f64,
    #[arg(long, default_value_t = 1.0)]
    signature_amp: f64,
    /// none, mild or moderate
    #[arg(long, default_value = "none")]
    interference: Interference,
    #[arg(long, default_value_t = 0.0)]
    drift_amp: f64,
    #[arg(long, default_value_t = 0.0)]
    noise_std: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// Directory of CCLW waveforms (every <stem>.json with its <stem>.bin)
    #[arg(long, value_name = "DIR")]
    data: PathBuf,
    /// Output directory for metrics.csv, best.cclm and last.cclm
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Overrides `train.epochs` [default: 100]
    #[arg(long)]
    epochs: Option<usize>,
    /// TAN or MAN; overrides `arch.name` [default: TAN]
    #[arg(long)]
    arch: Option<ArchName>,
    /// Overrides `arch.window_len` [default: 512]
    #[arg(long)]
    window_len: Option<usize>,
}

#[derive(Args)]
struct InferArgs {
    /// CCLM checkpoint
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// CCLW stem of the waveform to scan
    #[arg(long, value_name = "STEM")]
    input: PathBuf,
    /// Probability map CSV (index,probability) [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DetectArgs {
    /// Probability map CSV from `infer`
    #[arg(long, value_name = "FILE")]
    map: PathBuf,
    /// Detections CSV (center,start,end) [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
    /// Strict threshold in (0, 1) [default: inference.threshold, 0.5]
    #[arg(long)]
    threshold: Option<f64>,
    /// Shortest accepted run, in samples [default: inference.min_width, 3]
    #[arg(long)]
    min_width: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    /// Detections CSV from `detect`
    #[arg(long, value_name = "FILE")]
    detections: PathBuf,
    /// Annotated CCLW stem
    #[arg(long, value_name = "STEM")]
    truth: PathBuf,
    /// Matching neighborhood in samples [default: inference.tolerance, 50]
    #[arg(long)]
    tolerance: Option<usize>,
    /// Match report JSON [default: stdout]
    #[arg(long, value_name = "FILE")]
    out: Option<PathBuf>,
}

enum Failure {
    /// Bad invocation or missing input: exit 2.
    Usage(String),
    Run(collarnet::Error),
}

impl From<collarnet::Error> for Failure {
    fn from(e: collarnet::Error) -> Self {
        Failure::Run(e)
    }
}

type CmdResult = Result<(), Failure>;

fn require(path: &Path, what: &str) -> CmdResult {
    if path.exists() {
        Ok(())
    } else {
        Err(Failure::Usage(format!("{what} {} does not exist", path.display())))
    }
}

fn require_stem(stem: &Path) -> CmdResult {
    require(&signal::cclw_paths(stem).0, "waveform manifest")
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>, Failure> {
    match path {
        Some(p) => {
            let f = File::create(p).map_err(|e| collarnet::Error::Io { path: p.to_path_buf(), source: e })?;
            Ok(Box::new(BufWriter::new(f)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn emit(path: Option<&Path>, body: impl FnOnce(&mut dyn Write) -> io::Result<()>) -> CmdResult {
    let mut out = output(path)?;
    let label = path.map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("<stdout>"));
    body(&mut out)
        .and_then(|_| out.flush())
        .map_err(|e| Failure::Run(collarnet::Error::Io { path: label, source: e }))
}

fn load_config(shared: &Shared) -> Result<CliConfig, Failure> {
    let mut cfg = match &shared.config {
        Some(p) => {
            require(p, "config file")?;
            CliConfig::load(p)?
        }
        None => CliConfig::default(),
    };
    if let Some(seed) = shared.seed {
        cfg.train.seed = seed;
    }
    Ok(cfg)
}

fn cmd_synth(a: SynthArgs, cfg: &CliConfig) -> CmdResult {
    let spec = SynthSpec {
        seed: cfg.train.seed,
        duration_s: a.duration_s,
        sample_rate_hz: a.sample_rate_hz,
        collar_spacing_s: a.collar_spacing_s,
        signature_width_s: a.signature_width_s,
        signature_amp: a.signature_amp,
        interference_level: a.interference,
        drift_amp: a.drift_amp,
        noise_std: a.noise_std,
        window_len: cfg.arch.window_len,
    };
    let w = synth::generate(&spec)?;
    if let Some(dir) = a.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| collarnet::Error::Io { path: dir.to_path_buf(), source: e })?;
    }
    signal::write_waveform(&w, &a.out)?;
    log::info!("wrote {} samples, {} collars to {}", w.len(), w.collar_marks().map_or(0, |m| m.len()), a.out.display());
    Ok(())
}

fn read_data_dir(dir: &Path) -> Result<Vec<Waveform>, Failure> {
    if !dir.is_dir() {
        return Err(Failure::Usage(format!("data directory {} does not exist", dir.display())));
    }
    let entries = fs::read_dir(dir).map_err(|e| collarnet::Error::Io { path: dir.to_path_buf(), source: e })?;
    let mut stems: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    stems.sort();
    if stems.is_empty() {
        return Err(Failure::Usage(format!("no CCLW waveforms in {}", dir.display())));
    }
    stems.iter().map(|s| signal::read_waveform(s).map_err(Failure::Run)).collect()
}

fn cmd_train(a: TrainArgs, mut cfg: CliConfig, workers: usize) -> CmdResult {
    if let Some(e) = a.epochs {
        cfg.train.epochs = e;
    }
    if let Some(arch) = a.arch {
        cfg.arch.name = arch;
    }
    if let Some(w) = a.window_len {
        cfg.arch.window_len = w;
    }
    let waveforms = read_data_dir(&a.data)?;
    let tc = cfg.train_config(Some(a.out.clone()), Some(a.out.join("metrics.csv")), workers);
    let data = train::build_dataset(&waveforms, &tc)?;
    log::info!(
        "{} waveforms: {} training windows, {} validation windows, {} marks skipped",
        waveforms.len(),
        data.train.len(),
        data.val.len(),
        data.skipped_marks
    );
    let outcome = train::train(&tc, &data)?;
    log::info!(
        "best val_f1 at epoch {}; wrote {} and {}",
        outcome.best_epoch,
        a.out.join(BEST_CHECKPOINT).display(),
        a.out.join(LAST_CHECKPOINT).display()
    );
    Ok(())
}

fn cmd_infer(a: InferArgs, cfg: &CliConfig, workers: usize) -> CmdResult {
    require(&a.model, "checkpoint")?;
    require_stem(&a.input)?;
    let model = checkpoint::load(&a.model)?;
    let w = signal::read_waveform(&a.input)?;
    let norm = signal::normalize(&w, &cfg.normalization)?;
    let map = infer::sliding_infer(&model, norm.samples(), workers)?;
    emit(a.out.as_deref(), |out| infer::write_probability_csv(&map, out))
}

fn cmd_detect(a: DetectArgs, inference: &InferenceConfig) -> CmdResult {
    require(&a.map, "probability map")?;
    let values = infer::read_probability_csv(&a.map)?;
    let det = infer::postprocess(
        &values,
        a.threshold.unwrap_or(inference.threshold),
        a.min_width.unwrap_or(inference.min_width),
    )?;
    emit(a.out.as_deref(), |out| infer::write_detections_csv(&det, out))
}

fn cmd_eval(a: EvalArgs, inference: &InferenceConfig) -> CmdResult {
    require(&a.detections, "detections file")?;
    require_stem(&a.truth)?;
    let pred = infer::read_detections_csv(&a.detections)?;
    let w = signal::read_waveform(&a.truth)?;
    let truth = w.collar_marks().unwrap_or(&[]);
    let report = infer::match_collars(&pred, truth, a.tolerance.unwrap_or(inference.tolerance))?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    emit(a.out.as_deref(), |out| writeln!(out, "{json}"))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = Cli::parse();
    let result = load_config(&cli.shared).and_then(|cfg| match cli.command {
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Train(a) => cmd_train(a, cfg, cli.shared.workers),
        Command::Infer(a) => cmd_infer(a, &cfg, cli.shared.workers),
        Command::Detect(a) => cmd_detect(a, &cfg.inference),
        Command::Eval(a) => cmd_eval(a, &cfg.inference),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
