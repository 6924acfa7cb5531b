//! The `quid` command line.
//!
//! Every subcommand writes into `--out` (a file for `gen-data`, a directory
//! otherwise). Settings come from flags, then the `--config` JSON file, then
//! built-in defaults. Result files are deterministic given the seed; timing
//! goes to `metadata.json`.

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use crate::data::{synth_clusters, FeatureScaler, LabeledDataset, SynthSpec};
use crate::encode::{EncoderConfig, EncoderKind};
use crate::error::Error;
use crate::ess::{compare_encodings, validate_ess, DistanceMetric, HoldoutSplit};
use crate::experiment::{
    self, run_defense, run_experiment, write_run_files, write_text, DatasetSource, ExperimentConfig,
    NoiseSource, DEFAULT_SPREAD,
};
use crate::noise::NoiseModel;
use crate::poison::{poison, AttackMode, PoisonSpec};
use crate::pqc::{build_template, Preset};
use crate::qnn::{evaluate, load_checkpoint, save_checkpoint, train, QnnModel};
use crate::seed;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_RUNTIME: i32 = 4;

#[derive(Parser, Debug)]
#[command(name = "quid", version, about = "QML data-poisoning lab: simulate, poison, train, defend")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Default)]
pub struct GlobalArgs {
    /// JSON file whose keys mirror the long flags (dashes become underscores)
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output file (gen-data) or directory (everything else)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub qubits: Option<usize>,
    #[arg(long, global = true)]
    pub pqc: Option<Preset>,
    #[arg(long, global = true)]
    pub layers: Option<usize>,
    /// Amplitude damping + depolarizing strength after every gate
    #[arg(long, global = true, conflicts_with = "noise_model")]
    pub noise: Option<f64>,
    /// Per-gate noise model JSON
    #[arg(long, global = true)]
    pub noise_model: Option<PathBuf>,
    /// 0 for exact expectations
    #[arg(long, global = true)]
    pub shots: Option<u32>,
    /// frobenius, trace or hs
    #[arg(long, global = true)]
    pub metric: Option<DistanceMetric>,
    /// Comma-separated poison ratios
    #[arg(long, global = true, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
    #[arg(long, global = true)]
    pub epochs: Option<usize>,
    #[arg(long, global = true)]
    pub lr: Option<f64>,
    #[arg(long, global = true)]
    pub batch: Option<usize>,
    /// Worker threads (0 = one per core); never changes results
    #[arg(long, global = true)]
    pub workers: Option<usize>,
}

#[derive(Args, Debug, Default, Clone)]
pub struct DataArgs {
    /// Dataset CSV (features then an integer label per row); synthetic when absent
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// The CSV has a header line
    #[arg(long)]
    pub header: bool,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub per_class: Option<usize>,
    #[arg(long)]
    pub spread: Option<f64>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a synthetic Gaussian-cluster dataset plus a provenance sidecar
    GenData(DataArgs),
    /// Nearest-class ESS labeling accuracy and timing per distance metric
    EssValidate {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value_t = 0.5)]
        holdout: f64,
        #[arg(long)]
        unstratified: bool,
    },
    /// ESS accuracy of angle vs amplitude encoding across noise levels
    EncodeCompare {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "0,0.01,0.05,0.1")]
        levels: Vec<f64>,
        #[arg(long, default_value_t = 0.5)]
        holdout: f64,
    },
    /// Poison a dataset file
    Poison {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, default_value = "quid")]
        mode: AttackMode,
    },
    /// Train a QNN and write its checkpoint
    Train {
        #[command(flatten)]
        data: DataArgs,
        /// Separate test CSV; otherwise a stratified 70/30 split is used
        #[arg(long)]
        test: Option<PathBuf>,
        #[arg(long)]
        emit_plot_data: bool,
    },
    /// Score a checkpoint on a dataset
    Evaluate {
        #[arg(long)]
        model: PathBuf,
        /// Scaler written by `train`; defaults to scaler.json beside the model
        #[arg(long)]
        scaler: Option<PathBuf>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Poison-ratio sweep: none / random_flip / quid at each epsilon
    Experiment {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',', default_value = "random_flip,quid")]
        modes: Vec<AttackMode>,
        /// The adversary encodes without noise even when training is noisy
        #[arg(long)]
        adversary_clean: bool,
        #[arg(long)]
        emit_plot_data: bool,
        /// Dataset label in result tables
        #[arg(long)]
        name: Option<String>,
    },
    /// Undefended vs partition-ensemble accuracy on the same poisoned data
    Defend {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long, default_value = "quid")]
        mode: AttackMode,
        #[arg(long)]
        name: Option<String>,
    },
}

/// Config-file form of the flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    seed: Option<u64>,
    out: Option<PathBuf>,
    qubits: Option<usize>,
    pqc: Option<String>,
    layers: Option<usize>,
    noise: Option<f64>,
    noise_model: Option<PathBuf>,
    shots: Option<u32>,
    metric: Option<String>,
    epsilon: Option<OneOrMany>,
    epochs: Option<usize>,
    lr: Option<f64>,
    batch: Option<usize>,
    workers: Option<usize>,
    data: Option<PathBuf>,
    header: Option<bool>,
    classes: Option<usize>,
    dim: Option<usize>,
    per_class: Option<usize>,
    spread: Option<f64>,
    k: Option<usize>,
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum OneOrMany {
    One(f64),
    Many(Vec<f64>),
}

#[derive(Debug)]
enum CliError {
    Usage(String),
    Lib(Error),
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Lib(e)
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => EXIT_USAGE,
            CliError::Lib(e) if e.is_data_error() => EXIT_DATA,
            CliError::Lib(Error::Config(_) | Error::Range(_)) => EXIT_USAGE,
            CliError::Lib(_) => EXIT_RUNTIME,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => f.write_str(m),
            CliError::Lib(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Fully resolved settings shared by all subcommands.
#[derive(Clone, Debug, Serialize)]
struct Settings {
    seed: u64,
    #[serde(skip)]
    out: Option<PathBuf>,
    qubits: usize,
    pqc: Preset,
    layers: usize,
    noise: NoiseSource,
    shots: u32,
    metric: Option<DistanceMetric>,
    epsilon: Option<Vec<f64>>,
    epochs: usize,
    lr: f64,
    batch: usize,
    #[serde(skip)]
    workers: usize,
    data: Option<PathBuf>,
    header: bool,
    synth: SynthSpec,
    k: Option<usize>,
}

impl Settings {
    fn resolve(g: &GlobalArgs, d: Option<&DataArgs>, file: FileConfig) -> CliResult<Self> {
        let d = d.cloned().unwrap_or_default();
        let parse_err = |e: Error| CliError::Usage(format!("config file: {e}"));
        let pqc = match (g.pqc, &file.pqc) {
            (Some(p), _) => p,
            (None, Some(s)) => s.parse().map_err(parse_err)?,
            (None, None) => Preset::Pqc1,
        };
        let metric = match (g.metric, &file.metric) {
            (Some(m), _) => Some(m),
            (None, Some(s)) => Some(s.parse().map_err(parse_err)?),
            (None, None) => None,
        };
        let noise = match (g.noise, &g.noise_model) {
            (Some(p), _) => NoiseSource::Uniform(p),
            (None, Some(path)) => NoiseSource::File(path.clone()),
            (None, None) => match (file.noise, file.noise_model) {
                (Some(_), Some(_)) => {
                    return Err(CliError::Usage("config file sets both noise and noise_model".into()))
                }
                (Some(p), None) => NoiseSource::Uniform(p),
                (None, Some(path)) => NoiseSource::File(path),
                (None, None) => NoiseSource::None,
            },
        };
        let epsilon = g.epsilon.clone().or(file.epsilon.map(|e| match e {
            OneOrMany::One(v) => vec![v],
            OneOrMany::Many(v) => v,
        }));
        let seed = g.seed.or(file.seed).unwrap_or(0);
        let synth = SynthSpec::new(
            d.classes.or(file.classes).unwrap_or(4),
            d.dim.or(file.dim).unwrap_or(8),
            d.per_class.or(file.per_class).unwrap_or(250),
            d.spread.or(file.spread).unwrap_or(DEFAULT_SPREAD),
            seed,
        );
        Ok(Self {
            seed,
            out: g.out.clone().or(file.out),
            qubits: g.qubits.or(file.qubits).unwrap_or(4),
            pqc,
            layers: g.layers.or(file.layers).unwrap_or(1),
            noise,
            shots: g.shots.or(file.shots).unwrap_or(0),
            metric,
            epsilon,
            epochs: g.epochs.or(file.epochs).unwrap_or(30),
            lr: g.lr.or(file.lr).unwrap_or(0.01),
            batch: g.batch.or(file.batch).unwrap_or(32),
            workers: g.workers.or(file.workers).unwrap_or(0),
            data: d.data.or(file.data),
            header: d.header || file.header.unwrap_or(false),
            synth,
            k: file.k,
        })
    }

    fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("quid-out"))
    }

    fn noise_model(&self) -> CliResult<Option<NoiseModel>> {
        Ok(self.noise.resolve()?)
    }

    fn dataset_source(&self) -> DatasetSource {
        match &self.data {
            Some(path) => DatasetSource::Csv {
                path: path.clone(),
                has_header: self.header,
            },
            None => DatasetSource::Synth(self.synth.clone()),
        }
    }

    fn dataset_name(&self, name: Option<&String>) -> String {
        if let Some(n) = name {
            return n.clone();
        }
        match &self.data {
            Some(p) => p.file_stem().map_or("data".into(), |s| s.to_string_lossy().into_owned()),
            None => "synthetic".into(),
        }
    }

    fn load_data(&self) -> CliResult<LabeledDataset> {
        Ok(experiment::load_dataset(&self.dataset_source())?)
    }

    fn experiment_config(&self, name: String) -> ExperimentConfig {
        ExperimentConfig {
            dataset_name: name,
            dataset: self.dataset_source(),
            encoder: EncoderKind::Angle,
            qubits: self.qubits,
            pqc: self.pqc,
            layers: self.layers,
            epochs: self.epochs,
            learning_rate: self.lr,
            batch_size: self.batch,
            shots: self.shots,
            noise: self.noise.clone(),
            metric: self.metric.unwrap_or(DistanceMetric::Frobenius),
            epsilons: self.epsilon.clone().unwrap_or_else(|| vec![0.0, 0.5]),
            seed: self.seed,
            workers: self.workers,
            ..ExperimentConfig::default()
        }
    }
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match dispatch(cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn read_file_config(path: Option<&Path>) -> CliResult<FileConfig> {
    let Some(path) = path else {
        return Ok(FileConfig::default());
    };
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))
}

fn data_args(cmd: &Command) -> Option<&DataArgs> {
    match cmd {
        Command::GenData(d) => Some(d),
        Command::EssValidate { data, .. }
        | Command::EncodeCompare { data, .. }
        | Command::Poison { data, .. }
        | Command::Train { data, .. }
        | Command::Evaluate { data, .. }
        | Command::Experiment { data, .. }
        | Command::Defend { data, .. } => Some(data),
    }
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let file = read_file_config(cli.global.config.as_deref())?;
    let s = Settings::resolve(&cli.global, data_args(&cli.command), file)?;
    if s.workers > 0 {
        // Fails only if a global pool already exists, which is harmless.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(s.workers).build_global();
    }
    match cli.command {
        Command::GenData(_) => gen_data(&s),
        Command::EssValidate {
            holdout, unstratified, ..
        } => ess_validate(&s, holdout, !unstratified),
        Command::EncodeCompare { levels, holdout, .. } => encode_compare(&s, &levels, holdout),
        Command::Poison { mode, .. } => poison_cmd(&s, mode),
        Command::Train {
            test, emit_plot_data, ..
        } => train_cmd(&s, test.as_deref(), emit_plot_data),
        Command::Evaluate { model, scaler, .. } => evaluate_cmd(&s, &model, scaler.as_deref()),
        Command::Experiment {
            modes,
            adversary_clean,
            emit_plot_data,
            name,
            ..
        } => experiment_cmd(&s, modes, adversary_clean, emit_plot_data, name.as_ref()),
        Command::Defend { k, mode, name, .. } => defend_cmd(&s, k, mode, name.as_ref()),
    }
}

fn gen_data(s: &Settings) -> CliResult<()> {
    let out = s
        .out
        .clone()
        .ok_or_else(|| CliError::Usage("gen-data needs --out <file.csv>".into()))?;
    let ds = synth_clusters(&s.synth)?;
    write_text(&out, &ds.to_csv_string())?;
    let sidecar = out.with_extension("provenance.json");
    let provenance = serde_json::json!({
        "generator": "synth_clusters",
        "spec": s.synth,
        "rows": ds.len(),
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
    });
    write_text(&sidecar, &(serde_json::to_string_pretty(&provenance).map_err(Error::from)? + "\n"))?;
    eprintln!("wrote {} rows to {}", ds.len(), out.display());
    Ok(())
}

/// Dataset scaled onto the encoder range, plus the scaler used.
fn scaled_data(s: &Settings, enc: &EncoderConfig) -> CliResult<(LabeledDataset, LabeledDataset, FeatureScaler)> {
    let raw = s.load_data()?;
    enc.check_dim(raw.dim())?;
    let scaler = FeatureScaler::fit(raw.features(), enc.scale_range)?;
    let scaled = scaler.transform_dataset(&raw);
    Ok((raw, scaled, scaler))
}

fn ess_validate(s: &Settings, holdout: f64, stratified: bool) -> CliResult<()> {
    let start = Instant::now();
    let dim = s.load_data()?.dim();
    let enc = EncoderConfig::angle_for_dim(s.qubits, dim);
    let (_, ds, _) = scaled_data(s, &enc)?;
    let noise = s.noise_model()?;
    let split = HoldoutSplit {
        fraction: holdout,
        seed: s.seed,
        stratified,
    };
    let metrics = match s.metric {
        Some(m) => vec![m],
        None => vec![DistanceMetric::Frobenius, DistanceMetric::Trace, DistanceMetric::HilbertSchmidt],
    };
    let mut table = String::from("metric,accuracy,time_s\n");
    let mut classes = String::from("metric,class,intra_mean,inter_mean\n");
    for metric in metrics {
        let r = validate_ess(&ds, &enc, metric, noise.as_ref(), &split)?;
        table.push_str(&format!("{},{},{:.6}\n", metric.name(), r.accuracy, r.seconds));
        for c in &r.per_class {
            classes.push_str(&format!("{},{},{},{}\n", metric.name(), c.class, c.intra_mean, c.inter_mean));
        }
        eprintln!("{:<16} accuracy {:.4}  time {:.3}s", metric.name(), r.accuracy, r.seconds);
    }
    let dir = s.out_dir();
    write_text(&dir.join("ess_table.csv"), &table)?;
    write_text(&dir.join("ess_classes.csv"), &classes)?;
    write_run_files(&dir, s, s.seed, s.workers, start.elapsed().as_secs_f64())?;
    Ok(())
}

fn encode_compare(s: &Settings, levels: &[f64], holdout: f64) -> CliResult<()> {
    let start = Instant::now();
    let dim = s.load_data()?.dim();
    let angle = EncoderConfig::angle_for_dim(s.qubits, dim);
    let amplitude = EncoderConfig::amplitude(s.qubits);
    let (_, ds, _) = scaled_data(s, &angle)?;
    amplitude.check_dim(dim)?;
    let split = HoldoutSplit {
        fraction: holdout,
        seed: s.seed,
        stratified: true,
    };
    let metric = s.metric.unwrap_or(DistanceMetric::Frobenius);
    let cmp = compare_encodings(&ds, &[angle, amplitude], metric, levels, &split)?;
    let mut out = String::from("encoder,noise,accuracy\n");
    for (name, row) in ["angle", "amplitude"].iter().zip(&cmp.accuracy) {
        for (p, acc) in cmp.noise_levels.iter().zip(row) {
            out.push_str(&format!("{name},{p},{acc}\n"));
        }
    }
    let dir = s.out_dir();
    write_text(&dir.join("encode_compare.csv"), &out)?;
    write_run_files(&dir, s, s.seed, s.workers, start.elapsed().as_secs_f64())?;
    Ok(())
}

fn single_epsilon(s: &Settings) -> CliResult<f64> {
    match s.epsilon.as_deref() {
        Some([e]) => Ok(*e),
        Some(_) => Err(CliError::Usage("this command takes exactly one --epsilon value".into())),
        None => Err(CliError::Usage("missing --epsilon".into())),
    }
}

fn poison_cmd(s: &Settings, mode: AttackMode) -> CliResult<()> {
    let start = Instant::now();
    let epsilon = single_epsilon(s)?;
    let input = s
        .data
        .clone()
        .ok_or_else(|| CliError::Usage("poison needs --data <file.csv>".into()))?;
    let dir = s.out_dir();
    let poisoned_path = dir.join("poisoned.csv");
    let raw = s.load_data()?;
    let enc = EncoderConfig::angle_for_dim(s.qubits, raw.dim());
    let (_, scaled, scaler) = scaled_data(s, &enc)?;
    let mut spec = PoisonSpec::new(mode, epsilon, s.seed);
    spec.metric = s.metric.unwrap_or(DistanceMetric::Frobenius);
    spec.noise = s.noise_model()?;
    let outcome = poison(&scaled, &spec, &enc)?;

    // Keep raw features: clean rows untouched, bi-level rows mapped back.
    let features: Vec<Vec<f64>> = (0..raw.len())
        .map(|i| {
            if mode == AttackMode::BilevelRandom && outcome.poisoned_indices.binary_search(&i).is_ok() {
                scaler.inverse_row(outcome.dataset.feature(i))
            } else {
                raw.feature(i).to_vec()
            }
        })
        .collect();
    let poisoned = raw
        .with_features(features)?
        .with_labels(outcome.dataset.labels().to_vec())?;
    if epsilon == 0.0 {
        std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        std::fs::copy(&input, &poisoned_path).map_err(|e| Error::io(&poisoned_path, e))?;
    } else {
        write_text(&poisoned_path, &poisoned.to_csv_string())?;
    }
    write_text(&dir.join("outcome.csv"), &outcome.outcome_csv(&raw))?;
    write_run_files(&dir, &(s, mode), s.seed, s.workers, start.elapsed().as_secs_f64())?;
    eprintln!(
        "{}: poisoned {} of {} rows, {} labels changed",
        mode.name(),
        outcome.poisoned_indices.len(),
        raw.len(),
        outcome.flipped()
    );
    Ok(())
}

fn train_cmd(s: &Settings, test: Option<&Path>, emit_plot_data: bool) -> CliResult<()> {
    let start = Instant::now();
    let noise = s.noise_model()?;
    let cfg = s.experiment_config(s.dataset_name(None));
    let (prototype, train_set, test_set, scaler) = match test {
        None => {
            let prep = experiment::prepare(&cfg)?;
            (prep.prototype, prep.train, prep.test, prep.scaler)
        }
        Some(test_path) => {
            let raw = s.load_data()?;
            let raw_test = LabeledDataset::load_csv(test_path, s.header)?;
            let enc = EncoderConfig::angle_for_dim(s.qubits, raw.dim());
            enc.check_dim(raw.dim())?;
            let scaler = FeatureScaler::fit(raw.features(), enc.scale_range)?;
            let classes = raw.class_count().max(raw_test.class_count());
            let template = build_template(s.pqc, s.qubits, s.layers)?;
            let model = QnnModel::new(enc, template, classes, seed::derive(s.seed, &[seed::label_key("model")]))?;
            let tr = scaler.transform_dataset(&raw);
            let te = scaler.transform_dataset(&raw_test);
            (model, tr, te, scaler)
        }
    };
    let mut tc = cfg.train_config(experiment::train_seed(&cfg));
    tc.noise = noise;
    let report = train(&prototype, &train_set, &test_set, &tc)?;
    let dir = s.out_dir();
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    save_checkpoint(&report.model, dir.join("model.json"))?;
    write_text(
        &dir.join("scaler.json"),
        &(serde_json::to_string_pretty(&scaler).map_err(Error::from)? + "\n"),
    )?;
    let acc = report.final_accuracy().map(|v| v.to_string()).unwrap_or_default();
    let loss = report.test_loss.last().map(|v| v.to_string()).unwrap_or_default();
    write_text(
        &dir.join("results.csv"),
        &format!("epochs,test_accuracy,test_loss\n{},{acc},{loss}\n", s.epochs),
    )?;
    if emit_plot_data {
        write_text(&dir.join("curves.csv"), &report.curves_csv())?;
    }
    write_run_files(&dir, s, s.seed, s.workers, start.elapsed().as_secs_f64())?;
    eprintln!("test accuracy {acc}");
    Ok(())
}

fn evaluate_cmd(s: &Settings, model_path: &Path, scaler_path: Option<&Path>) -> CliResult<()> {
    if s.data.is_none() {
        return Err(CliError::Usage("evaluate needs --data <file.csv>".into()));
    }
    let model = load_checkpoint(model_path)?;
    let scaler_path = scaler_path.map(Path::to_path_buf).unwrap_or_else(|| {
        model_path
            .parent()
            .unwrap_or_else(|| Path::new("."))
            .join("scaler.json")
    });
    let text = std::fs::read_to_string(&scaler_path).map_err(|e| Error::io(&scaler_path, e))?;
    let scaler: FeatureScaler = serde_json::from_str(&text).map_err(Error::from)?;
    let ds = scaler.transform_dataset(&s.load_data()?);
    let noise = s.noise_model()?;
    let (acc, loss) = evaluate(&model, &ds, noise.as_ref(), s.shots, s.seed)?;
    let dir = s.out_dir();
    write_text(&dir.join("evaluation.csv"), &format!("samples,accuracy,loss\n{},{acc},{loss}\n", ds.len()))?;
    println!("accuracy {acc}  loss {loss}");
    Ok(())
}

fn experiment_cmd(
    s: &Settings,
    modes: Vec<AttackMode>,
    adversary_clean: bool,
    emit_plot_data: bool,
    name: Option<&String>,
) -> CliResult<()> {
    let cfg = ExperimentConfig {
        modes,
        adversary_noise: !adversary_clean,
        ..s.experiment_config(s.dataset_name(name))
    };
    let res = run_experiment(&cfg)?;
    let dir = s.out_dir();
    write_text(&dir.join("results.csv"), &res.results_csv())?;
    if emit_plot_data {
        write_text(&dir.join("curves.csv"), &res.curves_csv())?;
    }
    write_run_files(&dir, &cfg, cfg.seed, cfg.workers, res.wall_clock)?;
    for c in &res.cells {
        match &c.outcome {
            Ok(r) => eprintln!(
                "epsilon {:<5} {:<15} accuracy {:.4}",
                c.cell.epsilon,
                c.cell.mode_name(),
                r.final_accuracy().unwrap_or(f64::NAN)
            ),
            Err(e) => eprintln!("epsilon {:<5} {:<15} failed: {e}", c.cell.epsilon, c.cell.mode_name()),
        }
    }
    Ok(())
}

fn defend_cmd(s: &Settings, k: Option<usize>, mode: AttackMode, name: Option<&String>) -> CliResult<()> {
    let cfg = ExperimentConfig {
        modes: vec![mode],
        defense_k: k.or(s.k).unwrap_or(3),
        epsilons: s.epsilon.clone().unwrap_or_else(|| vec![0.3, 0.5]),
        ..s.experiment_config(s.dataset_name(name))
    };
    let res = run_defense(&cfg)?;
    for w in &res.warnings {
        eprintln!("warning: {w}");
    }
    let dir = s.out_dir();
    write_text(&dir.join("defense.csv"), &res.table_csv())?;
    write_run_files(&dir, &cfg, cfg.seed, cfg.workers, res.wall_clock)?;
    for r in &res.rows {
        eprintln!(
            "epsilon {:<5} baseline {:.4}  no defense {:.4}  defense {:.4}",
            r.epsilon, r.baseline, r.no_defense, r.defense
        );
    }
    Ok(())
}

