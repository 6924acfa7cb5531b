//! Poison → train → evaluate sweeps and the defense comparison.
//!
//! Every cell derives its seeds from the global seed and its own key, so the
//! worker-pool size never changes a result. Result tables contain no
//! timestamps; timing lives in `metadata.json`.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{split, synth_clusters, FeatureScaler, LabeledDataset, SynthSpec};
use crate::defense::{train_ensemble, DefenseConfig};
use crate::encode::{EncoderConfig, EncoderKind};
use crate::error::{Error, Result};
use crate::ess::DistanceMetric;
use crate::noise::NoiseModel;
use crate::poison::{poison, AttackMode, PoisonSpec};
use crate::pqc::{build_template, Preset};
use crate::qnn::{train, QnnModel, TrainConfig, TrainReport};
use crate::seed;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetSource {
    Synth(SynthSpec),
    Csv { path: PathBuf, has_header: bool },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseSource {
    None,
    /// Amplitude damping and depolarizing at `p` after every gate.
    Uniform(f64),
    File(PathBuf),
}

impl NoiseSource {
    pub fn resolve(&self) -> Result<Option<NoiseModel>> {
        match self {
            NoiseSource::None => Ok(None),
            NoiseSource::Uniform(p) if *p == 0.0 => Ok(None),
            NoiseSource::Uniform(p) => NoiseModel::uniform(*p).map(Some),
            NoiseSource::File(path) => NoiseModel::load(path).map(Some),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_name: String,
    pub dataset: DatasetSource,
    pub encoder: EncoderKind,
    pub qubits: usize,
    pub pqc: Preset,
    pub layers: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub spsa_c: f64,
    pub spsa_repeats: usize,
    pub shots: u32,
    pub noise: NoiseSource,
    /// Whether the adversary's encoder sees the same noise as training.
    pub adversary_noise: bool,
    pub metric: DistanceMetric,
    pub epsilons: Vec<f64>,
    pub modes: Vec<AttackMode>,
    pub train_fraction: f64,
    pub defense_k: usize,
    pub seed: u64,
    /// Does not affect results, so it is left out of the config hash.
    #[serde(skip)]
    pub workers: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            dataset_name: "synthetic".into(),
            dataset: DatasetSource::Synth(SynthSpec::new(4, 8, 250, DEFAULT_SPREAD, 0)),
            encoder: EncoderKind::Angle,
            qubits: 4,
            pqc: Preset::Pqc1,
            layers: 1,
            epochs: 30,
            learning_rate: 0.01,
            batch_size: 32,
            spsa_c: 0.01,
            spsa_repeats: 1,
            shots: 0,
            noise: NoiseSource::None,
            adversary_noise: true,
            metric: DistanceMetric::Frobenius,
            epsilons: vec![0.0, 0.5],
            modes: vec![AttackMode::RandomFlip, AttackMode::Quid],
            train_fraction: 0.7,
            defense_k: 3,
            seed: 0,
            workers: 0,
        }
    }
}

/// Standard deviation of the default synthetic clusters.
pub const DEFAULT_SPREAD: f64 = 0.3;

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.epsilons.iter().find(|e| !(0.0..=1.0).contains(*e)) {
            return Err(Error::Range(format!("poison ratio {e} not in [0, 1]")));
        }
        if self.epsilons.is_empty() {
            return Err(Error::Config("epsilon list is empty".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Range(format!("train fraction {} not in (0, 1)", self.train_fraction)));
        }
        if let DatasetSource::Csv { path, .. } = &self.dataset {
            if !path.exists() {
                return Err(Error::Config(format!("dataset {} does not exist", path.display())));
            }
        }
        if let NoiseSource::File(path) = &self.noise {
            if !path.exists() {
                return Err(Error::Config(format!("noise model {} does not exist", path.display())));
            }
        }
        self.train_config(0).validate()
    }

    pub fn hash(&self) -> String {
        config_hash(self)
    }

    pub fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            learning_rate: self.learning_rate,
            batch_size: self.batch_size,
            spsa_c: self.spsa_c,
            spsa_repeats: self.spsa_repeats,
            seed,
            noise: None,
            shots: self.shots,
            train_quantum: true,
        }
    }

    fn pool(&self) -> Result<rayon::ThreadPool> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.workers)
            .build()
            .map_err(|e| Error::Config(format!("worker pool: {e}")))
    }
}

/// Everything a cell needs, built once per run.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub train: LabeledDataset,
    pub test: LabeledDataset,
    pub scaler: FeatureScaler,
    pub encoder: EncoderConfig,
    pub prototype: QnnModel,
    pub noise: Option<NoiseModel>,
}

pub fn load_dataset(source: &DatasetSource) -> Result<LabeledDataset> {
    match source {
        DatasetSource::Synth(spec) => synth_clusters(spec),
        DatasetSource::Csv { path, has_header } => LabeledDataset::load_csv(path, *has_header),
    }
}

/// Loads, scales to the encoder range, splits and builds the untrained model.
pub fn prepare(cfg: &ExperimentConfig) -> Result<Prepared> {
    cfg.validate()?;
    let raw = load_dataset(&cfg.dataset)?;
    let encoder = match cfg.encoder {
        EncoderKind::Angle => EncoderConfig::angle_for_dim(cfg.qubits, raw.dim()),
        EncoderKind::Amplitude => EncoderConfig::amplitude(cfg.qubits),
    };
    encoder.check_dim(raw.dim())?;
    let scaler = FeatureScaler::fit(raw.features(), encoder.scale_range)?;
    let scaled = scaler.transform_dataset(&raw);
    let (train_set, test_set) = split(&scaled, cfg.train_fraction, true, seed::derive(cfg.seed, &[seed::label_key("split")]))?;
    let template = build_template(cfg.pqc, cfg.qubits, cfg.layers)?;
    let prototype = QnnModel::new(
        encoder.clone(),
        template,
        raw.class_count(),
        seed::derive(cfg.seed, &[seed::label_key("model")]),
    )?;
    Ok(Prepared {
        train: train_set,
        test: test_set,
        scaler,
        encoder,
        prototype,
        noise: cfg.noise.resolve()?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cell {
    pub epsilon: f64,
    /// `None` is the unpoisoned baseline.
    pub mode: Option<AttackMode>,
}

impl Cell {
    pub fn mode_name(&self) -> &'static str {
        self.mode.map_or("none", AttackMode::name)
    }
}

/// ε = 0 runs only the baseline; every other ε runs each attack mode.
pub fn cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut out = Vec::new();
    for &epsilon in &cfg.epsilons {
        if epsilon == 0.0 {
            out.push(Cell { epsilon, mode: None });
        } else {
            out.extend(cfg.modes.iter().map(|&m| Cell { epsilon, mode: Some(m) }));
        }
    }
    out
}

pub fn poison_seed(cfg: &ExperimentConfig, epsilon: f64) -> u64 {
    seed::derive(cfg.seed, &[seed::label_key("poison"), epsilon.to_bits()])
}

pub fn train_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.seed, &[seed::label_key("train")])
}

pub fn partition_seed(cfg: &ExperimentConfig) -> u64 {
    seed::derive(cfg.seed, &[seed::label_key("partition")])
}

/// Poisoned training set for one cell (the clean set for the baseline).
pub fn poisoned_train_set(cfg: &ExperimentConfig, prep: &Prepared, cell: &Cell) -> Result<LabeledDataset> {
    let Some(mode) = cell.mode else {
        return Ok(prep.train.clone());
    };
    let mut spec = PoisonSpec::new(mode, cell.epsilon, poison_seed(cfg, cell.epsilon));
    spec.metric = cfg.metric;
    spec.noise = if cfg.adversary_noise { prep.noise.clone() } else { None };
    Ok(poison(&prep.train, &spec, &prep.encoder)?.dataset)
}

#[derive(Clone, Debug)]
pub struct CellResult {
    pub cell: Cell,
    pub outcome: std::result::Result<TrainReport, String>,
}

impl CellResult {
    pub fn accuracy(&self) -> Option<f64> {
        self.outcome.as_ref().ok().and_then(TrainReport::final_accuracy)
    }
}

pub fn run_cell(cfg: &ExperimentConfig, prep: &Prepared, cell: Cell) -> CellResult {
    let outcome = poisoned_train_set(cfg, prep, &cell)
        .and_then(|tr| {
            let mut tc = cfg.train_config(train_seed(cfg));
            tc.noise = prep.noise.clone();
            train(&prep.prototype, &tr, &prep.test, &tc)
        })
        .map_err(|e| e.to_string());
    CellResult { cell, outcome }
}

#[derive(Clone, Debug)]
pub struct ExperimentResults {
    pub config: ExperimentConfig,
    pub cells: Vec<CellResult>,
    pub wall_clock: f64,
}

impl ExperimentResults {
    pub fn accuracy(&self, epsilon: f64, mode: Option<AttackMode>) -> Option<f64> {
        self.cells
            .iter()
            .find(|c| c.cell.epsilon == epsilon && c.cell.mode == mode)
            .and_then(CellResult::accuracy)
    }

    pub fn results_csv(&self) -> String {
        let cfg = &self.config;
        let mut out = String::from("dataset,pqc,epsilon,mode,test_accuracy,test_loss,status\n");
        for c in &self.cells {
            let (acc, loss, status) = match &c.outcome {
                Ok(r) => (
                    r.final_accuracy().map(|v| v.to_string()).unwrap_or_default(),
                    r.test_loss.last().map(|v| v.to_string()).unwrap_or_default(),
                    "ok".to_string(),
                ),
                Err(e) => (String::new(), String::new(), format!("failed: {}", csv_text(e))),
            };
            out.push_str(&format!(
                "{},{},{},{},{acc},{loss},{status}\n",
                csv_text(&cfg.dataset_name),
                cfg.pqc.name(),
                c.cell.epsilon,
                c.cell.mode_name()
            ));
        }
        out
    }

    /// Per-epoch curves for every successful cell.
    pub fn curves_csv(&self) -> String {
        let cfg = &self.config;
        let mut out = String::from("dataset,pqc,epsilon,mode,epoch,train_loss,test_loss,test_accuracy\n");
        for c in &self.cells {
            if let Ok(r) = &c.outcome {
                for e in 0..r.train_loss.len() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{},{},{}\n",
                        csv_text(&cfg.dataset_name),
                        cfg.pqc.name(),
                        c.cell.epsilon,
                        c.cell.mode_name(),
                        e + 1,
                        r.train_loss[e],
                        r.test_loss[e],
                        r.test_accuracy[e]
                    ));
                }
            }
        }
        out
    }
}

fn csv_text(s: &str) -> String {
    s.replace([',', '\n', '\r'], " ")
}

/// Runs every cell on a pool of `cfg.workers` threads (0 = one per core).
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResults> {
    let start = Instant::now();
    let pool = cfg.pool()?;
    let prep = pool.install(|| prepare(cfg))?;
    let cells = pool.install(|| cells(cfg).into_par_iter().map(|c| run_cell(cfg, &prep, c)).collect());
    Ok(ExperimentResults {
        config: cfg.clone(),
        cells,
        wall_clock: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct DefenseRow {
    pub epsilon: f64,
    pub baseline: f64,
    pub no_defense: f64,
    pub defense: f64,
}

#[derive(Clone, Debug)]
pub struct DefenseResults {
    pub config: ExperimentConfig,
    pub rows: Vec<DefenseRow>,
    pub warnings: Vec<String>,
    pub wall_clock: f64,
}

impl DefenseResults {
    pub fn table_csv(&self) -> String {
        let mut out = String::from("dataset,epsilon,baseline,no_defense,defense\n");
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                csv_text(&self.config.dataset_name),
                r.epsilon,
                r.baseline,
                r.no_defense,
                r.defense
            ));
        }
        out
    }
}

/// For each ε: poison with the first configured attack mode (QUID by
/// default), then train undefended and as a `defense_k`-member ensemble on
/// the same poisoned set. The baseline is the clean, undefended model.
pub fn run_defense(cfg: &ExperimentConfig) -> Result<DefenseResults> {
    let start = Instant::now();
    let pool = cfg.pool()?;
    let prep = pool.install(|| prepare(cfg))?;
    let mode = cfg.modes.first().copied().unwrap_or(AttackMode::Quid);
    let mut tc = cfg.train_config(train_seed(cfg));
    tc.noise = prep.noise.clone();
    let dc = DefenseConfig::new(cfg.defense_k, tc.clone(), partition_seed(cfg));

    pool.install(|| {
        let baseline = final_accuracy(train(&prep.prototype, &prep.train, &prep.test, &tc)?)?;
        let per_eps: Vec<(DefenseRow, Vec<String>)> = cfg
            .epsilons
            .par_iter()
            .map(|&epsilon| {
                let cell = Cell {
                    epsilon,
                    mode: (epsilon > 0.0).then_some(mode),
                };
                let tr = poisoned_train_set(cfg, &prep, &cell)?;
                let no_defense = final_accuracy(train(&prep.prototype, &tr, &prep.test, &tc)?)?;
                let ens = train_ensemble(&prep.prototype, &tr, &prep.test, &dc)?;
                let defense = ens.ensemble.accuracy(&prep.test, prep.noise.as_ref(), cfg.shots, seed::derive(tc.seed, &[seed::label_key("vote")]))?;
                let warnings = ens.warnings.into_iter().map(|w| format!("epsilon {epsilon}: {w}")).collect();
                Ok((
                    DefenseRow {
                        epsilon,
                        baseline,
                        no_defense,
                        defense,
                    },
                    warnings,
                ))
            })
            .collect::<Result<_>>()?;
        let (rows, warnings): (Vec<_>, Vec<_>) = per_eps.into_iter().unzip();
        Ok(DefenseResults {
            config: cfg.clone(),
            rows,
            warnings: warnings.into_iter().flatten().collect(),
            wall_clock: start.elapsed().as_secs_f64(),
        })
    })
}

fn final_accuracy(report: TrainReport) -> Result<f64> {
    report
        .final_accuracy()
        .ok_or_else(|| Error::Config("training ran zero epochs, no accuracy to report".into()))
}

/// SHA-256 of the compact JSON form of `cfg`.
pub fn config_hash<T: Serialize>(cfg: &T) -> String {
    let json = serde_json::to_vec(cfg).expect("config serializes");
    Sha256::digest(&json).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes `manifest.json` (deterministic) and `metadata.json` (timing).
pub fn write_run_files<T: Serialize>(dir: &Path, cfg: &T, seed: u64, workers: usize, wall_clock: f64) -> Result<()> {
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config_hash": config_hash(cfg),
        "config": cfg,
    });
    write_text(&dir.join("manifest.json"), &(serde_json::to_string_pretty(&manifest)? + "\n"))?;
    let finished = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_secs());
    let metadata = serde_json::json!({
        "finished_unix": finished,
        "wall_clock_seconds": wall_clock,
        "workers": workers,
    });
    write_text(&dir.join("metadata.json"), &(serde_json::to_string_pretty(&metadata)? + "\n"))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, text).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            dataset: DatasetSource::Synth(SynthSpec::new(2, 2, 15, 0.2, 1)),
            qubits: 2,
            epochs: 2,
            epsilons: vec![0.0, 0.4],
            defense_k: 1,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn zero_only_sweep_is_baseline_only() {
        let cfg = ExperimentConfig {
            epsilons: vec![0.0],
            ..tiny()
        };
        let cs = cells(&cfg);
        assert_eq!(cs.len(), 1);
        assert_eq!(cs[0].mode_name(), "none");
    }

    #[test]
    fn results_do_not_depend_on_worker_count() {
        let one = run_experiment(&ExperimentConfig { workers: 1, ..tiny() }).unwrap();
        let three = run_experiment(&ExperimentConfig { workers: 3, ..tiny() }).unwrap();
        assert_eq!(one.results_csv(), three.results_csv());
        assert_eq!(one.curves_csv(), three.curves_csv());
        assert_eq!(one.results_csv().lines().count(), 4);
        assert_eq!(one.config.hash(), three.config.hash());
    }

    #[test]
    fn single_member_defense_equals_no_defense() {
        let res = run_defense(&tiny()).unwrap();
        assert_eq!(res.rows.len(), 2);
        for r in &res.rows {
            assert_eq!(r.defense, r.no_defense);
        }
        assert_eq!(res.rows[0].baseline, res.rows[0].no_defense);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let cfg = ExperimentConfig {
            epsilons: vec![1.5],
            ..tiny()
        };
        assert!(cfg.validate().is_err());
        let cfg = ExperimentConfig {
            dataset: DatasetSource::Csv {
                path: "/nonexistent/data.csv".into(),
                has_header: false,
            },
            ..tiny()
        };
        assert!(cfg.validate().is_err());
    }
}
