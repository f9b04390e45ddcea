//! File-driven runs: configuration, artifacts and the command implementations
//! behind the `betavqe` binary.
//!
//! # Configuration grammar
//!
//! Run configurations are TOML documents with the sections below. Unknown keys
//! are rejected, and every field is validated before any computation starts.
//!
//! ```toml
//! [lattice]
//! rows = 3
//! cols = 3
//! gamma = 3.0                 # or: gamma_list = [1.0, 2.0, 3.0, 4.0]
//!
//! [circuit]
//! depth = 5
//! local_layer = false         # optional final RZ RY RZ on every qubit
//!
//! [model]
//! hidden = 500
//! cold_start = true           # all-zero initial weights
//!
//! [train]
//! beta = 1.0                  # or: beta_list = [0.1, 0.5, 1.0]
//! batch_size = 1000
//! epochs = 2000
//! lr_phi = 0.01
//! lr_theta = 0.01
//! adam_beta1 = 0.9
//! adam_beta2 = 0.999
//! adam_eps = 1e-8
//! seed = 1
//! deterministic_smalln = true # exact enumeration when n <= enumeration_threshold
//! enumeration_threshold = 10
//! warm_start = false          # sweeps: start each beta from the previous one
//!
//! [spectrum]
//! n_samples = 10000
//!
//! [output]
//! directory = "runs/example"
//! formats = ["csv", "checkpoint"]
//! ```
//!
//! Only `[lattice]`, `[circuit]` and `[train]` are required; the values shown
//! for the other keys are the defaults.
//!
//! # Artifacts
//!
//! Every CSV starts with one `#` comment line naming the run manifest, the
//! SHA-256 of the resolved configuration, the seed and the library version;
//! the header row follows. Runs over a `gamma_list` write one subdirectory
//! `gamma_<value>/` per field strength (the spectrum table is shared).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::ansatz::{build_ansatz_with, AnsatzOptions};
use crate::checkpoint::{theta_from_checkpoint, theta_to_checkpoint, ArrayFile};
use crate::error::{Error, Result};
use crate::exact::{Spectrum, EXACT_QUBIT_LIMIT};
use crate::made::{MadeModel, DEFAULT_HIDDEN};
use crate::optim::AdamParams;
use crate::pauli::{build_tfim, Boundary, LatticeSpec};
use crate::trainer::{EpochRecord, Observables, SpectrumRow, TrainConfig, Trainer, DEFAULT_ENUMERATION_THRESHOLD};

pub const VERSION: &str = concat!("betavqe ", env!("CARGO_PKG_VERSION"));

/// Environment variable holding the worker thread count.
pub const THREADS_ENV: &str = "BETAVQE_THREADS";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub lattice: LatticeSection,
    pub circuit: CircuitSection,
    #[serde(default)]
    pub model: ModelSection,
    pub train: TrainSection,
    #[serde(default)]
    pub spectrum: SpectrumSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSection {
    pub rows: usize,
    pub cols: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma_list: Option<Vec<f64>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircuitSection {
    pub depth: usize,
    #[serde(default)]
    pub local_layer: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelSection {
    pub hidden: usize,
    pub cold_start: bool,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection { hidden: DEFAULT_HIDDEN, cold_start: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta_list: Option<Vec<f64>>,
    #[serde(default = "default_batch")]
    pub batch_size: usize,
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr_phi: f64,
    #[serde(default = "default_lr")]
    pub lr_theta: f64,
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default = "default_beta2")]
    pub adam_beta2: f64,
    #[serde(default = "default_adam_eps")]
    pub adam_eps: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub deterministic_smalln: bool,
    #[serde(default = "default_threshold")]
    pub enumeration_threshold: usize,
    #[serde(default)]
    pub warm_start: bool,
}

fn default_batch() -> usize {
    1000
}
fn default_lr() -> f64 {
    0.01
}
fn default_beta1() -> f64 {
    AdamParams::default().beta1
}
fn default_beta2() -> f64 {
    AdamParams::default().beta2
}
fn default_adam_eps() -> f64 {
    AdamParams::default().eps
}
fn default_true() -> bool {
    true
}
fn default_threshold() -> usize {
    DEFAULT_ENUMERATION_THRESHOLD
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectrumSection {
    pub n_samples: usize,
}

impl Default for SpectrumSection {
    fn default() -> Self {
        SpectrumSection { n_samples: 10_000 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Checkpoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    pub directory: PathBuf,
    pub formats: Vec<OutputFormat>,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { directory: PathBuf::from("runs"), formats: vec![OutputFormat::Csv, OutputFormat::Checkpoint] }
    }
}

/// Command-line overrides applied on top of a configuration file.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub deterministic: bool,
    pub out: Option<PathBuf>,
}

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: RunConfig = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => Error::Config(format!("{}: {other}", path.display())),
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run configuration always serializes")
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(seed) = o.seed {
            self.train.seed = seed;
        }
        if o.deterministic {
            self.train.deterministic_smalln = true;
        }
        if let Some(out) = &o.out {
            self.output.directory = out.clone();
        }
    }

    pub fn validate(&self) -> Result<()> {
        let l = &self.lattice;
        if l.rows == 0 || l.cols == 0 {
            return Err(Error::EmptyLattice { rows: l.rows, cols: l.cols });
        }
        let gammas = match (&l.gamma, &l.gamma_list) {
            (Some(g), None) => vec![*g],
            (None, Some(list)) if !list.is_empty() => list.clone(),
            (None, Some(_)) => return Err(config_err("lattice.gamma_list is empty")),
            _ => return Err(config_err("set exactly one of lattice.gamma and lattice.gamma_list")),
        };
        for g in gammas {
            LatticeSpec::new(l.rows, l.cols, g)?;
        }
        if self.circuit.depth == 0 {
            return Err(Error::ZeroDepth);
        }
        if self.model.hidden == 0 {
            return Err(config_err("model.hidden must be positive"));
        }
        let betas = match (&self.train.beta, &self.train.beta_list) {
            (Some(b), None) => vec![*b],
            (None, Some(list)) if !list.is_empty() => list.clone(),
            (None, Some(_)) => return Err(config_err("train.beta_list is empty")),
            _ => return Err(config_err("set exactly one of train.beta and train.beta_list")),
        };
        for beta in betas {
            self.train_config(beta).validate()?;
        }
        if self.spectrum.n_samples == 0 {
            return Err(config_err("spectrum.n_samples must be positive"));
        }
        Ok(())
    }

    pub fn gammas(&self) -> Vec<f64> {
        self.lattice.gamma.map_or_else(|| self.lattice.gamma_list.clone().unwrap_or_default(), |g| vec![g])
    }

    pub fn betas(&self) -> Vec<f64> {
        self.train.beta.map_or_else(|| self.train.beta_list.clone().unwrap_or_default(), |b| vec![b])
    }

    pub fn lattice(&self, gamma: f64) -> LatticeSpec {
        LatticeSpec { rows: self.lattice.rows, cols: self.lattice.cols, gamma, boundary: Boundary::Open }
    }

    pub fn n_qubits(&self) -> usize {
        self.lattice.rows * self.lattice.cols
    }

    pub fn ansatz_options(&self) -> AnsatzOptions {
        AnsatzOptions { local_layer: self.circuit.local_layer }
    }

    pub fn train_config(&self, beta: f64) -> TrainConfig {
        let t = &self.train;
        TrainConfig {
            beta,
            batch_size: t.batch_size,
            epochs: t.epochs,
            lr_phi: t.lr_phi,
            lr_theta: t.lr_theta,
            adam: AdamParams { beta1: t.adam_beta1, beta2: t.adam_beta2, eps: t.adam_eps },
            seed: t.seed,
            deterministic_smalln: t.deterministic_smalln,
            enumeration_threshold: t.enumeration_threshold,
            hidden: self.model.hidden,
            cold_start: self.model.cold_start,
        }
    }

    pub fn sha256(&self) -> String {
        let digest = Sha256::digest(self.to_toml().as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }

    fn wants(&self, f: OutputFormat) -> bool {
        self.output.formats.contains(&f)
    }
}

/// Sizes the global worker pool from `BETAVQE_THREADS`, if set.
pub fn init_threads_from_env() -> Result<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = value.trim().parse().map_err(|_| config_err(format!("{THREADS_ENV}={value:?} is not a count")))?;
    // a pool may already exist (tests, repeated calls); keep it
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    config_sha256: String,
    seed: u64,
    config: &'a RunConfig,
}

/// Output directory plus the provenance line stamped on every CSV.
struct RunDir {
    root: PathBuf,
    stamp: String,
}

impl RunDir {
    fn create(config: &RunConfig, command: &str) -> Result<Self> {
        let root = config.output.directory.clone();
        fs::create_dir_all(&root).map_err(|e| Error::io(&root, e))?;
        let manifest =
            Manifest { command, version: VERSION, config_sha256: config.sha256(), seed: config.train.seed, config };
        let path = root.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)? + "\n").map_err(|e| Error::io(&path, e))?;
        let stamp = format!(
            "# manifest=manifest.json config_sha256={} seed={} version={}\n",
            manifest.config_sha256, manifest.seed, VERSION
        );
        Ok(RunDir { root, stamp })
    }

    fn subdir(&self, config: &RunConfig, gamma: f64) -> Result<PathBuf> {
        if config.gammas().len() == 1 {
            return Ok(self.root.clone());
        }
        let dir = self.root.join(format!("gamma_{gamma}"));
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(dir)
    }

    fn write_csv(&self, path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        w.write_record(header)?;
        for r in rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| config_err(format!("csv buffer: {e}")))?;
        let mut bytes = self.stamp.clone().into_bytes();
        bytes.extend(body);
        fs::write(path, bytes).map_err(|e| Error::io(path, e))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn exact_spectrum(config: &RunConfig, gamma: f64) -> Result<Option<Spectrum>> {
    if config.n_qubits() > EXACT_QUBIT_LIMIT {
        return Ok(None);
    }
    Ok(Some(Spectrum::new(&build_tfim(&config.lattice(gamma))?)?))
}

fn new_trainer(config: &RunConfig, gamma: f64, beta: f64) -> Result<Trainer> {
    Trainer::for_lattice(
        config.train_config(beta),
        &config.lattice(gamma),
        config.circuit.depth,
        config.ansatz_options(),
    )
}

fn save_checkpoint(config: &RunConfig, dir: &Path, trainer: &Trainer) -> Result<()> {
    if !config.wants(OutputFormat::Checkpoint) {
        return Ok(());
    }
    trainer.model.to_checkpoint().save(&dir.join("made.json"))?;
    theta_to_checkpoint(&trainer.theta).save(&dir.join("theta.json"))?;
    let path = dir.join("circuit.txt");
    fs::write(&path, trainer.circuit.to_text()).map_err(|e| Error::io(&path, e))
}

/// Summary of a finished training run for one field strength.
#[derive(Clone, Debug)]
pub struct TrainSummary {
    pub gamma: f64,
    pub trajectory: Vec<EpochRecord>,
    pub exact_free_energy: Option<f64>,
}

/// `train`: one run per field strength at a single `beta`.
///
/// Writes `loss_trajectory.csv` (epoch, loss, stderr, exact_free_energy) and,
/// when enabled, `made.json`, `theta.json` and `circuit.txt`.
pub fn cmd_train(config: &RunConfig) -> Result<Vec<TrainSummary>> {
    config.validate()?;
    let betas = config.betas();
    let [beta] = betas[..] else {
        return Err(config_err("train needs a single train.beta; use sweep for beta_list"));
    };
    let run = RunDir::create(config, "train")?;
    let mut out = Vec::new();
    for gamma in config.gammas() {
        let dir = run.subdir(config, gamma)?;
        let exact = exact_spectrum(config, gamma)?.map(|s| s.thermal(beta).free_energy);
        let mut trainer = new_trainer(config, gamma, beta)?;
        let trajectory = trainer.run(config.train.epochs, |_| {})?;
        if config.wants(OutputFormat::Csv) {
            let rows: Vec<Vec<String>> = trajectory
                .iter()
                .map(|r| vec![r.epoch.to_string(), r.loss.to_string(), r.stderr.to_string(), opt(exact)])
                .collect();
            run.write_csv(&dir.join("loss_trajectory.csv"), &["epoch", "loss", "stderr", "exact_free_energy"], &rows)?;
        }
        save_checkpoint(config, &dir, &trainer)?;
        out.push(TrainSummary { gamma, trajectory, exact_free_energy: exact });
    }
    Ok(out)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub gamma: f64,
    pub beta: f64,
    pub observables: Observables,
    pub n_sites: usize,
    pub exact_energy: Option<f64>,
    pub exact_specific_heat: Option<f64>,
    pub exact_entropy: Option<f64>,
}

pub const OBSERVABLE_COLUMNS: [&str; 10] = [
    "beta",
    "energy",
    "specific_heat",
    "entropy",
    "entropy_per_site",
    "purity",
    "loss",
    "exact_energy",
    "exact_specific_heat",
    "exact_entropy",
];

/// `sweep`: independent (optionally warm-started) runs over `beta_list`,
/// measuring thermal observables into `observables.csv`.
pub fn cmd_sweep(config: &RunConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let run = RunDir::create(config, "sweep")?;
    let n = config.n_qubits();
    let mut all = Vec::new();
    for gamma in config.gammas() {
        let dir = run.subdir(config, gamma)?;
        let spectrum = exact_spectrum(config, gamma)?;
        let mut previous: Option<(MadeModel, Vec<f64>)> = None;
        let mut rows = Vec::new();
        for beta in config.betas() {
            let mut trainer = new_trainer(config, gamma, beta)?;
            if config.train.warm_start {
                if let Some((model, theta)) = previous.take() {
                    trainer.warm_start(model, theta)?;
                }
            }
            trainer.run(config.train.epochs, |_| {})?;
            let observables = trainer.observables()?;
            let exact = spectrum.as_ref().map(|s| s.thermal(beta));
            rows.push(SweepRow {
                gamma,
                beta,
                observables,
                n_sites: n,
                exact_energy: exact.as_ref().map(|e| e.energy),
                exact_specific_heat: exact.as_ref().map(|e| e.specific_heat),
                exact_entropy: exact.as_ref().map(|e| e.entropy),
            });
            previous = Some((trainer.model.clone(), trainer.theta.clone()));
        }
        if config.wants(OutputFormat::Csv) {
            let table: Vec<Vec<String>> = rows
                .iter()
                .map(|r| {
                    let o = &r.observables;
                    vec![
                        r.beta.to_string(),
                        o.energy.to_string(),
                        o.specific_heat.to_string(),
                        o.entropy.to_string(),
                        (o.entropy / n as f64).to_string(),
                        o.purity.to_string(),
                        o.loss.to_string(),
                        opt(r.exact_energy),
                        opt(r.exact_specific_heat),
                        opt(r.exact_entropy),
                    ]
                })
                .collect();
            run.write_csv(&dir.join("observables.csv"), &OBSERVABLE_COLUMNS, &table)?;
        }
        all.extend(rows);
    }
    Ok(all)
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumTableRow {
    pub gamma: f64,
    pub row: SpectrumRow,
    pub nearest_exact: Option<f64>,
}

pub const SPECTRUM_COLUMNS: [&str; 6] =
    ["gamma", "bitstring", "sampled_energy", "log_prob", "nearest_exact_eigenvalue", "abs_error"];

/// `spectrum`: circuit energies of the distinct strings sampled from a
/// trained model, written to `spectrum.csv`.
///
/// With `checkpoint` set, parameters are read from `made.json`/`theta.json`
/// in that directory (or its `gamma_<value>/` subdirectories, matching the
/// layout `train` writes); otherwise each field strength is trained inline
/// at the single configured `beta`.
pub fn cmd_spectrum(config: &RunConfig, checkpoint: Option<&Path>) -> Result<Vec<SpectrumTableRow>> {
    config.validate()?;
    let betas = config.betas();
    let [beta] = betas[..] else {
        return Err(config_err("spectrum needs a single train.beta"));
    };
    let run = RunDir::create(config, "spectrum")?;
    let mut table = Vec::new();
    for gamma in config.gammas() {
        let mut trainer = new_trainer(config, gamma, beta)?;
        match checkpoint {
            Some(root) => {
                let dir =
                    if config.gammas().len() == 1 { root.to_path_buf() } else { root.join(format!("gamma_{gamma}")) };
                let model = MadeModel::from_checkpoint(&ArrayFile::load(&dir.join("made.json"))?)?;
                let theta = theta_from_checkpoint(&ArrayFile::load(&dir.join("theta.json"))?)?;
                trainer.warm_start(model, theta)?;
            }
            None => {
                trainer.run(config.train.epochs, |_| {})?;
                save_checkpoint(config, &run.subdir(config, gamma)?, &trainer)?;
            }
        }
        let spectrum = exact_spectrum(config, gamma)?;
        for row in trainer.excitation_spectrum(config.spectrum.n_samples)? {
            table.push(SpectrumTableRow {
                gamma,
                row,
                nearest_exact: spectrum.as_ref().map(|s| s.nearest(row.energy)),
            });
        }
    }
    if config.wants(OutputFormat::Csv) {
        let rows: Vec<Vec<String>> = table
            .iter()
            .map(|t| {
                vec![
                    t.gamma.to_string(),
                    t.row.bits.to_string(),
                    t.row.energy.to_string(),
                    t.row.log_prob.to_string(),
                    opt(t.nearest_exact),
                    opt(t.nearest_exact.map(|e| (t.row.energy - e).abs())),
                ]
            })
            .collect();
        run.write_csv(&run.root.join("spectrum.csv"), &SPECTRUM_COLUMNS, &rows)?;
    }
    Ok(table)
}

pub const REFERENCE_COLUMNS: [&str; 10] =
    ["rows", "cols", "gamma", "beta", "free_energy", "energy", "specific_heat", "entropy", "purity", "ground_energy"];

/// `oracle`: exact thermal reference values for every `(gamma, beta)` pair
/// in the configuration, written to `reference.csv`. `free_energy` is `-ln Z`.
pub fn cmd_oracle(config: &RunConfig) -> Result<Vec<Vec<String>>> {
    config.validate()?;
    if config.n_qubits() > EXACT_QUBIT_LIMIT {
        return Err(Error::TooManyQubits { n: config.n_qubits(), limit: EXACT_QUBIT_LIMIT });
    }
    let run = RunDir::create(config, "oracle")?;
    let mut rows = Vec::new();
    for gamma in config.gammas() {
        let spectrum = exact_spectrum(config, gamma)?.expect("size checked above");
        for beta in config.betas() {
            let s = spectrum.thermal(beta);
            rows.push(vec![
                config.lattice.rows.to_string(),
                config.lattice.cols.to_string(),
                gamma.to_string(),
                beta.to_string(),
                s.free_energy.to_string(),
                s.energy.to_string(),
                s.specific_heat.to_string(),
                s.entropy.to_string(),
                s.purity.to_string(),
                s.ground_energy().to_string(),
            ]);
        }
    }
    run.write_csv(&run.root.join("reference.csv"), &REFERENCE_COLUMNS, &rows)?;
    Ok(rows)
}

/// Checks that a lattice/circuit pair builds, without running anything.
pub fn dry_run(config: &RunConfig) -> Result<usize> {
    config.validate()?;
    let lattice = config.lattice(config.gammas()[0]);
    Ok(build_ansatz_with(&lattice, config.circuit.depth, config.ansatz_options())?.n_params())
}
