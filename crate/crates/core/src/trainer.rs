//! Joint optimization of the autoregressive model and the circuit.
//!
//! For a batch of inputs `x` the per-sample reward is
//! `f(x) = ln p(x) + beta * <x|U^dag H U|x>`, and its mean is the variational
//! free energy `L = Tr(rho ln rho) + beta Tr(rho H)`, bounded below by `-ln Z`.
//! Circuit angles follow `beta * E[grad <x|U^dag H U|x>]`; network weights
//! follow the score-function estimate `E[(f(x) - b) grad ln p(x)]` with the
//! batch mean as baseline `b`. Both parameter groups are updated with Adam.
//!
//! Small systems can be evaluated by exact enumeration over all `2^n` inputs
//! weighted by `p(x)`, in which case every expectation above is exact.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{build_ansatz_with, AnsatzOptions};
use crate::bits::BitString;
use crate::error::{Error, Result};
use crate::made::{BitSample, MadeModel, DEFAULT_HIDDEN};
use crate::optim::{adam_step, AdamParams, AdamState};
use crate::pauli::{build_tfim, LatticeSpec, PauliSum};
use crate::statevector::{apply_pauli_sum, circuit_energy, energy_and_gradient, evolve, expectation, Circuit};

/// Default size cut-off for exact enumeration.
pub const DEFAULT_ENUMERATION_THRESHOLD: usize = 10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub beta: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_phi: f64,
    pub lr_theta: f64,
    pub adam: AdamParams,
    pub seed: u64,
    /// Replace sampling by exact enumeration when `n <= enumeration_threshold`.
    pub deterministic_smalln: bool,
    pub enumeration_threshold: usize,
    pub hidden: usize,
    /// Start the network from all-zero weights (the uniform distribution).
    ///
    /// With zero circuit angles this start is a stationary point of the
    /// enumerated loss for spin-flip symmetric Hamiltonians; sampled batches
    /// leave it through sampling noise, enumerated runs may need random
    /// weights instead.
    pub cold_start: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            beta: 1.0,
            batch_size: 1000,
            epochs: 1000,
            lr_phi: 0.01,
            lr_theta: 0.01,
            adam: AdamParams::default(),
            seed: 0,
            deterministic_smalln: true,
            enumeration_threshold: DEFAULT_ENUMERATION_THRESHOLD,
            hidden: DEFAULT_HIDDEN,
            cold_start: true,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be finite and non-negative, got {}", self.beta)));
        }
        if self.batch_size < 2 {
            return Err(Error::BatchTooSmall { min: 2, got: self.batch_size });
        }
        for (name, lr) in [("lr_phi", self.lr_phi), ("lr_theta", self.lr_theta)] {
            if !(lr.is_finite() && lr > 0.0) {
                return Err(Error::Config(format!("{name} must be positive, got {lr}")));
            }
        }
        let a = &self.adam;
        if !(0.0..1.0).contains(&a.beta1) || !(0.0..1.0).contains(&a.beta2) || a.eps.is_nan() || a.eps <= 0.0 {
            return Err(Error::Config("adam parameters need 0 <= beta1, beta2 < 1 and eps > 0".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("hidden layer must have at least one unit".into()));
        }
        Ok(())
    }

    /// How a system of `n` sites is evaluated under this configuration.
    pub fn mode_for(&self, n: usize) -> EvalMode {
        if self.deterministic_smalln && n <= self.enumeration_threshold {
            EvalMode::Enumerate
        } else {
            EvalMode::Sample { batch: self.batch_size }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EvalMode {
    Enumerate,
    Sample { batch: usize },
}

/// Distinct inputs with their weights in the estimator.
///
/// For a sampled batch the weight is the multiplicity over the batch size;
/// for enumeration it is `p(x)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub entries: Vec<BatchEntry>,
    /// Number of draws, or `None` for exact enumeration.
    pub draws: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BatchEntry {
    pub bits: BitString,
    pub log_prob: f64,
    pub weight: f64,
}

impl Batch {
    /// Groups i.i.d. samples by bit string, ordered by string index.
    pub fn from_samples(samples: &[BitSample]) -> Result<Self> {
        if samples.is_empty() {
            return Err(Error::EmptyBatch);
        }
        let mut sorted: Vec<BitSample> = samples.to_vec();
        sorted.sort_by_key(|s| s.bits);
        let n = samples.len() as f64;
        let mut entries: Vec<BatchEntry> = Vec::new();
        for s in sorted {
            match entries.last_mut() {
                Some(e) if e.bits == s.bits => e.weight += 1.0,
                _ => entries.push(BatchEntry { bits: s.bits, log_prob: s.log_prob, weight: 1.0 }),
            }
        }
        for e in &mut entries {
            e.weight /= n;
        }
        Ok(Batch { entries, draws: Some(samples.len()) })
    }

    pub fn enumerate(model: &MadeModel) -> Result<Self> {
        let entries = BitString::all(model.n_sites())
            .map(|bits| {
                let log_prob = model.log_prob(bits)?;
                Ok(BatchEntry { bits, log_prob, weight: log_prob.exp() })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Batch { entries, draws: None })
    }

    pub fn draw<R: rand::Rng + ?Sized>(model: &MadeModel, mode: EvalMode, rng: &mut R) -> Result<Self> {
        match mode {
            EvalMode::Enumerate => Self::enumerate(model),
            EvalMode::Sample { batch } => Self::from_samples(&model.sample(batch, rng)?),
        }
    }

    pub fn is_exact(&self) -> bool {
        self.draws.is_none()
    }

    /// Weighted mean and its standard error.
    ///
    /// Sampled batches use the unbiased sample variance over the draws. For
    /// enumeration the "error" is the exact standard deviation of `values`
    /// under `p`, which vanishes only when `values` is constant.
    pub fn mean_and_stderr(&self, values: &[f64]) -> (f64, f64) {
        let mean: f64 = self.entries.iter().zip(values).map(|(e, v)| e.weight * v).sum();
        let ss: f64 = self.entries.iter().zip(values).map(|(e, v)| e.weight * (v - mean).powi(2)).sum();
        let err = match self.draws {
            None => ss.max(0.0).sqrt(),
            Some(b) if b > 1 => {
                let b = b as f64;
                (ss * b / (b - 1.0) / b).sqrt()
            }
            Some(_) => f64::NAN,
        };
        (mean, err)
    }
}

/// `f(x) = ln p(x) + beta <x|U^dag H U|x>`.
pub fn per_sample_reward(
    x: BitString,
    theta: &[f64],
    circuit: &Circuit,
    h: &PauliSum,
    beta: f64,
    model: &MadeModel,
) -> Result<f64> {
    Ok(model.log_prob(x)? + beta * circuit_energy(x, circuit, theta, h)?)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossEstimate {
    pub mean: f64,
    pub stderr: f64,
}

pub fn estimate_loss<R: rand::Rng + ?Sized>(
    model: &MadeModel,
    circuit: &Circuit,
    theta: &[f64],
    h: &PauliSum,
    beta: f64,
    mode: EvalMode,
    rng: &mut R,
) -> Result<LossEstimate> {
    if let EvalMode::Sample { batch } = mode {
        if batch < 2 {
            return Err(Error::BatchTooSmall { min: 2, got: batch });
        }
    }
    let batch = Batch::draw(model, mode, rng)?;
    let energies = circuit_energies(&batch, circuit, theta, h)?;
    let rewards: Vec<f64> = batch.entries.iter().zip(&energies).map(|(e, en)| e.log_prob + beta * en).collect();
    let (mean, stderr) = batch.mean_and_stderr(&rewards);
    Ok(LossEstimate { mean, stderr })
}

fn circuit_energies(batch: &Batch, circuit: &Circuit, theta: &[f64], h: &PauliSum) -> Result<Vec<f64>> {
    batch.entries.par_iter().map(|e| circuit_energy(e.bits, circuit, theta, h)).collect()
}

/// `beta * sum_x w(x) grad_theta <x|U^dag H U|x>` over a batch.
pub fn grad_theta(batch: &Batch, circuit: &Circuit, theta: &[f64], h: &PauliSum, beta: f64) -> Result<Vec<f64>> {
    if batch.entries.is_empty() {
        return Err(Error::EmptyBatch);
    }
    let per: Vec<(f64, Vec<f64>)> =
        batch.entries.par_iter().map(|e| energy_and_gradient(e.bits, circuit, theta, h)).collect::<Result<_>>()?;
    let mut grad = vec![0.0; circuit.n_params()];
    for (e, (_, g)) in batch.entries.iter().zip(&per) {
        for (acc, gk) in grad.iter_mut().zip(g) {
            *acc += beta * e.weight * gk;
        }
    }
    Ok(grad)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Baseline {
    /// Weighted batch mean of the rewards.
    BatchMean,
    None,
    Constant(f64),
}

/// Score-function gradient `sum_x w(x) (f(x) - b) grad ln p(x)`.
pub fn grad_phi(model: &MadeModel, batch: &Batch, rewards: &[f64], baseline: Baseline) -> Result<Vec<f64>> {
    if let Some(draws) = batch.draws {
        if draws < 2 {
            return Err(Error::BatchTooSmall { min: 2, got: draws });
        }
    }
    if rewards.len() != batch.entries.len() {
        return Err(Error::ParameterCount { expected: batch.entries.len(), got: rewards.len() });
    }
    let b = match baseline {
        Baseline::BatchMean => batch.entries.iter().zip(rewards).map(|(e, f)| e.weight * f).sum(),
        Baseline::None => 0.0,
        Baseline::Constant(c) => c,
    };
    let mut grad = vec![0.0; model.n_params()];
    for (e, f) in batch.entries.iter().zip(rewards) {
        let scale = e.weight * (f - b);
        if scale != 0.0 {
            model.accumulate_grad_log_prob(e.bits, scale, &mut grad)?;
        }
    }
    Ok(grad)
}

/// Telemetry for one evaluation of the objective.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub stderr: f64,
    pub energy: f64,
    pub entropy: f64,
}

/// Everything one optimization step needs, from a single pass over a batch.
#[derive(Clone, Debug)]
pub struct BatchEvaluation {
    pub loss: f64,
    pub stderr: f64,
    pub energy: f64,
    pub entropy: f64,
    pub grad_theta: Vec<f64>,
    pub grad_phi: Vec<f64>,
}

pub fn evaluate_batch(
    model: &MadeModel,
    circuit: &Circuit,
    theta: &[f64],
    h: &PauliSum,
    beta: f64,
    batch: &Batch,
) -> Result<BatchEvaluation> {
    let per: Vec<(f64, Vec<f64>)> =
        batch.entries.par_iter().map(|e| energy_and_gradient(e.bits, circuit, theta, h)).collect::<Result<_>>()?;
    let energies: Vec<f64> = per.iter().map(|(e, _)| *e).collect();
    let rewards: Vec<f64> = batch.entries.iter().zip(&energies).map(|(e, en)| e.log_prob + beta * en).collect();
    let (loss, stderr) = batch.mean_and_stderr(&rewards);
    if !loss.is_finite() {
        return Err(Error::NonFinite { what: "loss".into() });
    }
    let (energy, _) = batch.mean_and_stderr(&energies);
    let neg_lp: Vec<f64> = batch.entries.iter().map(|e| -e.log_prob).collect();
    let (entropy, _) = batch.mean_and_stderr(&neg_lp);
    let mut g_theta = vec![0.0; circuit.n_params()];
    for (e, (_, g)) in batch.entries.iter().zip(&per) {
        for (acc, gk) in g_theta.iter_mut().zip(g) {
            *acc += beta * e.weight * gk;
        }
    }
    let g_phi = grad_phi(model, batch, &rewards, Baseline::BatchMean)?;
    Ok(BatchEvaluation { loss, stderr, energy, entropy, grad_theta: g_theta, grad_phi: g_phi })
}

/// Thermal observables of the variational state.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observables {
    pub loss: f64,
    pub stderr: f64,
    pub energy: f64,
    pub energy_sq: f64,
    pub specific_heat: f64,
    pub entropy: f64,
    pub purity: f64,
}

/// Measures `<H>`, `beta^2 (<H^2> - <H>^2)`, entropy and purity.
///
/// `<x|U^dag H^2 U|x>` is taken as `‖H U|x>‖^2`.
pub fn measure_observables<R: rand::Rng + ?Sized>(
    model: &MadeModel,
    circuit: &Circuit,
    theta: &[f64],
    h: &PauliSum,
    beta: f64,
    mode: EvalMode,
    rng: &mut R,
) -> Result<Observables> {
    let batch = Batch::draw(model, mode, rng)?;
    let per: Vec<(f64, f64)> = batch
        .entries
        .par_iter()
        .map(|e| {
            let psi = evolve(e.bits, circuit, theta)?;
            let en = expectation(&psi, h)?;
            let hpsi = apply_pauli_sum(&psi, h)?;
            Ok((en, hpsi.iter().map(|a| a.norm_sqr()).sum()))
        })
        .collect::<Result<_>>()?;
    let energies: Vec<f64> = per.iter().map(|p| p.0).collect();
    let squares: Vec<f64> = per.iter().map(|p| p.1).collect();
    let rewards: Vec<f64> = batch.entries.iter().zip(&energies).map(|(e, en)| e.log_prob + beta * en).collect();
    let neg_lp: Vec<f64> = batch.entries.iter().map(|e| -e.log_prob).collect();
    let probs: Vec<f64> = batch.entries.iter().map(|e| e.log_prob.exp()).collect();
    let (loss, stderr) = batch.mean_and_stderr(&rewards);
    let (energy, _) = batch.mean_and_stderr(&energies);
    let (energy_sq, _) = batch.mean_and_stderr(&squares);
    let (entropy, _) = batch.mean_and_stderr(&neg_lp);
    let (purity, _) = batch.mean_and_stderr(&probs);
    Ok(Observables {
        loss,
        stderr,
        energy,
        energy_sq,
        specific_heat: beta * beta * (energy_sq - energy * energy),
        entropy,
        purity,
    })
}

/// Holds the parameters and optimizer state of one run.
#[derive(Clone, Debug)]
pub struct Trainer {
    pub model: MadeModel,
    pub circuit: Circuit,
    pub theta: Vec<f64>,
    pub h: PauliSum,
    pub config: TrainConfig,
    adam_phi: AdamState,
    adam_theta: AdamState,
    rng: ChaCha8Rng,
}

impl Trainer {
    /// Circuit angles start at zero.
    pub fn new(model: MadeModel, circuit: Circuit, h: PauliSum, config: TrainConfig) -> Result<Self> {
        config.validate()?;
        if h.n_qubits() != circuit.n_qubits() {
            return Err(Error::QubitMismatch { expected: circuit.n_qubits(), got: h.n_qubits() });
        }
        if model.n_sites() != circuit.n_qubits() {
            return Err(Error::QubitMismatch { expected: circuit.n_qubits(), got: model.n_sites() });
        }
        let theta = vec![0.0; circuit.n_params()];
        Ok(Trainer {
            adam_phi: AdamState::new(model.n_params()),
            adam_theta: AdamState::new(theta.len()),
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            model,
            circuit,
            theta,
            h,
            config,
        })
    }

    /// Fresh trainer for the TFIM on `lattice` with a brickwork circuit.
    pub fn for_lattice(
        config: TrainConfig,
        lattice: &LatticeSpec,
        depth: usize,
        options: AnsatzOptions,
    ) -> Result<Self> {
        config.validate()?;
        let h = build_tfim(lattice)?;
        let circuit = build_ansatz_with(lattice, depth, options)?.into_circuit();
        let n = lattice.n_qubits();
        let model = if config.cold_start {
            MadeModel::cold(n, config.hidden)
        } else {
            let mut init_rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
            MadeModel::random(n, config.hidden, &mut init_rng)
        };
        Trainer::new(model, circuit, h, config)
    }

    pub fn mode(&self) -> EvalMode {
        self.config.mode_for(self.circuit.n_qubits())
    }

    /// Replaces the optimized parameters, keeping optimizer state fresh.
    pub fn warm_start(&mut self, model: MadeModel, theta: Vec<f64>) -> Result<()> {
        if model.n_params() != self.model.n_params() || model.n_sites() != self.model.n_sites() {
            return Err(Error::ParameterCount { expected: self.model.n_params(), got: model.n_params() });
        }
        if theta.len() != self.theta.len() {
            return Err(Error::ParameterCount { expected: self.theta.len(), got: theta.len() });
        }
        self.model = model;
        self.theta = theta;
        Ok(())
    }

    /// Evaluates the objective at the current parameters and takes one step.
    pub fn step(&mut self, epoch: usize, update: bool) -> Result<EpochRecord> {
        let batch = Batch::draw(&self.model, self.mode(), &mut self.rng)?;
        let eval = evaluate_batch(&self.model, &self.circuit, &self.theta, &self.h, self.config.beta, &batch)?;
        if update {
            adam_step(
                self.model.params_mut(),
                &eval.grad_phi,
                &mut self.adam_phi,
                self.config.lr_phi,
                &self.config.adam,
            )?;
            adam_step(
                &mut self.theta,
                &eval.grad_theta,
                &mut self.adam_theta,
                self.config.lr_theta,
                &self.config.adam,
            )?;
        }
        Ok(EpochRecord { epoch, loss: eval.loss, stderr: eval.stderr, energy: eval.energy, entropy: eval.entropy })
    }

    /// Runs `epochs` updates. Row `k` of the record is measured after `k`
    /// updates, so `epochs + 1` rows are produced.
    pub fn run(&mut self, epochs: usize, mut on_epoch: impl FnMut(&EpochRecord)) -> Result<Vec<EpochRecord>> {
        let mut rows = Vec::with_capacity(epochs + 1);
        for epoch in 0..=epochs {
            let row = self.step(epoch, epoch < epochs)?;
            on_epoch(&row);
            rows.push(row);
        }
        Ok(rows)
    }

    pub fn observables(&mut self) -> Result<Observables> {
        let mode = self.mode();
        measure_observables(&self.model, &self.circuit, &self.theta, &self.h, self.config.beta, mode, &mut self.rng)
    }

    pub fn excitation_spectrum(&mut self, n_samples: usize) -> Result<Vec<SpectrumRow>> {
        excitation_spectrum(&self.model, &self.circuit, &self.theta, &self.h, n_samples, &mut self.rng)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}

/// Training telemetry plus the final parameters.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub epochs: Vec<EpochRecord>,
    pub model: MadeModel,
    pub theta: Vec<f64>,
    pub circuit: Circuit,
}

impl RunRecord {
    pub fn final_loss(&self) -> f64 {
        self.epochs.last().map_or(f64::NAN, |r| r.loss)
    }
}

/// Trains a cold-started model on the TFIM of `lattice`.
pub fn train(config: &TrainConfig, lattice: &LatticeSpec, depth: usize) -> Result<RunRecord> {
    let mut trainer = Trainer::for_lattice(config.clone(), lattice, depth, AnsatzOptions::default())?;
    let epochs = trainer.run(config.epochs, |_| {})?;
    Ok(RunRecord { epochs, model: trainer.model, theta: trainer.theta, circuit: trainer.circuit })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumRow {
    pub bits: BitString,
    pub energy: f64,
    pub log_prob: f64,
}

/// Circuit energies of the distinct strings in `n_samples` draws, ascending.
pub fn excitation_spectrum<R: rand::Rng + ?Sized>(
    model: &MadeModel,
    circuit: &Circuit,
    theta: &[f64],
    h: &PauliSum,
    n_samples: usize,
    rng: &mut R,
) -> Result<Vec<SpectrumRow>> {
    let batch = Batch::from_samples(&model.sample(n_samples, rng)?)?;
    let energies = circuit_energies(&batch, circuit, theta, h)?;
    let mut rows: Vec<SpectrumRow> = batch
        .entries
        .iter()
        .zip(energies)
        .map(|(e, energy)| SpectrumRow { bits: e.bits, energy, log_prob: e.log_prob })
        .collect();
    rows.sort_by(|a, b| a.energy.total_cmp(&b.energy).then(a.bits.cmp(&b.bits)));
    Ok(rows)
}

/// Lowest distinct values of `energies` (ascending input), merging values
/// closer than `tol`.
pub fn lowest_distinct(energies: impl IntoIterator<Item = f64>, count: usize, tol: f64) -> Vec<f64> {
    let mut out: Vec<f64> = Vec::new();
    for e in energies {
        if out.len() == count {
            break;
        }
        if out.last().is_none_or(|&l| e - l > tol) {
            out.push(e);
        }
    }
    out
}
