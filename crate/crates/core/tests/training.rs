use betavqe::ansatz::AnsatzOptions;
use betavqe::exact::Spectrum;
use betavqe::made::MadeModel;
use betavqe::pauli::{build_tfim, LatticeSpec};
use betavqe::trainer::{estimate_loss, EvalMode, TrainConfig, Trainer};
use betavqe::BitString;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_config(beta: f64) -> TrainConfig {
    TrainConfig { beta, hidden: 16, epochs: 30, seed: 3, ..Default::default() }
}

#[test]
fn random_parameters_respect_the_gibbs_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let lattice = LatticeSpec::new(2, 2, 2.5).unwrap();
    let h = build_tfim(&lattice).unwrap();
    let spectrum = Spectrum::new(&h).unwrap();
    for beta in [0.1, 1.0, 3.0] {
        let bound = spectrum.thermal(beta).free_energy;
        for _ in 0..10 {
            let mut t = Trainer::for_lattice(small_config(beta), &lattice, 1, AnsatzOptions::default()).unwrap();
            t.model = MadeModel::random(4, 16, &mut rng);
            t.theta.iter_mut().for_each(|a| *a = rng.gen_range(-3.0..3.0));
            let est = estimate_loss(&t.model, &t.circuit, &t.theta, &t.h, beta, EvalMode::Enumerate, &mut rng).unwrap();
            assert!(est.mean >= bound - 1e-9, "beta {beta}: {} < {bound}", est.mean);
        }
    }
}

#[test]
fn cold_start_loss_is_uniform_average() {
    let lattice = LatticeSpec::new(1, 3, 1.0).unwrap();
    let h = build_tfim(&lattice).unwrap();
    let mut t = Trainer::for_lattice(small_config(2.0), &lattice, 1, AnsatzOptions::default()).unwrap();
    let row = t.step(0, false).unwrap();
    let mean_diag: f64 = BitString::all(3).map(|x| h.diagonal_element(x.index() as usize)).sum::<f64>() / 8.0;
    assert!((row.loss - (-3.0 * 2f64.ln() + 2.0 * mean_diag)).abs() < 1e-12);
    assert!((row.entropy - 3.0 * 2f64.ln()).abs() < 1e-12);
}

#[test]
fn zero_epochs_yields_only_the_initial_row() {
    let lattice = LatticeSpec::new(1, 2, 1.0).unwrap();
    let mut t = Trainer::for_lattice(small_config(1.0), &lattice, 1, AnsatzOptions::default()).unwrap();
    let theta = t.theta.clone();
    let rows = t.run(0, |_| {}).unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0].epoch, 0);
    assert_eq!(t.theta, theta);
}

#[test]
fn training_lowers_the_loss() {
    let lattice = LatticeSpec::new(1, 3, 1.0).unwrap();
    let mut t = Trainer::for_lattice(small_config(1.0), &lattice, 1, AnsatzOptions::default()).unwrap();
    let rows = t.run(200, |_| {}).unwrap();
    let bound = Spectrum::new(&t.h).unwrap().thermal(1.0).free_energy;
    assert!(rows.last().unwrap().loss < rows[0].loss);
    assert!(rows.iter().all(|r| r.loss >= bound - 1e-9));
}

#[test]
fn identical_seeds_give_identical_runs() {
    let lattice = LatticeSpec::new(2, 2, 3.0).unwrap();
    let config = TrainConfig { deterministic_smalln: false, batch_size: 50, ..small_config(1.0) };
    let run = || {
        let mut t = Trainer::for_lattice(config.clone(), &lattice, 1, AnsatzOptions::default()).unwrap();
        (t.run(20, |_| {}).unwrap(), t.theta)
    };
    assert_eq!(run(), run());
}

#[test]
fn invalid_settings_are_rejected() {
    let lattice = LatticeSpec::new(1, 2, 1.0).unwrap();
    for config in [
        TrainConfig { batch_size: 1, ..Default::default() },
        TrainConfig { beta: -1.0, ..Default::default() },
        TrainConfig { lr_phi: 0.0, ..Default::default() },
        TrainConfig { hidden: 0, ..Default::default() },
    ] {
        assert!(Trainer::for_lattice(config, &lattice, 1, AnsatzOptions::default()).is_err());
    }
    assert!(Trainer::for_lattice(TrainConfig::default(), &lattice, 0, AnsatzOptions::default()).is_err());
}

#[test]
fn symmetric_cold_start_is_stationary_when_enumerated() {
    let lattice = LatticeSpec::new(2, 2, 0.0).unwrap();
    let config = TrainConfig { beta: 2.0, ..small_config(2.0) };
    let mut t = Trainer::for_lattice(config.clone(), &lattice, 1, AnsatzOptions::default()).unwrap();
    let rows = t.run(20, |_| {}).unwrap();
    assert!(rows.iter().all(|r| r.loss == rows[0].loss));
    assert!(t.theta.iter().all(|&a| a == 0.0));

    let warm = TrainConfig { cold_start: false, ..config };
    let mut t = Trainer::for_lattice(warm, &lattice, 1, AnsatzOptions::default()).unwrap();
    let rows = t.run(20, |_| {}).unwrap();
    assert!(rows.last().unwrap().loss < rows[0].loss);
}
