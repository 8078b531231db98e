//! Experiment orchestration: data generation, training of every decoder
//! scheme, test-set evaluation and the digital-twin transfer study.

pub mod config;
pub mod eval;
pub mod pipeline;
pub mod trainer;

pub use config::{ExperimentConfig, Scheme, TrainingConfig};
pub use eval::{evaluate, mean_ci95, EvalReport, EvalRow, Method};
pub use pipeline::{codebook_csi, run_pipeline_sample};
pub use trainer::{new_decoder, train, EpochLog, TrainOutcome};

use crate::channel::{generate_dataset, Dataset, TwinPerturbation};
use crate::codebook::CodebookConfig;
use crate::Result;

/// Generate the configured target-site records, optionally through a twin.
pub fn generate(config: &ExperimentConfig, twin: Option<&TwinPerturbation>) -> Result<Dataset> {
    generate_dataset(&config.scenario, config.n_users, config.n_samples, twin, config.estimation())
}

/// Split into the leading training records and the trailing test records.
pub fn split(config: &ExperimentConfig, dataset: &Dataset) -> (Dataset, Dataset) {
    let n_train = config.n_train().min(dataset.len());
    (dataset.slice(0..n_train), dataset.slice(n_train..dataset.len()))
}

/// Codebook-only and genie rows for `codebook`.
pub fn baseline_methods<'a>(codebook: CodebookConfig, n_tx: usize) -> Vec<Method<'a>> {
    vec![
        Method::new(Scheme::CodebookOnly.name(), Scheme::CodebookOnly, codebook, None, n_tx),
        Method::new(Scheme::Genie.name(), Scheme::Genie, codebook, None, n_tx),
    ]
}

#[derive(Clone, Debug)]
pub struct Experiment {
    pub report: EvalReport,
    pub outcome: Option<TrainOutcome>,
}

/// Generate data, train the configured scheme (if it learns anything) and
/// evaluate it next to the codebook-only and genie baselines.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Experiment> {
    config.validate()?;
    let data = generate(config, None)?;
    let (train_set, test_set) = split(config, &data);
    run_experiment_on(config, &train_set, &test_set)
}

/// [`run_experiment`] on existing train and test sets.
pub fn run_experiment_on(config: &ExperimentConfig, train_set: &Dataset, test_set: &Dataset) -> Result<Experiment> {
    let n_tx = config.scenario.n_tx;
    let outcome = if config.scheme.is_trained() {
        Some(train(config, train_set)?)
    } else {
        None
    };
    let mut methods = Vec::new();
    if let Some(o) = &outcome {
        methods.push(Method::new(config.scheme.name(), config.scheme, config.codebook, Some(&o.decoder), n_tx));
    }
    methods.extend(baseline_methods(config.codebook, n_tx));
    let report = evaluate(
        &methods,
        test_set,
        config.power(),
        config.noise_power(),
        config.training.seed,
        &config.hash(),
    )?;
    Ok(Experiment { report, outcome })
}

pub const TARGET_TRAINED: &str = "target_trained";
pub const TWIN_FOLIAGE: &str = "twin_foliage_removed";
pub const TWIN_FOLIAGE_POSITION: &str = "twin_foliage_position_error";

#[derive(Clone, Debug)]
pub struct TwinStudy {
    pub report: EvalReport,
    pub target: TrainOutcome,
    pub twin_foliage: TrainOutcome,
    pub twin_full: TrainOutcome,
}

/// Train on the target site and on two imperfect replicas of it, then test all
/// three decoders on the same held-out target records.
///
/// The first replica only removes foliage (if `config.twin.drop_foliage`); the
/// second applies `config.twin` in full, position error included.
pub fn twin_transfer_experiment(config: &ExperimentConfig) -> Result<TwinStudy> {
    config.validate()?;
    if !config.scheme.is_trained() {
        return Err(crate::Error::Config(format!("twin study needs a trained scheme, got {}", config.scheme)));
    }
    let target = generate(config, None)?;
    let (target_train, test_set) = split(config, &target);
    let target_outcome = train(config, &target_train)?;
    twin_transfer_from(config, target_outcome, &test_set)
}

/// The twin half of [`twin_transfer_experiment`] for an already trained target
/// decoder: train on both replicas and test all three on `test_set`.
pub fn twin_transfer_from(config: &ExperimentConfig, target_outcome: TrainOutcome, test_set: &Dataset) -> Result<TwinStudy> {
    let train_on = |pert: &TwinPerturbation| -> Result<TrainOutcome> {
        if pert.is_identity() {
            // The replica is the site itself: same records, same training run.
            return Ok(target_outcome.clone());
        }
        let twin = generate(config, Some(pert))?;
        let (twin_train, _) = split(config, &twin);
        train(config, &twin_train)
    };
    let foliage_only = TwinPerturbation {
        position_error_std: 0.0,
        ..config.twin.clone()
    };
    let twin_foliage = train_on(&foliage_only)?;
    let twin_full = train_on(&config.twin)?;

    let n_tx = config.scenario.n_tx;
    let mut methods = vec![
        Method::new(TARGET_TRAINED, config.scheme, config.codebook, Some(&target_outcome.decoder), n_tx),
        Method::new(TWIN_FOLIAGE, config.scheme, config.codebook, Some(&twin_foliage.decoder), n_tx),
        Method::new(TWIN_FOLIAGE_POSITION, config.scheme, config.codebook, Some(&twin_full.decoder), n_tx),
    ];
    methods.extend(baseline_methods(config.codebook, n_tx));
    let report = evaluate(
        &methods,
        test_set,
        config.power(),
        config.noise_power(),
        config.training.seed,
        &config.hash(),
    )?;
    Ok(TwinStudy {
        report,
        target: target_outcome,
        twin_foliage,
        twin_full,
    })
}
