#![allow(dead_code)]

use csiforge::channel::ScenarioConfig;
use csiforge::codebook::CodebookConfig;
use csiforge::training::{ExperimentConfig, Scheme};

/// A scenario small enough for debug-mode tests: 8 antennas, 48 subcarriers.
pub fn tiny(scheme: Scheme, n_samples: usize, epochs: usize) -> ExperimentConfig {
    let mut c = ExperimentConfig {
        scenario: ScenarioConfig {
            n_tx: 8,
            n_taps: 8,
            ..ScenarioConfig::desk()
        },
        codebook: CodebookConfig::type_ii(2, 4),
        scheme,
        n_samples,
        split: 0.5,
        ..ExperimentConfig::desk()
    };
    c.training.epochs = epochs;
    c.training.batch_size = 4;
    c.training.validation_fraction = 0.25;
    c
}
