use serde::{Deserialize, Serialize};

use crate::channel::{Estimation, ScenarioConfig, TwinPerturbation};
use crate::codebook::{CodebookConfig, CodebookKind};
use crate::neural::encoder::FEEDBACK_BITS;
use crate::neural::{AdamConfig, Init};
use crate::{Error, Result};

/// How the base station turns reported CSI into precoders.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Scheme {
    /// A multi-user refiner whose output is the precoder itself.
    #[serde(rename = "E2E")]
    E2E,
    /// Per-user refiner trained on the single-user rate, then zero forcing.
    #[serde(rename = "TWO_STAGE_RATE")]
    TwoStageRate,
    /// Per-user refiner trained to reconstruct the channel direction, then zero forcing.
    #[serde(rename = "TWO_STAGE_RECON")]
    TwoStageRecon,
    /// Learned encoder at the user and learned decoder, then zero forcing.
    #[serde(rename = "ENCDEC_BENCHMARK")]
    EncdecBenchmark,
    /// Zero forcing on the decoded codebook CSI.
    #[serde(rename = "CODEBOOK_ONLY")]
    CodebookOnly,
    /// Zero forcing on the true channels.
    #[serde(rename = "GENIE")]
    Genie,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::E2E,
        Scheme::TwoStageRate,
        Scheme::TwoStageRecon,
        Scheme::EncdecBenchmark,
        Scheme::CodebookOnly,
        Scheme::Genie,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::E2E => "E2E",
            Scheme::TwoStageRate => "TWO_STAGE_RATE",
            Scheme::TwoStageRecon => "TWO_STAGE_RECON",
            Scheme::EncdecBenchmark => "ENCDEC_BENCHMARK",
            Scheme::CodebookOnly => "CODEBOOK_ONLY",
            Scheme::Genie => "GENIE",
        }
    }

    pub fn is_trained(self) -> bool {
        !matches!(self, Scheme::CodebookOnly | Scheme::Genie)
    }

    /// Whether the scheme consumes codebook reports (as opposed to its own feedback).
    pub fn uses_codebook(self) -> bool {
        !matches!(self, Scheme::EncdecBenchmark | Scheme::Genie)
    }
}

impl std::fmt::Display for Scheme {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainingConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub init: Init,
    /// Seeds parameter initialization, the validation carve-out and batch order.
    pub seed: u64,
    /// Fraction of the training records held out for checkpoint selection.
    pub validation_fraction: f64,
    /// Feedback length of the encoder-decoder benchmark.
    pub feedback_bits: usize,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 32,
            adam: AdamConfig::default(),
            init: Init::default(),
            seed: 1,
            validation_fraction: 0.1,
            feedback_bits: 64,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub scenario: ScenarioConfig,
    /// Imperfections of the digital replica used by the twin study.
    pub twin: TwinPerturbation,
    pub codebook: CodebookConfig,
    pub scheme: Scheme,
    pub training: TrainingConfig,
    pub n_users: usize,
    /// Records generated in total; the first `split` fraction trains, the rest tests.
    pub n_samples: usize,
    pub split: f64,
    /// Channel-estimation NMSE at the user; `None` means perfect estimates.
    pub estimation_nmse_db: Option<f64>,
    pub estimation_seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: ScenarioConfig::full_scale(),
            twin: TwinPerturbation {
                drop_foliage: true,
                position_error_std: 5.0,
                rng_seed: 7,
            },
            codebook: CodebookConfig::default(),
            scheme: Scheme::TwoStageRate,
            training: TrainingConfig::default(),
            n_users: 2,
            n_samples: 5000,
            split: 0.8,
            estimation_nmse_db: None,
            estimation_seed: 11,
        }
    }
}

impl ExperimentConfig {
    /// Desk scale: 16 antennas, 48 subcarriers, 16 taps, 4000 training and 1000 test records.
    pub fn desk() -> Self {
        Self {
            scenario: ScenarioConfig::desk(),
            ..Self::default()
        }
    }

    pub fn estimation(&self) -> Estimation {
        Estimation {
            nmse_db: self.estimation_nmse_db.unwrap_or(f64::NEG_INFINITY),
            noise_seed: self.estimation_seed,
        }
    }

    pub fn n_train(&self) -> usize {
        ((self.n_samples as f64) * self.split).round() as usize
    }

    pub fn power(&self) -> f64 {
        self.scenario.tx_power()
    }

    pub fn noise_power(&self) -> f64 {
        self.scenario.noise_power()
    }

    pub fn violations(&self) -> Vec<String> {
        let mut v = self.scenario.violations();
        v.extend(self.twin.violations("twin"));
        v.extend(self.codebook.violations(self.scenario.n_tx, self.scenario.n_subcarriers));
        if self.n_users == 0 {
            v.push("n_users must be at least 1".into());
        }
        if self.scheme == Scheme::E2E && self.n_users > self.scenario.n_tx {
            v.push("E2E needs n_users <= scenario.n_tx".into());
        }
        if !(self.split > 0.0 && self.split < 1.0) {
            v.push(format!("split must lie in (0, 1), got {}", self.split));
        }
        if self.n_samples == 0 {
            v.push("n_samples must be positive".into());
        } else if self.n_train() == 0 || self.n_train() >= self.n_samples {
            v.push(format!("split {} of {} records leaves an empty train or test set", self.split, self.n_samples));
        }
        if let Some(nmse) = self.estimation_nmse_db {
            if !(nmse <= 0.0) {
                v.push(format!("estimation_nmse_db must be <= 0, got {nmse}"));
            }
        }
        let t = &self.training;
        if t.batch_size == 0 {
            v.push("training.batch_size must be positive".into());
        }
        if !(t.validation_fraction >= 0.0 && t.validation_fraction < 1.0) {
            v.push(format!("training.validation_fraction must lie in [0, 1), got {}", t.validation_fraction));
        }
        if !(t.adam.lr > 0.0 && t.adam.lr.is_finite()) {
            v.push("training.adam.lr must be positive".into());
        }
        if !(0.0..1.0).contains(&t.adam.beta1) || !(0.0..1.0).contains(&t.adam.beta2) {
            v.push("training.adam.beta1 and beta2 must lie in [0, 1)".into());
        }
        if !(t.adam.eps > 0.0) {
            v.push("training.adam.eps must be positive".into());
        }
        if !FEEDBACK_BITS.contains(&t.feedback_bits) {
            v.push(format!("training.feedback_bits must be one of {FEEDBACK_BITS:?}, got {}", t.feedback_bits));
        }
        if self.scheme == Scheme::EncdecBenchmark && (self.scenario.n_tx < 8 || self.scenario.n_subcarriers < 8) {
            v.push("ENCDEC_BENCHMARK needs at least 8 antennas and 8 subcarriers".into());
        }
        v
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::Invalid(v))
        }
    }

    /// Canonical JSON of the effective configuration.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }

    /// Short hash identifying the effective configuration.
    pub fn hash(&self) -> String {
        crate::hash::short_hash(self.canonical_json().as_bytes())
    }

    /// Overhead of the configured feedback in bits.
    pub fn overhead_bits(&self) -> usize {
        match self.scheme {
            Scheme::EncdecBenchmark => self.training.feedback_bits,
            Scheme::Genie => 0,
            _ => crate::codebook::overhead_bits(&self.codebook, self.scenario.n_tx),
        }
    }

    pub fn codebook_label(&self) -> String {
        match self.scheme {
            Scheme::EncdecBenchmark => format!("learned-B{}", self.training.feedback_bits),
            Scheme::Genie => "none".into(),
            _ => self.codebook.label(),
        }
    }

    pub fn is_type_ii(&self) -> bool {
        self.codebook.kind == CodebookKind::TypeII
    }
}
