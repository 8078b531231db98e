//! Test-set evaluation and the report rows behind the figures.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::channel::{CMatrix, Dataset};
use crate::codebook::CodebookConfig;
use crate::neural::Decoder;
use crate::{parallel, Error, Result};

use super::config::Scheme;
use super::pipeline::{codebook_csi, rate_with_csi};

/// One evaluated method: a scheme, the feedback it consumes and its decoder.
#[derive(Clone, Debug)]
pub struct Method<'a> {
    pub name: String,
    pub scheme: Scheme,
    pub codebook: CodebookConfig,
    pub decoder: Option<&'a Decoder>,
    pub codebook_label: String,
    pub overhead_bits: usize,
}

impl<'a> Method<'a> {
    /// A method fed by `codebook` reports; ENCDEC and GENIE get their own labels.
    pub fn new(name: impl Into<String>, scheme: Scheme, codebook: CodebookConfig, decoder: Option<&'a Decoder>, n_tx: usize) -> Self {
        let (codebook_label, overhead_bits) = match (scheme, decoder) {
            (Scheme::Genie, _) => ("none".to_string(), 0),
            (Scheme::EncdecBenchmark, Some(Decoder::EncoderDecoder(net))) => {
                (format!("learned-B{}", net.arch.feedback_bits), net.arch.feedback_bits)
            }
            _ => (codebook.label(), crate::codebook::overhead_bits(&codebook, n_tx)),
        };
        Self {
            name: name.into(),
            scheme,
            codebook,
            decoder,
            codebook_label,
            overhead_bits,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub method: String,
    pub codebook: String,
    pub overhead_bits: usize,
    pub mean_rate: f64,
    /// Normal-approximation 95% confidence half-width of the mean.
    pub ci95: f64,
    pub n: usize,
    pub seed: u64,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rows: Vec<EvalRow>,
    /// Per-test-record sum rates, aligned with `rows`.
    pub per_sample: Vec<Vec<f64>>,
}

impl EvalReport {
    pub fn row(&self, method: &str) -> Option<&EvalRow> {
        self.rows.iter().find(|r| r.method == method)
    }

    pub fn samples(&self, method: &str) -> Option<&[f64]> {
        self.rows.iter().position(|r| r.method == method).map(|i| self.per_sample[i].as_slice())
    }

    /// Mean of `a - b` over paired test records.
    pub fn paired_mean_difference(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.samples(a)?, self.samples(b)?);
        Some(x.iter().zip(y).map(|(p, q)| p - q).sum::<f64>() / x.len() as f64)
    }

    /// Append the rows of another report evaluated on the same test set.
    pub fn extend(&mut self, other: EvalReport) {
        self.rows.extend(other.rows);
        self.per_sample.extend(other.per_sample);
    }
}

/// Mean and 95% half-width under the normal approximation.
pub fn mean_ci95(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (m, 0.0);
    }
    let var = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, 1.96 * (var / n).sqrt())
}

/// Score every method on every test record. Codebook CSI is computed once per
/// distinct codebook configuration.
pub fn evaluate(
    methods: &[Method<'_>],
    test: &Dataset,
    power: f64,
    noise_power: f64,
    seed: u64,
    config_hash: &str,
) -> Result<EvalReport> {
    if test.is_empty() {
        return Err(Error::Config("cannot evaluate on an empty test set".into()));
    }
    let workers = parallel::worker_count();
    let mut cache: HashMap<CodebookConfig, Vec<Vec<CMatrix>>> = HashMap::new();
    for m in methods.iter().filter(|m| m.scheme.uses_codebook()) {
        if !cache.contains_key(&m.codebook) {
            let csi = parallel::map_indexed(test.len(), workers, |i| codebook_csi(&test.records[i], &m.codebook))
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
            cache.insert(m.codebook, csi);
        }
    }
    let mut rows = Vec::with_capacity(methods.len());
    let mut per_sample = Vec::with_capacity(methods.len());
    for m in methods {
        let csi = cache.get(&m.codebook).filter(|_| m.scheme.uses_codebook());
        let rates = parallel::map_indexed(test.len(), workers, |i| {
            let c: &[CMatrix] = csi.map_or(&[], |c| &c[i]);
            rate_with_csi(&test.records[i], c, m.decoder, m.scheme, power, noise_power)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let (mean_rate, ci95) = mean_ci95(&rates);
        rows.push(EvalRow {
            method: m.name.clone(),
            codebook: m.codebook_label.clone(),
            overhead_bits: m.overhead_bits,
            mean_rate,
            ci95,
            n: rates.len(),
            seed,
            config_hash: config_hash.to_string(),
        });
        per_sample.push(rates);
    }
    Ok(EvalReport { rows, per_sample })
}
