//! One record through the whole chain: estimate, encode per user, decode,
//! refine, precode, and score on the true channels.

use crate::channel::{CMatrix, DatasetRecord};
use crate::codebook::{reconstruct, CodebookConfig};
use crate::neural::{complex_to_tensor, tensor_to_complex, Decoder, Tensor};
use crate::neural::loss::output_to_precoders;
use crate::precoding::{normalize_total_power, sum_rate, zero_forcing, PrecoderSet};
use crate::{Error, Result};

use super::config::Scheme;

/// Decoded codebook CSI for every user: one unit-norm column per subcarrier.
pub fn codebook_csi(record: &DatasetRecord, codebook: &CodebookConfig) -> Result<Vec<CMatrix>> {
    record
        .estimated_channels
        .iter()
        .map(|h| reconstruct(h, codebook))
        .collect()
}

/// Scale an estimate so its columns have unit norm on average; the scale of
/// raw channels (around 1e-5) is far outside what a network trains well on.
pub fn normalized_estimate(h: &CMatrix) -> CMatrix {
    let norm = h.norm();
    if norm == 0.0 {
        return h.clone();
    }
    h * num_complex::Complex64::new((h.ncols() as f64).sqrt() / norm, 0.0)
}

/// Rotate every column of `h` so that `reference_k^H h_k` is real and
/// non-negative. Codebook CSI carries an arbitrary common phase per
/// subcarrier that a reconstruction target must share to be learnable.
pub fn phase_aligned(h: &CMatrix, reference: &CMatrix) -> CMatrix {
    let mut out = h.clone();
    for (mut col, r) in out.column_iter_mut().zip(reference.column_iter()) {
        let c = r.dotc(&col);
        if c.norm() > 0.0 {
            col *= c.conj() / c.norm();
        }
    }
    out
}

/// Zero-forcing on the codebook CSI with unit power per user, rearranged as
/// one `Nt x K` matrix per user (column `k` is the user's precoder on `k`).
pub fn zf_input(csi: &[CMatrix]) -> Vec<CMatrix> {
    let users = csi.len();
    let f = zero_forcing(csi, users as f64);
    (0..users)
        .map(|u| CMatrix::from_fn(csi[0].nrows(), csi[0].ncols(), |n, k| f.per_subcarrier[k][(n, u)]))
        .collect()
}

/// The network input for one training or inference item.
///
/// `user` selects a single user for per-user schemes and is ignored by E2E,
/// whose net starts from the zero-forcing precoders of the reported CSI.
pub fn network_input(scheme: Scheme, record: &DatasetRecord, csi: &[CMatrix], user: usize) -> Tensor {
    match scheme {
        Scheme::E2E => complex_to_tensor(&zf_input(csi).iter().collect::<Vec<_>>()),
        Scheme::EncdecBenchmark => complex_to_tensor(&[&normalized_estimate(&record.estimated_channels[user])]),
        _ => complex_to_tensor(&[&csi[user]]),
    }
}

fn contract(scheme: Scheme, what: &str) -> Error {
    Error::Contract(format!("scheme {scheme} needs {what}"))
}

fn per_user_output(decoder: &Decoder, x: &Tensor) -> Result<CMatrix> {
    let y = match decoder {
        Decoder::Refiner(net) => net.forward(x)?,
        Decoder::EncoderDecoder(net) => net.forward(x)?,
    };
    Ok(tensor_to_complex(&y).remove(0))
}

/// Precoders the base station would use for this record.
///
/// `csi` is the decoded codebook CSI (ignored by GENIE and ENCDEC_BENCHMARK).
pub fn precoders(
    scheme: Scheme,
    decoder: Option<&Decoder>,
    record: &DatasetRecord,
    csi: &[CMatrix],
    power: f64,
) -> Result<PrecoderSet> {
    let users = record.n_users();
    match scheme {
        Scheme::Genie => Ok(zero_forcing(&record.true_freq(), power)),
        Scheme::CodebookOnly => Ok(zero_forcing(csi, power)),
        Scheme::TwoStageRate | Scheme::TwoStageRecon => {
            let Some(d @ Decoder::Refiner(net)) = decoder else {
                return Err(contract(scheme, "a single-user refiner"));
            };
            if net.arch.n_users != 1 {
                return Err(contract(scheme, "a single-user refiner"));
            }
            let refined = (0..users)
                .map(|u| per_user_output(d, &network_input(scheme, record, csi, u)))
                .collect::<Result<Vec<_>>>()?;
            Ok(zero_forcing(&refined, power))
        }
        Scheme::EncdecBenchmark => {
            let Some(d @ Decoder::EncoderDecoder(_)) = decoder else {
                return Err(contract(scheme, "an encoder-decoder network"));
            };
            let refined = (0..users)
                .map(|u| per_user_output(d, &network_input(scheme, record, csi, u)))
                .collect::<Result<Vec<_>>>()?;
            Ok(zero_forcing(&refined, power))
        }
        Scheme::E2E => {
            let Some(Decoder::Refiner(net)) = decoder else {
                return Err(contract(scheme, "a multi-user refiner"));
            };
            if net.arch.n_users != users {
                return Err(contract(scheme, &format!("a refiner for {users} users")));
            }
            let y = net.forward(&network_input(scheme, record, csi, 0))?;
            Ok(normalize_total_power(output_to_precoders(&y, 1.0), power))
        }
    }
}

/// Sum rate of one record, computed on the true channels.
pub fn run_pipeline_sample(
    record: &DatasetRecord,
    codebook: &CodebookConfig,
    decoder: Option<&Decoder>,
    scheme: Scheme,
    power: f64,
    noise_power: f64,
) -> Result<f64> {
    let csi = if scheme.uses_codebook() {
        codebook_csi(record, codebook)?
    } else {
        Vec::new()
    };
    rate_with_csi(record, &csi, decoder, scheme, power, noise_power)
}

/// [`run_pipeline_sample`] with the codebook stage already done.
pub fn rate_with_csi(
    record: &DatasetRecord,
    csi: &[CMatrix],
    decoder: Option<&Decoder>,
    scheme: Scheme,
    power: f64,
    noise_power: f64,
) -> Result<f64> {
    let f = precoders(scheme, decoder, record, csi, power)
        .map_err(|e| Error::Sample { index: record.sample_index, source: Box::new(e) })?;
    let r = sum_rate(&record.true_freq(), &f, noise_power);
    if !r.is_finite() {
        return Err(Error::Sample {
            index: record.sample_index,
            source: Box::new(Error::Numerical(format!("{scheme} produced a non-finite rate"))),
        });
    }
    Ok(r)
}
