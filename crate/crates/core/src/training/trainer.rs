//! Minibatch Adam training of the decoders.

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::channel::{child_rng, CMatrix, Dataset};
use crate::neural::loss::{loss_e2e, loss_ts_rate, loss_ts_recon, LossGrad};
use crate::neural::refiner::RefinerTape;
use crate::neural::{AdamState, Decoder, EncoderDecoder, RefinerNet, Tensor};
use crate::{parallel, Error, Result};

use super::config::{ExperimentConfig, Scheme};
use super::pipeline::{codebook_csi, network_input, phase_aligned, rate_with_csi};

// Streams of the training seed.
const STREAM_INIT: u64 = 0;
const STREAM_SPLIT: u64 = 1;
const STREAM_EPOCH: u64 = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    /// Mean minibatch loss over the epoch; absent for the untrained model.
    pub train_loss: Option<f64>,
    /// Mean loss on the validation items.
    pub val_loss: Option<f64>,
    /// Mean sum rate of the full pipeline on the validation records.
    pub val_rate: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub decoder: Decoder,
    pub curve: Vec<EpochLog>,
    /// Epoch whose parameters were kept (0 = untrained).
    pub best_epoch: usize,
    pub skipped_steps: u64,
}

/// A freshly initialized decoder for the configured scheme.
pub fn new_decoder(config: &ExperimentConfig) -> Result<Decoder> {
    let t = &config.training;
    let mut rng = child_rng(t.seed, STREAM_INIT);
    let s = &config.scenario;
    Ok(match config.scheme {
        Scheme::TwoStageRate | Scheme::TwoStageRecon => Decoder::Refiner(RefinerNet::new(1, t.init, &mut rng)),
        Scheme::E2E => Decoder::Refiner(RefinerNet::new(config.n_users, t.init, &mut rng)),
        Scheme::EncdecBenchmark => Decoder::EncoderDecoder(EncoderDecoder::new(
            s.n_tx,
            s.n_subcarriers,
            t.feedback_bits,
            t.init,
            &mut rng,
        )),
        other => return Err(Error::Config(format!("scheme {other} has nothing to train"))),
    })
}

/// One unit of training data: the network input and the true channels it is scored against.
struct Item {
    record: usize,
    input: Tensor,
    targets: Vec<usize>,
    truth: Vec<CMatrix>,
}

fn items_for(scheme: Scheme, ds: &Dataset, records: &[usize], csi: &[Vec<CMatrix>]) -> Vec<Item> {
    let mut out = Vec::new();
    for &r in records {
        let rec = &ds.records[r];
        if scheme == Scheme::E2E {
            out.push(Item {
                record: r,
                input: network_input(scheme, rec, &csi[r], 0),
                targets: (0..rec.n_users()).collect(),
                truth: rec.user_channels.iter().map(|c| c.freq.clone()).collect(),
            });
        } else {
            for u in 0..rec.n_users() {
                let h = &rec.user_channels[u].freq;
                let truth = if scheme == Scheme::TwoStageRecon {
                    phase_aligned(h, &csi[r][u])
                } else {
                    h.clone()
                };
                out.push(Item {
                    record: r,
                    input: network_input(scheme, rec, &csi[r], u),
                    targets: vec![u],
                    truth: vec![truth],
                });
            }
        }
    }
    out
}

fn item_loss(scheme: Scheme, out: &Tensor, truth: &[&CMatrix], power: f64, noise: f64) -> LossGrad {
    match scheme {
        Scheme::TwoStageRecon => loss_ts_recon(out, truth[0]),
        Scheme::E2E => loss_e2e(out, truth, power, noise),
        _ => loss_ts_rate(out, truth[0], power, noise),
    }
}

/// Loss and accumulated gradient of one item; `grads` must be zeroed by the caller.
fn item_gradient(
    scheme: Scheme,
    decoder: &Decoder,
    item: &Item,
        power: f64,
    noise: f64,
    tape: &mut RefinerTape,
    grads: &mut [f64],
) -> Result<f64> {
    let truth: Vec<&CMatrix> = item.truth.iter().collect();
    match decoder {
        Decoder::Refiner(net) => {
            let y = net.forward_recorded_into(&item.input, tape)?;
            let l = item_loss(scheme, &y, &truth, power, noise);
            net.backward(tape, &l.grad, grads)?;
            Ok(l.value)
        }
        Decoder::EncoderDecoder(net) => {
            let (y, mut t) = net.forward_recorded(&item.input)?;
            let l = item_loss(scheme, &y, &truth, power, noise);
            net.backward(&mut t, &l.grad, grads)?;
            Ok(l.value)
        }
    }
}

fn item_forward_loss(scheme: Scheme, decoder: &Decoder, item: &Item, power: f64, noise: f64) -> Result<f64> {
    let truth: Vec<&CMatrix> = item.truth.iter().collect();
    let y = match decoder {
        Decoder::Refiner(net) => net.forward(&item.input)?,
        Decoder::EncoderDecoder(net) => net.forward(&item.input)?,
    };
    Ok(item_loss(scheme, &y, &truth, power, noise).value)
}

/// Sum of per-item gradients in item order, so the result does not depend on
/// how many workers computed them.
fn batch_gradient(
    scheme: Scheme,
    decoder: &Decoder,
    batch: &[&Item],
    power: f64,
    noise: f64,
    tape: &mut RefinerTape,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = decoder.n_params();
    let workers = parallel::worker_count();
    let mut total = vec![0.0; n];
    let mut losses = Vec::with_capacity(batch.len());
    if workers <= 1 {
        let mut g = vec![0.0; n];
        for item in batch {
            g.iter_mut().for_each(|v| *v = 0.0);
            losses.push(item_gradient(scheme, decoder, item, power, noise, tape, &mut g)?);
            total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
        }
    } else {
        let per_item = parallel::map_indexed(batch.len(), workers, |i| {
            let mut g = vec![0.0; n];
            let mut t = RefinerTape::default();
            item_gradient(scheme, decoder, batch[i], power, noise, &mut t, &mut g).map(|l| (l, g))
        });
        for r in per_item {
            let (l, g) = r?;
            losses.push(l);
            total.iter_mut().zip(&g).for_each(|(t, v)| *t += v);
        }
    }
    Ok((total, losses))
}

struct Validation<'a> {
    records: Vec<usize>,
    items: Vec<Item>,
    csi: &'a [Vec<CMatrix>],
}

fn validate(
    config: &ExperimentConfig,
    decoder: &Decoder,
    ds: &Dataset,
    val: &Validation<'_>,
) -> Result<(Option<f64>, Option<f64>)> {
    if val.records.is_empty() {
        return Ok((None, None));
    }
    let (p, s2) = (config.power(), config.noise_power());
    let workers = parallel::worker_count();
    let losses = parallel::map_indexed(val.items.len(), workers, |i| {
        item_forward_loss(config.scheme, decoder, &val.items[i], p, s2)
    });
    let losses = losses.into_iter().collect::<Result<Vec<_>>>()?;
    let rates = parallel::map_indexed(val.records.len(), workers, |i| {
        let r = val.records[i];
        rate_with_csi(&ds.records[r], &val.csi[r], Some(decoder), config.scheme, p, s2)
    });
    let rates = rates.into_iter().collect::<Result<Vec<_>>>()?;
    Ok((Some(mean(&losses)), Some(mean(&rates))))
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Train the configured scheme on `dataset` and return the best checkpoint by
/// validation sum rate (the untrained model competes too).
pub fn train(config: &ExperimentConfig, dataset: &Dataset) -> Result<TrainOutcome> {
    config.validate()?;
    let scheme = config.scheme;
    if !scheme.is_trained() {
        return Err(Error::Config(format!("scheme {scheme} has nothing to train")));
    }
    if dataset.n_users != config.n_users {
        return Err(Error::Config(format!(
            "dataset has {} users per record, configuration expects {}",
            dataset.n_users, config.n_users
        )));
    }
    if dataset.is_empty() {
        return Err(Error::Config("training dataset is empty".into()));
    }
    let t = &config.training;
    let mut decoder = new_decoder(config)?;
    let (power, noise) = (config.power(), config.noise_power());
    let workers = parallel::worker_count();

    let csi: Vec<Vec<CMatrix>> = if scheme.uses_codebook() {
        parallel::map_indexed(dataset.len(), workers, |i| codebook_csi(&dataset.records[i], &config.codebook))
            .into_iter()
            .collect::<Result<_>>()?
    } else {
        vec![Vec::new(); dataset.len()]
    };

    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut child_rng(t.seed, STREAM_SPLIT));
    let n_val = ((dataset.len() as f64) * t.validation_fraction).round() as usize;
    let n_val = n_val.min(dataset.len() - 1);
    let mut val_records = order[..n_val].to_vec();
    let mut train_records = order[n_val..].to_vec();
    val_records.sort_unstable();
    train_records.sort_unstable();
    let items = items_for(scheme, dataset, &train_records, &csi);
    let val = Validation {
        items: items_for(scheme, dataset, &val_records, &csi),
        records: val_records,
        csi: &csi,
    };
    log::info!(
        "training {scheme}: {} items from {} records, {} validation records, {} parameters",
        items.len(),
        train_records.len(),
        val.records.len(),
        decoder.n_params()
    );

    let (val_loss, val_rate) = validate(config, &decoder, dataset, &val)?;
    let mut curve = vec![EpochLog {
        epoch: 0,
        train_loss: None,
        val_loss,
        val_rate,
    }];
    let mut best = (0, val_rate.unwrap_or(f64::NEG_INFINITY), decoder.params().to_vec());
    let mut adam = AdamState::new(decoder.n_params(), t.adam);
    let mut tape = RefinerTape::default();
    let mut refs: Vec<&Item> = items.iter().collect();

    for epoch in 1..=t.epochs {
        refs.sort_unstable_by_key(|it| (it.record, it.targets[0]));
        refs.shuffle(&mut child_rng(t.seed, STREAM_EPOCH + epoch as u64));
        let mut loss_sum = 0.0;
        for (b, batch) in refs.chunks(t.batch_size).enumerate() {
            let (mut grads, losses) = batch_gradient(scheme, &decoder, batch, power, noise, &mut tape)?;
            if let Some(pos) = losses.iter().position(|l| !l.is_finite()) {
                let item = batch[pos];
                let diag = format!(
                    "non-finite {scheme} loss {} at epoch {epoch}, batch {b}, record {} (users {:?}); \
                     parameter norm {:.6e}, input finite: {}",
                    losses[pos],
                    dataset.records[item.record].sample_index,
                    item.targets,
                    decoder.params().iter().map(|p| p * p).sum::<f64>().sqrt(),
                    item.input.is_finite()
                );
                log::error!("{diag}");
                return Err(Error::Numerical(diag));
            }
            loss_sum += losses.iter().sum::<f64>();
            let scale = 1.0 / batch.len() as f64;
            grads.iter_mut().for_each(|g| *g *= scale);
            adam.step(decoder.params_mut(), &grads);
        }
        let train_loss = loss_sum / items.len() as f64;
        let (val_loss, val_rate) = validate(config, &decoder, dataset, &val)?;
        log::info!(
            "epoch {epoch}: train loss {train_loss:.6}, val loss {}, val rate {}",
            val_loss.map_or("-".into(), |v| format!("{v:.6}")),
            val_rate.map_or("-".into(), |v| format!("{v:.6}"))
        );
        curve.push(EpochLog {
            epoch,
            train_loss: Some(train_loss),
            val_loss,
            val_rate,
        });
        // Without a validation set the latest parameters win.
        let score = val_rate.unwrap_or(f64::INFINITY);
        if score > best.1 || (val_rate.is_none() && epoch == t.epochs) {
            best = (epoch, score, decoder.params().to_vec());
        }
    }
    *decoder.params_mut() = best.2;
    Ok(TrainOutcome {
        decoder,
        curve,
        best_epoch: best.0,
        skipped_steps: adam.skipped,
    })
}
