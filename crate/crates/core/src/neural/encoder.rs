//! Learned encoder-decoder benchmark: a CNN compresses one user's channel into
//! `B` binary symbols, a dense layer expands them back and a single-user
//! refiner polishes the result.

use rand::Rng;

use super::layers::{leaky_relu_backward, leaky_relu_inplace, ste_backward, Binarizer, Conv2d, Dense};
use super::refiner::{Init, RefinerArch, RefinerTape};
use super::tensor::Tensor;
use crate::{Error, Result};

/// Channel widths of the six feature-extraction blocks, input first.
pub const ENCODER_WIDTHS: [usize; 7] = [2, 8, 8, 16, 16, 32, 32];
/// Allowed feedback lengths.
pub const FEEDBACK_BITS: [usize; 4] = [16, 32, 64, 128];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EncoderDecoderArch {
    pub n_tx: usize,
    pub n_subcarriers: usize,
    pub feedback_bits: usize,
    pub convs: Vec<Conv2d>,
    pub to_logits: Dense,
    pub expand: Dense,
    pub refiner: RefinerArch,
}

impl EncoderDecoderArch {
    pub fn new(n_tx: usize, n_subcarriers: usize, feedback_bits: usize) -> Self {
        let mut at = 0;
        let mut convs = Vec::new();
        let (mut h, mut w) = (n_tx, n_subcarriers);
        for (i, pair) in ENCODER_WIDTHS.windows(2).enumerate() {
            // Blocks two, four and six halve both spatial dimensions.
            let stride = if i % 2 == 1 { 2 } else { 1 };
            let c = Conv2d::new(pair[0], pair[1], stride, at);
            (h, w) = c.out_dims(h, w);
            at = c.end();
            convs.push(c);
        }
        let flat = ENCODER_WIDTHS[6] * h * w;
        let to_logits = Dense::new(flat, feedback_bits, at);
        let expand = Dense::new(feedback_bits, 2 * n_tx * n_subcarriers, to_logits.end());
        let refiner = RefinerArch::new(1, expand.end());
        Self {
            n_tx,
            n_subcarriers,
            feedback_bits,
            convs,
            to_logits,
            expand,
            refiner,
        }
    }

    pub fn n_params(&self) -> usize {
        self.refiner.end()
    }

    pub fn flat_len(&self) -> usize {
        self.to_logits.n_in
    }
}

pub struct EncoderDecoderTape {
    inputs: Vec<Tensor>,
    cols: Vec<Vec<f64>>,
    outputs: Vec<Tensor>,
    logits: Vec<f64>,
    symbols: Vec<f64>,
    refiner: RefinerTape,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EncoderDecoder {
    pub arch: EncoderDecoderArch,
    pub params: Vec<f64>,
    pub binarizer: Binarizer,
}

impl EncoderDecoder {
    pub fn new(n_tx: usize, n_subcarriers: usize, feedback_bits: usize, init: Init, rng: &mut impl Rng) -> Self {
        let arch = EncoderDecoderArch::new(n_tx, n_subcarriers, feedback_bits);
        let mut params = vec![0.0; arch.n_params()];
        for c in &arch.convs {
            c.init_glorot(&mut params, rng);
        }
        arch.to_logits.init_glorot(&mut params, rng);
        arch.expand.init_glorot(&mut params, rng);
        arch.refiner.init(&mut params, init, rng);
        Self {
            arch,
            params,
            binarizer: Binarizer::Sign,
        }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        let want = (2, self.arch.n_tx, self.arch.n_subcarriers);
        if x.shape() != want {
            return Err(Error::Contract(format!("encoder expects shape {want:?}, got {:?}", x.shape())));
        }
        Ok(())
    }

    /// The `B` feedback symbols for one user's channel tensor.
    pub fn encode(&self, x: &Tensor) -> Result<Vec<f64>> {
        self.check(x)?;
        let mut h = x.clone();
        for c in &self.arch.convs {
            let (y, _) = c.forward(&self.params, &h);
            h = y;
            leaky_relu_inplace(&mut h.data);
        }
        Ok(self.binarizer.forward(&self.arch.to_logits.forward(&self.params, &h.data)))
    }

    pub fn decode(&self, symbols: &[f64]) -> Result<Tensor> {
        let a = &self.arch;
        let flat = a.expand.forward(&self.params, symbols);
        let t = Tensor::from_vec(2, a.n_tx, a.n_subcarriers, flat);
        a.refiner.forward(&self.params, &t)
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.decode(&self.encode(x)?)
    }

    pub fn forward_recorded(&self, x: &Tensor) -> Result<(Tensor, EncoderDecoderTape)> {
        self.check(x)?;
        let a = &self.arch;
        let mut inputs = Vec::new();
        let mut cols = Vec::new();
        let mut outputs = Vec::new();
        let mut h = x.clone();
        for c in &a.convs {
            let (mut y, col) = c.forward(&self.params, &h);
            leaky_relu_inplace(&mut y.data);
            inputs.push(h);
            cols.push(col);
            h = y.clone();
            outputs.push(y);
        }
        let logits = a.to_logits.forward(&self.params, &h.data);
        let symbols = self.binarizer.forward(&logits);
        let flat = a.expand.forward(&self.params, &symbols);
        let t = Tensor::from_vec(2, a.n_tx, a.n_subcarriers, flat);
        let (y, refiner) = a.refiner.forward_recorded(&self.params, &t)?;
        Ok((
            y,
            EncoderDecoderTape {
                inputs,
                cols,
                outputs,
                logits,
                symbols,
                refiner,
            },
        ))
    }

    /// Accumulate parameter gradients; the binarizer is crossed with the
    /// straight-through estimator.
    pub fn backward(&self, tape: &mut EncoderDecoderTape, dy: &Tensor, grads: &mut [f64]) -> Result<()> {
        let a = &self.arch;
        let dt = a.refiner.backward(&self.params, &mut tape.refiner, dy, grads)?;
        let dsym = a.expand.backward(&self.params, &tape.symbols, &dt.data, grads);
        let dlogits = ste_backward(&tape.logits, &dsym);
        let last = tape.outputs.last().expect("encoder has layers");
        let dflat = a.to_logits.backward(&self.params, &last.data, &dlogits, grads);
        let mut g = Tensor::from_vec(last.channels, last.height, last.width, dflat);
        for (i, c) in a.convs.iter().enumerate().rev() {
            leaky_relu_backward(&tape.outputs[i].data, &mut g.data);
            let inp = &tape.inputs[i];
            g = c.backward(&self.params, inp, &tape.cols[i], &g, grads);
        }
        Ok(())
    }
}
