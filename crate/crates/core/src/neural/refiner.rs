//! The five-block residual CNN that refines codebook CSI.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::layers::{leaky_relu_backward, leaky_relu_inplace, tanh_backward, tanh_inplace, Conv2d};
use super::tensor::Tensor;
use crate::{Error, Result};

pub const N_BLOCKS: usize = 5;
/// Hidden widths inside every block.
pub const WIDTHS: [usize; 2] = [16, 32];

/// Parameter initialization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Init {
    /// Glorot-uniform kernels and zero biases everywhere.
    Glorot,
    /// Glorot on the first two convolutions of each block, zeros on the last:
    /// the network starts as the identity map but every layer receives gradient.
    #[default]
    ResidualZero,
    /// All parameters zero: the identity map with no gradient below the last layers.
    Zero,
}

/// One block: `x + tanh(conv3(lrelu(conv2(lrelu(conv1(x))))))`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Block {
    pub convs: [Conv2d; 3],
}

#[derive(Default)]
struct BlockTape {
    input: Tensor,
    cols: [Vec<f64>; 3],
    hidden: [Tensor; 2],
    out_tanh: Tensor,
}

/// Activations recorded by a differentiable forward pass, plus scratch space
/// reused by the backward pass. Reusing one tape across samples avoids
/// reallocating several megabytes per pass.
#[derive(Default)]
pub struct RefinerTape {
    blocks: Vec<BlockTape>,
    scratch: Vec<f64>,
    grads: [Tensor; 3],
}

/// Layer layout of a refiner whose parameters start at `offset`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RefinerArch {
    pub n_users: usize,
    pub offset: usize,
    pub blocks: Vec<Block>,
}

impl RefinerArch {
    pub fn new(n_users: usize, offset: usize) -> Self {
        let io = 2 * n_users;
        let mut at = offset;
        let blocks = (0..N_BLOCKS)
            .map(|_| {
                let c1 = Conv2d::new(io, WIDTHS[0], 1, at);
                let c2 = Conv2d::new(WIDTHS[0], WIDTHS[1], 1, c1.end());
                let c3 = Conv2d::new(WIDTHS[1], io, 1, c2.end());
                at = c3.end();
                Block { convs: [c1, c2, c3] }
            })
            .collect();
        Self {
            n_users,
            offset,
            blocks,
        }
    }

    pub fn channels(&self) -> usize {
        2 * self.n_users
    }

    pub fn end(&self) -> usize {
        self.blocks.last().map_or(self.offset, |b| b.convs[2].end())
    }

    pub fn n_params(&self) -> usize {
        self.end() - self.offset
    }

    pub fn init(&self, params: &mut [f64], init: Init, rng: &mut impl Rng) {
        params[self.offset..self.end()].fill(0.0);
        if init == Init::Zero {
            return;
        }
        for b in &self.blocks {
            b.convs[0].init_glorot(params, rng);
            b.convs[1].init_glorot(params, rng);
            if init == Init::Glorot {
                b.convs[2].init_glorot(params, rng);
            }
        }
    }

    fn check(&self, x: &Tensor) -> Result<()> {
        if x.channels != self.channels() {
            return Err(Error::Contract(format!(
                "refiner for {} users expects {} channels, got {}",
                self.n_users,
                self.channels(),
                x.channels
            )));
        }
        Ok(())
    }

    pub fn forward(&self, params: &[f64], x: &Tensor) -> Result<Tensor> {
        self.check(x)?;
        let mut y = x.clone();
        let (mut col, mut h1, mut h2, mut t) = (Vec::new(), Tensor::default(), Tensor::default(), Tensor::default());
        for b in &self.blocks {
            b.convs[0].forward_into(params, &y, &mut col, &mut h1);
            leaky_relu_inplace(&mut h1.data);
            b.convs[1].forward_into(params, &h1, &mut col, &mut h2);
            leaky_relu_inplace(&mut h2.data);
            b.convs[2].forward_into(params, &h2, &mut col, &mut t);
            tanh_inplace(&mut t.data);
            for (o, d) in y.data.iter_mut().zip(&t.data) {
                *o += d;
            }
        }
        Ok(y)
    }

    pub fn forward_recorded(&self, params: &[f64], x: &Tensor) -> Result<(Tensor, RefinerTape)> {
        let mut tape = RefinerTape::default();
        let y = self.forward_recorded_into(params, x, &mut tape)?;
        Ok((y, tape))
    }

    /// Differentiable forward pass recording into a reusable tape.
    pub fn forward_recorded_into(&self, params: &[f64], x: &Tensor, tape: &mut RefinerTape) -> Result<Tensor> {
        self.check(x)?;
        tape.blocks.resize_with(self.blocks.len(), BlockTape::default);
        let mut y = x.clone();
        for (b, t) in self.blocks.iter().zip(&mut tape.blocks) {
            t.input.clone_from(&y);
            let [h1, h2] = &mut t.hidden;
            let [c1, c2, c3] = &mut t.cols;
            b.convs[0].forward_into(params, &t.input, c1, h1);
            leaky_relu_inplace(&mut h1.data);
            b.convs[1].forward_into(params, h1, c2, h2);
            leaky_relu_inplace(&mut h2.data);
            b.convs[2].forward_into(params, h2, c3, &mut t.out_tanh);
            tanh_inplace(&mut t.out_tanh.data);
            for (o, d) in y.data.iter_mut().zip(&t.out_tanh.data) {
                *o += d;
            }
        }
        Ok(y)
    }

    /// Accumulate parameter gradients into `grads` and return the input gradient.
    pub fn backward(&self, params: &[f64], tape: &mut RefinerTape, dy: &Tensor, grads: &mut [f64]) -> Result<Tensor> {
        let recorded = tape.blocks.len() == self.blocks.len()
            && tape.blocks.first().is_some_and(|t| t.input.shape() == dy.shape());
        if !recorded || dy.channels != self.channels() {
            return Err(Error::Contract("backward needs a tape recorded by a matching forward pass".into()));
        }
        let RefinerTape { blocks, scratch, grads: bufs } = tape;
        let [dz, dh, dx] = bufs;
        let mut g = dy.clone();
        for (b, t) in self.blocks.iter().zip(blocks.iter()).rev() {
            dz.clone_from(&g);
            tanh_backward(&t.out_tanh.data, &mut dz.data);
            b.convs[2].backward_into(params, &t.hidden[1], &t.cols[2], dz, grads, scratch, dh);
            leaky_relu_backward(&t.hidden[1].data, &mut dh.data);
            b.convs[1].backward_into(params, &t.hidden[0], &t.cols[1], dh, grads, scratch, dz);
            leaky_relu_backward(&t.hidden[0].data, &mut dz.data);
            b.convs[0].backward_into(params, &t.input, &t.cols[0], dz, grads, scratch, dx);
            for (a, d) in g.data.iter_mut().zip(&dx.data) {
                *a += d;
            }
        }
        Ok(g)
    }
}

/// A refiner that owns its parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct RefinerNet {
    pub arch: RefinerArch,
    pub params: Vec<f64>,
}

impl RefinerNet {
    pub fn new(n_users: usize, init: Init, rng: &mut impl Rng) -> Self {
        let arch = RefinerArch::new(n_users, 0);
        let mut params = vec![0.0; arch.n_params()];
        arch.init(&mut params, init, rng);
        Self { arch, params }
    }

    /// All-zero parameters: the exact identity map.
    pub fn identity(n_users: usize) -> Self {
        let arch = RefinerArch::new(n_users, 0);
        let params = vec![0.0; arch.n_params()];
        Self { arch, params }
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.arch.forward(&self.params, x)
    }

    pub fn forward_recorded(&self, x: &Tensor) -> Result<(Tensor, RefinerTape)> {
        self.arch.forward_recorded(&self.params, x)
    }

    pub fn forward_recorded_into(&self, x: &Tensor, tape: &mut RefinerTape) -> Result<Tensor> {
        self.arch.forward_recorded_into(&self.params, x, tape)
    }

    pub fn backward(&self, tape: &mut RefinerTape, dy: &Tensor, grads: &mut [f64]) -> Result<Tensor> {
        self.arch.backward(&self.params, tape, dy, grads)
    }
}
