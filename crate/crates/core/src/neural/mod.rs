//! Hand-written differentiable layers, the refiner and benchmark networks,
//! the training losses and Adam.
//!
//! All networks keep their weights in one flat `Vec<f64>`; layers only know
//! their offset into it. A forward pass that will be differentiated returns a
//! tape, and `backward` consumes that tape, so a backward pass without a
//! matching forward pass cannot be expressed.

pub mod adam;
pub mod checkpoint;
pub mod encoder;
pub mod layers;
pub mod loss;
pub mod refiner;
pub mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use encoder::{EncoderDecoder, EncoderDecoderArch};
pub use layers::Binarizer;
pub use refiner::{Init, RefinerArch, RefinerNet};
pub use tensor::{complex_to_tensor, tensor_to_complex, Tensor};

/// Any trainable decoder.
#[derive(Clone, Debug, PartialEq)]
pub enum Decoder {
    Refiner(RefinerNet),
    EncoderDecoder(EncoderDecoder),
}

impl Decoder {
    pub fn params(&self) -> &[f64] {
        match self {
            Decoder::Refiner(n) => &n.params,
            Decoder::EncoderDecoder(n) => &n.params,
        }
    }

    pub fn params_mut(&mut self) -> &mut Vec<f64> {
        match self {
            Decoder::Refiner(n) => &mut n.params,
            Decoder::EncoderDecoder(n) => &mut n.params,
        }
    }

    pub fn n_params(&self) -> usize {
        self.params().len()
    }
}
