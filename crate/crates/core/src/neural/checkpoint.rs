//! Binary model checkpoints.
//!
//! Layout (little-endian): `"CSIW"`, `u32` version, architecture descriptor
//! (`u32` kind, `u32` users, `u32` blocks, `u32` width count and widths,
//! `u32` n_tx, `u32` subcarriers, `u32` feedback bits), `u64` parameter
//! count, the parameters as `f64` in layer order, and a CRC32 of everything
//! before it.

use std::path::Path;

use super::encoder::{EncoderDecoder, ENCODER_WIDTHS};
use super::layers::Binarizer;
use super::refiner::{RefinerArch, RefinerNet, N_BLOCKS, WIDTHS};
use super::Decoder;
use crate::error::FormatError;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CSIW";
pub const VERSION: u32 = 1;

const KIND_REFINER: u32 = 1;
const KIND_ENCODER_DECODER: u32 = 2;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("dimension fits in u32").to_le_bytes());
}

pub fn to_bytes(decoder: &Decoder) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    match decoder {
        Decoder::Refiner(net) => {
            put_u32(&mut out, KIND_REFINER as usize);
            put_u32(&mut out, net.arch.n_users);
            put_u32(&mut out, N_BLOCKS);
            put_u32(&mut out, WIDTHS.len());
            WIDTHS.iter().for_each(|w| put_u32(&mut out, *w));
            [0, 0, 0].iter().for_each(|v| put_u32(&mut out, *v));
        }
        Decoder::EncoderDecoder(net) => {
            put_u32(&mut out, KIND_ENCODER_DECODER as usize);
            put_u32(&mut out, 1);
            put_u32(&mut out, N_BLOCKS);
            put_u32(&mut out, ENCODER_WIDTHS.len());
            ENCODER_WIDTHS.iter().for_each(|w| put_u32(&mut out, *w));
            put_u32(&mut out, net.arch.n_tx);
            put_u32(&mut out, net.arch.n_subcarriers);
            put_u32(&mut out, net.arch.feedback_bits);
        }
    }
    let params = decoder.params();
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], FormatError> {
        if self.at + n > self.bytes.len() {
            return Err(FormatError::Length {
                expected: self.at + n,
                found: self.bytes.len(),
            });
        }
        let s = &self.bytes[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }

    fn u32(&mut self) -> std::result::Result<usize, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
}

pub fn from_bytes(bytes: &[u8]) -> std::result::Result<Decoder, FormatError> {
    if bytes.len() < 8 {
        return Err(FormatError::Length {
            expected: 8,
            found: bytes.len(),
        });
    }
    let found: [u8; 4] = bytes[..4].try_into().unwrap();
    if found != MAGIC {
        return Err(FormatError::Magic { expected: MAGIC, found });
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(FormatError::Version {
            found: version,
            supported: VERSION,
        });
    }
    if bytes.len() < 12 {
        return Err(FormatError::Length {
            expected: 12,
            found: bytes.len(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(FormatError::Crc { stored, computed });
    }
    let mut r = Reader { bytes: body, at: 8 };
    let kind = r.u32()? as u32;
    let users = r.u32()?;
    let blocks = r.u32()?;
    let n_widths = r.u32()?;
    let widths = (0..n_widths).map(|_| r.u32()).collect::<std::result::Result<Vec<_>, _>>()?;
    let (n_tx, n_sub, bits) = (r.u32()?, r.u32()?, r.u32()?);
    let n_params = u64::from_le_bytes(r.take(8)?.try_into().unwrap()) as usize;
    let raw = r.take(n_params.checked_mul(8).ok_or(FormatError::Other("parameter count overflows".into()))?)?;
    if r.at != body.len() {
        return Err(FormatError::Length {
            expected: r.at + 4,
            found: bytes.len(),
        });
    }
    let params: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().unwrap())).collect();
    if blocks != N_BLOCKS {
        return Err(FormatError::Other(format!("unsupported block count {blocks}")));
    }
    let decoder = match kind {
        KIND_REFINER => {
            if widths != WIDTHS || users == 0 {
                return Err(FormatError::Other(format!("unsupported refiner layout: users {users}, widths {widths:?}")));
            }
            let arch = RefinerArch::new(users, 0);
            if arch.n_params() != n_params {
                return Err(FormatError::Other(format!("refiner expects {} parameters, file has {n_params}", arch.n_params())));
            }
            Decoder::Refiner(RefinerNet { arch, params })
        }
        KIND_ENCODER_DECODER => {
            if widths != ENCODER_WIDTHS || n_tx == 0 || n_sub == 0 || bits == 0 {
                return Err(FormatError::Other(format!("unsupported encoder layout: widths {widths:?}")));
            }
            let arch = super::encoder::EncoderDecoderArch::new(n_tx, n_sub, bits);
            if arch.n_params() != n_params {
                return Err(FormatError::Other(format!("encoder expects {} parameters, file has {n_params}", arch.n_params())));
            }
            Decoder::EncoderDecoder(EncoderDecoder {
                arch,
                params,
                binarizer: Binarizer::Sign,
            })
        }
        other => return Err(FormatError::Other(format!("unknown architecture kind {other}"))),
    };
    Ok(decoder)
}

pub fn save(path: &Path, decoder: &Decoder) -> Result<()> {
    std::fs::write(path, to_bytes(decoder))?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Decoder> {
    let bytes = std::fs::read(path)?;
    from_bytes(&bytes).map_err(|kind| Error::format(path, kind))
}
