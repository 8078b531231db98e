//! Binary dataset container with a JSON sidecar.
//!
//! Layout (little-endian): `"CSIF"`, `u32` version, `u32` N_t, `u32` K,
//! `u32` D, `u32` U, `u64` record count, `u64` scenario hash. Each record is
//! `u64` sample index, `u64` scenario id, then per user the `D x N_t` taps and
//! the `N_t x K` true channel, then per user the `N_t x K` estimate. Matrices
//! are column-major with interleaved `(re, im)` `f64` pairs. A CRC32 of
//! everything before it closes the file. The sidecar (`<stem>.json`) carries
//! the full scenario so the records can be regenerated and checked.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{CMatrix, Dataset, DatasetRecord, ScenarioConfig, UserChannel};
use crate::error::FormatError;
use crate::{Error, Result};

pub const MAGIC: [u8; 4] = *b"CSIF";
pub const VERSION: u32 = 1;
const HEADER_LEN: usize = 4 + 4 + 4 * 4 + 8 + 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub format: String,
    pub version: u32,
    pub n_users: usize,
    pub n_records: usize,
    pub scenario_id: u64,
    /// Hash of the experiment configuration that produced the file, if any.
    pub config_hash: Option<String>,
    pub scenario: ScenarioConfig,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

/// Writes through a running CRC.
struct CrcWriter<W: Write> {
    inner: W,
    crc: crc32fast::Hasher,
}

impl<W: Write> CrcWriter<W> {
    fn put(&mut self, bytes: &[u8]) -> std::io::Result<()> {
        self.crc.update(bytes);
        self.inner.write_all(bytes)
    }

    fn matrix(&mut self, m: &CMatrix) -> std::io::Result<()> {
        let mut buf = Vec::with_capacity(m.len() * 16);
        for v in m.iter() {
            buf.extend_from_slice(&v.re.to_le_bytes());
            buf.extend_from_slice(&v.im.to_le_bytes());
        }
        self.put(&buf)
    }
}

fn u32_of(v: usize) -> Result<[u8; 4]> {
    u32::try_from(v)
        .map(u32::to_le_bytes)
        .map_err(|_| Error::Contract(format!("dimension {v} does not fit the dataset header")))
}

/// Write `ds` to `path` and its sidecar next to it.
pub fn save_dataset(ds: &Dataset, path: &Path, config_hash: Option<&str>) -> Result<()> {
    let s = &ds.scenario;
    for r in &ds.records {
        if r.n_users() != ds.n_users || r.estimated_channels.len() != ds.n_users {
            return Err(Error::Contract(format!("record {} does not have {} users", r.sample_index, ds.n_users)));
        }
        for (c, e) in r.user_channels.iter().zip(&r.estimated_channels) {
            if c.taps.shape() != (s.n_taps, s.n_tx) || c.freq.shape() != (s.n_tx, s.n_subcarriers) || e.shape() != c.freq.shape() {
                return Err(Error::Contract(format!("record {} does not match the scenario dimensions", r.sample_index)));
            }
        }
    }
    let mut w = CrcWriter {
        inner: BufWriter::new(File::create(path)?),
        crc: crc32fast::Hasher::new(),
    };
    w.put(&MAGIC)?;
    w.put(&VERSION.to_le_bytes())?;
    for d in [s.n_tx, s.n_subcarriers, s.n_taps, ds.n_users] {
        w.put(&u32_of(d)?)?;
    }
    w.put(&(ds.len() as u64).to_le_bytes())?;
    w.put(&ds.scenario_id.to_le_bytes())?;
    for r in &ds.records {
        w.put(&(r.sample_index as u64).to_le_bytes())?;
        w.put(&r.scenario_id.to_le_bytes())?;
        for c in &r.user_channels {
            w.matrix(&c.taps)?;
            w.matrix(&c.freq)?;
        }
        for e in &r.estimated_channels {
            w.matrix(e)?;
        }
    }
    let crc = w.crc.finalize();
    w.inner.write_all(&crc.to_le_bytes())?;
    w.inner.flush()?;
    let sidecar = Sidecar {
        format: "CSIF".into(),
        version: VERSION,
        n_users: ds.n_users,
        n_records: ds.len(),
        scenario_id: ds.scenario_id,
        config_hash: config_hash.map(str::to_string),
        scenario: s.clone(),
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn u32(&mut self) -> usize {
        let v = u32::from_le_bytes(self.bytes[self.at..self.at + 4].try_into().unwrap());
        self.at += 4;
        v as usize
    }

    fn u64(&mut self) -> u64 {
        let v = u64::from_le_bytes(self.bytes[self.at..self.at + 8].try_into().unwrap());
        self.at += 8;
        v
    }

    fn f64(&mut self) -> f64 {
        f64::from_bits(self.u64())
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> CMatrix {
        CMatrix::from_iterator(rows, cols, (0..rows * cols).map(|_| Complex64::new(self.f64(), self.f64())))
    }
}

/// Header fields of a dataset file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DatasetHeader {
    pub n_tx: usize,
    pub n_subcarriers: usize,
    pub n_taps: usize,
    pub n_users: usize,
    pub n_records: usize,
    pub scenario_id: u64,
}

impl DatasetHeader {
    fn record_len(&self) -> Option<usize> {
        let per_user = 16 * (self.n_taps * self.n_tx + 2 * self.n_tx * self.n_subcarriers);
        per_user.checked_mul(self.n_users)?.checked_add(16)
    }
}

/// Decode the binary part. Magic, version, length and CRC are checked in
/// that order, so each failure is reported by its own kind.
pub fn decode_dataset(bytes: &[u8], scenario: &ScenarioConfig) -> std::result::Result<Dataset, FormatError> {
    if bytes.len() < 8 {
        return Err(FormatError::Length {
            expected: HEADER_LEN + 4,
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
    if bytes.len() < HEADER_LEN + 4 {
        return Err(FormatError::Length {
            expected: HEADER_LEN + 4,
            found: bytes.len(),
        });
    }
    let mut c = Cursor { bytes, at: 8 };
    let h = DatasetHeader {
        n_tx: c.u32(),
        n_subcarriers: c.u32(),
        n_taps: c.u32(),
        n_users: c.u32(),
        n_records: c.u64() as usize,
        scenario_id: c.u64(),
    };
    let expected = h
        .record_len()
        .and_then(|r| r.checked_mul(h.n_records))
        .and_then(|r| r.checked_add(HEADER_LEN + 4))
        .ok_or_else(|| FormatError::Other("header dimensions overflow".into()))?;
    if bytes.len() != expected {
        return Err(FormatError::Length {
            expected,
            found: bytes.len(),
        });
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(trailer.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(FormatError::Crc { stored, computed });
    }
    if (scenario.n_tx, scenario.n_subcarriers, scenario.n_taps) != (h.n_tx, h.n_subcarriers, h.n_taps) {
        return Err(FormatError::Other(format!(
            "sidecar scenario is {}x{} with {} taps, data is {}x{} with {} taps",
            scenario.n_tx, scenario.n_subcarriers, scenario.n_taps, h.n_tx, h.n_subcarriers, h.n_taps
        )));
    }
    let records = (0..h.n_records)
        .map(|_| {
            let sample_index = c.u64() as usize;
            let scenario_id = c.u64();
            let user_channels = (0..h.n_users)
                .map(|_| UserChannel {
                    taps: c.matrix(h.n_taps, h.n_tx),
                    freq: c.matrix(h.n_tx, h.n_subcarriers),
                })
                .collect();
            let estimated_channels = (0..h.n_users).map(|_| c.matrix(h.n_tx, h.n_subcarriers)).collect();
            DatasetRecord {
                user_channels,
                estimated_channels,
                scenario_id,
                sample_index,
            }
        })
        .collect();
    Ok(Dataset {
        scenario: scenario.clone(),
        n_users: h.n_users,
        scenario_id: h.scenario_id,
        records,
    })
}

pub fn load_sidecar(path: &Path) -> Result<Sidecar> {
    let p = sidecar_path(path);
    let text = std::fs::read_to_string(&p).map_err(|e| Error::format(&p, FormatError::Other(format!("cannot read sidecar: {e}"))))?;
    serde_json::from_str(&text).map_err(|e| Error::format(&p, FormatError::Other(format!("bad sidecar: {e}"))))
}

/// Read a dataset and its sidecar; the sidecar must describe the same data.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    File::open(path)?.read_to_end(&mut bytes)?;
    let sidecar = load_sidecar(path)?;
    let ds = decode_dataset(&bytes, &sidecar.scenario).map_err(|k| Error::format(path, k))?;
    if (ds.n_users, ds.len(), ds.scenario_id) != (sidecar.n_users, sidecar.n_records, sidecar.scenario_id) {
        return Err(Error::format(path, FormatError::Other("sidecar does not describe this data file".into())));
    }
    Ok(ds)
}
