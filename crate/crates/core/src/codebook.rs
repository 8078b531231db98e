//! Standardized Type-I / Type-II CSI compression.
//!
//! The user side picks oversampled DFT beams (Type-I) or a quantized linear
//! combination of `L` orthogonal DFT beams per subband (Type-II), reports the
//! indices as a bitstring, and the base station rebuilds `W = W1 * Wc1 * Wc2 * Lambda`
//! with unit-norm subband columns.
//!
//! Bit layout, MSB first, byte aligned with zero padding:
//!
//! | Type-I  | beam index: `ceil(log2(O * Nt))` |
//! |---------|----------------------------------|
//! | Type-II | rotation `ceil(log2 O)`, beam combination `ceil(log2 C(Nt, L))`, strongest beam `ceil(log2 L)`, wideband amplitudes `(L-1) * 3`, subband amplitudes `Nsb * (L-1) * 1`, subband phases `Nsb * (L-1) * 3` |

use std::f64::consts::PI;
use std::fmt;

use log::warn;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::CMatrix;
use crate::error::{Error, Result};

pub const PRB_SUBCARRIERS: usize = 12;
const WIDEBAND_AMP_BITS: u32 = 3;
const SUBBAND_AMP_BITS: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CodebookKind {
    #[serde(rename = "TYPE_I")]
    TypeI,
    #[serde(rename = "TYPE_II")]
    TypeII,
}

/// Codebook parameters. `n_beams`, `n_subbands` and the bit widths only matter
/// for Type-II; Type-I reports are expanded over `n_subbands` identical columns.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CodebookConfig {
    pub kind: CodebookKind,
    pub oversampling: u32,
    pub n_beams: usize,
    pub n_subbands: usize,
    pub wideband_amp_bits: u32,
    pub subband_phase_bits: u32,
    pub subband_amp_bits: u32,
}

impl Default for CodebookConfig {
    fn default() -> Self {
        Self::type_ii(4, 4)
    }
}

impl CodebookConfig {
    pub fn type_i(oversampling: u32) -> Self {
        Self {
            kind: CodebookKind::TypeI,
            oversampling,
            n_beams: 1,
            n_subbands: 1,
            wideband_amp_bits: WIDEBAND_AMP_BITS,
            subband_phase_bits: 3,
            subband_amp_bits: SUBBAND_AMP_BITS,
        }
    }

    /// Oversampling 4 with `n_beams` beams over `n_subbands` subbands.
    pub fn type_ii(n_beams: usize, n_subbands: usize) -> Self {
        Self {
            kind: CodebookKind::TypeII,
            oversampling: 4,
            n_beams,
            n_subbands,
            wideband_amp_bits: WIDEBAND_AMP_BITS,
            subband_phase_bits: 3,
            subband_amp_bits: SUBBAND_AMP_BITS,
        }
    }

    /// The six benchmark operating points: Type-I O=1,2,4 and Type-II L=N_SB=2,3,4.
    pub fn benchmark_sweep() -> Vec<Self> {
        vec![
            Self::type_i(1),
            Self::type_i(2),
            Self::type_i(4),
            Self::type_ii(2, 2),
            Self::type_ii(3, 3),
            Self::type_ii(4, 4),
        ]
    }

    pub fn label(&self) -> String {
        match self.kind {
            CodebookKind::TypeI => format!("TypeI-O{}", self.oversampling),
            CodebookKind::TypeII => format!(
                "TypeII-O{}-L{}-SB{}",
                self.oversampling, self.n_beams, self.n_subbands
            ),
        }
    }

    /// Subbands the decoded CSI is expressed over.
    pub fn decoded_subbands(&self) -> usize {
        match self.kind {
            CodebookKind::TypeI => 1,
            CodebookKind::TypeII => self.n_subbands,
        }
    }

    pub fn violations(&self, n_tx: usize, n_subcarriers: usize) -> Vec<String> {
        let mut v = Vec::new();
        if ![1, 2, 4].contains(&self.oversampling) {
            v.push(format!(
                "codebook.oversampling must be one of {{1, 2, 4}}, got {}",
                self.oversampling
            ));
        }
        if self.kind == CodebookKind::TypeII {
            if self.n_beams == 0 || self.n_beams > n_tx {
                v.push(format!(
                    "codebook.n_beams must be in 1..={n_tx}, got {}",
                    self.n_beams
                ));
            }
            if self.n_subbands == 0 || self.n_subbands > n_subcarriers {
                v.push(format!(
                    "codebook.n_subbands must be in 1..={n_subcarriers}, got {}",
                    self.n_subbands
                ));
            } else if n_subcarriers < self.n_subbands * PRB_SUBCARRIERS {
                v.push(format!(
                    "n_subcarriers ({n_subcarriers}) must hold at least one PRB per subband ({} subbands)",
                    self.n_subbands
                ));
            }
            if self.wideband_amp_bits != WIDEBAND_AMP_BITS {
                v.push("codebook.wideband_amp_bits must be 3".into());
            }
            if self.subband_amp_bits != SUBBAND_AMP_BITS {
                v.push("codebook.subband_amp_bits must be 1".into());
            }
            if !(1..=6).contains(&self.subband_phase_bits) {
                v.push("codebook.subband_phase_bits must be in 1..=6".into());
            }
        }
        v
    }
}

/// `ceil(log2(n))`, with 0 for `n <= 1`.
pub fn bits_for(n: u64) -> u32 {
    if n <= 1 {
        0
    } else {
        64 - (n - 1).leading_zeros()
    }
}

pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    u64::try_from(acc).expect("binomial overflow")
}

/// Lexicographic rank of a strictly increasing `k`-subset of `0..n`.
pub fn combination_rank(beams: &[usize], n: usize) -> u64 {
    let k = beams.len();
    let mut rank = 0;
    let mut next = 0;
    for (i, &b) in beams.iter().enumerate() {
        for v in next..b {
            rank += binomial(n - 1 - v, k - 1 - i);
        }
        next = b + 1;
    }
    rank
}

/// Inverse of [`combination_rank`].
pub fn combination_unrank(mut rank: u64, n: usize, k: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut v = 0;
    for i in 0..k {
        loop {
            let block = binomial(n - 1 - v, k - 1 - i);
            if rank < block {
                break;
            }
            rank -= block;
            v += 1;
        }
        out.push(v);
        v += 1;
    }
    out
}

/// Oversampled DFT beam `exp(j 2 pi n (beam + rotation / O) / Nt) / sqrt(Nt)`.
pub fn dft_beam(beam_index: usize, rotation_index: usize, oversampling: u32, n_tx: usize) -> Vec<Complex64> {
    assert!(beam_index < n_tx, "beam index {beam_index} out of range for {n_tx} antennas");
    assert!(
        rotation_index < oversampling as usize,
        "rotation {rotation_index} out of range for oversampling {oversampling}"
    );
    let freq = (beam_index as f64 + rotation_index as f64 / oversampling as f64) / n_tx as f64;
    let scale = 1.0 / (n_tx as f64).sqrt();
    (0..n_tx)
        .map(|n| Complex64::from_polar(scale, 2.0 * PI * n as f64 * freq))
        .collect()
}

/// Type-I oversampled beam `b` in `0..O*Nt`, i.e. `dft_beam(b / O, b % O)`.
pub fn oversampled_beam(b: usize, oversampling: u32, n_tx: usize) -> Vec<Complex64> {
    let o = oversampling as usize;
    dft_beam(b / o, b % o, oversampling, n_tx)
}

/// Contiguous assignment of subcarriers to subbands.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SubbandMap {
    pub n_subcarriers: usize,
    pub n_subbands: usize,
    /// Subband index of every subcarrier.
    pub assignment: Vec<usize>,
}

impl SubbandMap {
    /// Split `n_subcarriers` into `n_subbands` maximally equal contiguous blocks,
    /// larger blocks first.
    pub fn new(n_subcarriers: usize, n_subbands: usize) -> Self {
        assert!(
            n_subbands >= 1 && n_subbands <= n_subcarriers,
            "need 1..=K subbands"
        );
        let base = n_subcarriers / n_subbands;
        let extra = n_subcarriers % n_subbands;
        let mut assignment = Vec::with_capacity(n_subcarriers);
        for s in 0..n_subbands {
            let size = base + usize::from(s < extra);
            assignment.extend(std::iter::repeat_n(s, size));
        }
        Self {
            n_subcarriers,
            n_subbands,
            assignment,
        }
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.n_subbands];
        for &s in &self.assignment {
            sizes[s] += 1;
        }
        sizes
    }
}

/// Mean channel of every subband, `Nt x Nsb`.
pub fn subband_average(h: &CMatrix, map: &SubbandMap) -> CMatrix {
    let mut g = CMatrix::zeros(h.nrows(), map.n_subbands);
    for (k, &s) in map.assignment.iter().enumerate() {
        let mut col = g.column_mut(s);
        col += h.column(k);
    }
    for (s, size) in map.sizes().into_iter().enumerate() {
        let mut col = g.column_mut(s);
        col /= Complex64::new(size as f64, 0.0);
    }
    g
}

/// Column `k` of the result is column `map[k]` of `w`.
pub fn subband_to_subcarrier(w: &CMatrix, map: &SubbandMap) -> CMatrix {
    assert_eq!(w.ncols(), map.n_subbands, "W must have one column per subband");
    CMatrix::from_fn(w.nrows(), map.n_subcarriers, |n, k| w[(n, map.assignment[k])])
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum CsiReport {
    TypeI { beam_index: usize },
    TypeII(TypeIIReport),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeIIReport {
    pub rotation: usize,
    /// Lexicographic index of the selected orthogonal beams.
    pub beam_combo: u64,
    /// Position of the strongest beam within the sorted selection.
    pub strongest: usize,
    /// 3-bit levels of the non-strongest beams, in selection order.
    pub wideband_amp: Vec<u8>,
    /// `[subband][beam]`, 1-bit levels.
    pub subband_amp: Vec<Vec<u8>>,
    /// `[subband][beam]`, PSK indices.
    pub subband_phase: Vec<Vec<u8>>,
}

impl TypeIIReport {
    pub fn beams(&self, n_tx: usize, n_beams: usize) -> Vec<usize> {
        combination_unrank(self.beam_combo, n_tx, n_beams)
    }
}

/// Wideband amplitude of a 3-bit level: 0 for level 0, else `sqrt(2^-(7 - level))`.
pub fn wideband_amplitude(level: u8) -> f64 {
    if level == 0 {
        0.0
    } else {
        2f64.powf(-((7 - level as i32) as f64) / 2.0)
    }
}

/// Subband amplitude of a 1-bit level: 1 for level 1, `sqrt(0.5)` for level 0.
pub fn subband_amplitude(level: u8) -> f64 {
    if level == 1 {
        1.0
    } else {
        0.5f64.sqrt()
    }
}

fn nearest_level(x: f64, levels: impl Iterator<Item = (u8, f64)>) -> u8 {
    let mut best = (0u8, f64::INFINITY);
    for (code, a) in levels {
        let d = (x - a).abs();
        if d < best.1 {
            best = (code, d);
        }
    }
    best.0
}

pub fn quantize_wideband(ratio: f64) -> u8 {
    nearest_level(ratio, (0u8..8).map(|c| (c, wideband_amplitude(c))))
}

pub fn quantize_subband(ratio: f64) -> u8 {
    nearest_level(ratio, [(0u8, subband_amplitude(0)), (1u8, subband_amplitude(1))].into_iter())
}

pub fn quantize_phase(angle: f64, bits: u32) -> u8 {
    let n = 1u32 << bits;
    let step = 2.0 * PI / n as f64;
    ((angle / step).round() as i64).rem_euclid(n as i64) as u8
}

pub fn phase_of(level: u8, bits: u32) -> f64 {
    2.0 * PI * level as f64 / (1u32 << bits) as f64
}

fn inner(a: &[Complex64], col: nalgebra::DVectorView<'_, Complex64>) -> Complex64 {
    a.iter().zip(col.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Pick the oversampled beam maximizing `sum_k |b^H h_k|^2`; ties go to the lowest index.
pub fn type_i_encode(h: &CMatrix, config: &CodebookConfig) -> CsiReport {
    let n_tx = h.nrows();
    let corr = h * h.adjoint();
    let mut best = (0usize, f64::NEG_INFINITY);
    for b in 0..config.oversampling as usize * n_tx {
        let v = nalgebra::DVector::from_vec(oversampled_beam(b, config.oversampling, n_tx));
        let score = (v.adjoint() * &corr * &v)[(0, 0)].re;
        if score > best.1 {
            best = (b, score);
        }
    }
    if corr.iter().all(|c| *c == Complex64::new(0.0, 0.0)) {
        warn!("type-I encode on an all-zero channel, reporting beam 0");
        best.0 = 0;
    }
    CsiReport::TypeI { beam_index: best.0 }
}

pub fn type_i_decode(beam_index: usize, config: &CodebookConfig, n_tx: usize, n_subbands: usize) -> CMatrix {
    let v = oversampled_beam(beam_index, config.oversampling, n_tx);
    CMatrix::from_fn(n_tx, n_subbands, |n, _| v[n])
}

/// Greedy Type-II selection: per rotation keep the `L` orthogonal beams with the
/// most subband-averaged power, keep the best rotation, then quantize amplitudes
/// and phases relative to the strongest beam.
pub fn type_ii_encode(h: &CMatrix, config: &CodebookConfig, map: &SubbandMap) -> CsiReport {
    let n_tx = h.nrows();
    let l = config.n_beams;
    let g = subband_average(h, map);
    let n_sb = map.n_subbands;

    let mut best: Option<(f64, usize, Vec<usize>, Vec<Vec<Complex64>>)> = None;
    for r in 0..config.oversampling as usize {
        // proj[i][s] = b_{i,r}^H g_s
        let proj: Vec<Vec<Complex64>> = (0..n_tx)
            .map(|i| {
                let b = dft_beam(i, r, config.oversampling, n_tx);
                (0..n_sb).map(|s| inner(&b, g.column(s))).collect()
            })
            .collect();
        let power: Vec<f64> = proj.iter().map(|p| p.iter().map(|c| c.norm_sqr()).sum()).collect();
        let mut order: Vec<usize> = (0..n_tx).collect();
        order.sort_by(|&a, &b| power[b].total_cmp(&power[a]).then(a.cmp(&b)));
        let mut chosen: Vec<usize> = order[..l].to_vec();
        chosen.sort_unstable();
        let captured: f64 = chosen.iter().map(|&i| power[i]).sum();
        if best.as_ref().is_none_or(|b| captured > b.0) {
            let p = chosen.iter().map(|&i| proj[i].clone()).collect();
            best = Some((captured, r, chosen, p));
        }
    }
    let (captured, rotation, beams, proj) = best.expect("oversampling >= 1");

    if captured == 0.0 {
        warn!("type-II encode on an all-zero channel");
        return CsiReport::TypeII(TypeIIReport {
            rotation: 0,
            beam_combo: 0,
            strongest: 0,
            wideband_amp: vec![0; l - 1],
            subband_amp: vec![vec![0; l - 1]; n_sb],
            subband_phase: vec![vec![0; l - 1]; n_sb],
        });
    }

    let rms: Vec<f64> = proj
        .iter()
        .map(|p| (p.iter().map(|c| c.norm_sqr()).sum::<f64>() / n_sb as f64).sqrt())
        .collect();
    let mut strongest = 0;
    for (i, &a) in rms.iter().enumerate() {
        if a > rms[strongest] {
            strongest = i;
        }
    }
    let others: Vec<usize> = (0..l).filter(|&i| i != strongest).collect();
    let wideband_amp: Vec<u8> = others
        .iter()
        .map(|&i| quantize_wideband(rms[i] / rms[strongest]))
        .collect();

    let mut subband_amp = vec![vec![0u8; l - 1]; n_sb];
    let mut subband_phase = vec![vec![0u8; l - 1]; n_sb];
    for s in 0..n_sb {
        let reference = proj[strongest][s];
        if reference == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, &i) in others.iter().enumerate() {
            let c = proj[i][s] / reference;
            subband_phase[s][j] = quantize_phase(c.arg(), config.subband_phase_bits);
            let wb = wideband_amplitude(wideband_amp[j]);
            subband_amp[s][j] = if wb > 0.0 { quantize_subband(c.norm() / wb) } else { 1 };
        }
    }

    CsiReport::TypeII(TypeIIReport {
        rotation,
        beam_combo: combination_rank(&beams, n_tx),
        strongest,
        wideband_amp,
        subband_amp,
        subband_phase,
    })
}

/// Rebuild `W1 Wc1 Wc2` and normalize every subband column (`Lambda`).
pub fn type_ii_decode(report: &TypeIIReport, config: &CodebookConfig, n_tx: usize) -> CMatrix {
    let l = config.n_beams;
    let beams = report.beams(n_tx, l);
    let vectors: Vec<Vec<Complex64>> = beams
        .iter()
        .map(|&b| dft_beam(b, report.rotation, config.oversampling, n_tx))
        .collect();
    let n_sb = report.subband_amp.len();
    let mut w = CMatrix::zeros(n_tx, n_sb);
    for s in 0..n_sb {
        let mut j = 0;
        for (i, v) in vectors.iter().enumerate() {
            let coef = if i == report.strongest {
                Complex64::new(1.0, 0.0)
            } else {
                let amp = wideband_amplitude(report.wideband_amp[j]) * subband_amplitude(report.subband_amp[s][j]);
                let phase = phase_of(report.subband_phase[s][j], config.subband_phase_bits);
                j += 1;
                Complex64::from_polar(amp, phase)
            };
            for n in 0..n_tx {
                w[(n, s)] += coef * v[n];
            }
        }
        let norm = w.column(s).norm();
        if norm > 0.0 {
            let mut col = w.column_mut(s);
            col /= Complex64::new(norm, 0.0);
        } else {
            warn!("type-II decode: subband {s} column is zero");
        }
    }
    w
}

pub fn encode(h: &CMatrix, config: &CodebookConfig) -> CsiReport {
    match config.kind {
        CodebookKind::TypeI => type_i_encode(h, config),
        CodebookKind::TypeII => type_ii_encode(h, config, &SubbandMap::new(h.ncols(), config.n_subbands)),
    }
}

/// Subband-level CSI, `Nt x n_subbands` for Type-I and `Nt x Nsb` for Type-II.
pub fn decode(report: &CsiReport, config: &CodebookConfig, n_tx: usize, n_subbands: usize) -> CMatrix {
    match report {
        CsiReport::TypeI { beam_index } => type_i_decode(*beam_index, config, n_tx, n_subbands),
        CsiReport::TypeII(r) => type_ii_decode(r, config, n_tx),
    }
}

/// Full standardized path for one user: encode, serialize, parse, decode and
/// expand to one unit-norm column per subcarrier.
pub fn reconstruct(h_est: &CMatrix, config: &CodebookConfig) -> Result<CMatrix> {
    let (n_tx, k) = h_est.shape();
    let report = encode(h_est, config);
    let bits = pack_bits(&report, config, n_tx)?;
    let parsed = unpack_bits(&bits, config, n_tx)?;
    let n_sb = config.decoded_subbands();
    let w = decode(&parsed, config, n_tx, n_sb);
    Ok(subband_to_subcarrier(&w, &SubbandMap::new(k, n_sb)))
}

pub fn overhead_bits(config: &CodebookConfig, n_tx: usize) -> usize {
    match config.kind {
        CodebookKind::TypeI => bits_for(config.oversampling as u64 * n_tx as u64) as usize,
        CodebookKind::TypeII => {
            let l = config.n_beams;
            let others = l - 1;
            bits_for(config.oversampling as u64) as usize
                + bits_for(binomial(n_tx, l)) as usize
                + bits_for(l as u64) as usize
                + others * config.wideband_amp_bits as usize
                + config.n_subbands * others * (config.subband_amp_bits + config.subband_phase_bits) as usize
        }
    }
}

/// Byte-aligned bitstring, zero padded in the trailing byte.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PackedReport {
    pub bytes: Vec<u8>,
    pub n_bits: usize,
}

impl fmt::Display for PackedReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.n_bits {
            let bit = (self.bytes[i / 8] >> (7 - i % 8)) & 1;
            write!(f, "{bit}")?;
        }
        Ok(())
    }
}

#[derive(Default)]
struct BitWriter {
    bytes: Vec<u8>,
    n_bits: usize,
}

impl BitWriter {
    fn put(&mut self, value: u64, width: u32) -> Result<()> {
        if width < 64 && value >> width != 0 {
            return Err(Error::Report(format!("value {value} does not fit in {width} bits")));
        }
        for i in (0..width).rev() {
            if self.n_bits % 8 == 0 {
                self.bytes.push(0);
            }
            if (value >> i) & 1 == 1 {
                let last = self.bytes.last_mut().expect("pushed above");
                *last |= 1 << (7 - self.n_bits % 8);
            }
            self.n_bits += 1;
        }
        Ok(())
    }
}

struct BitReader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl BitReader<'_> {
    fn take(&mut self, width: u32) -> u64 {
        let mut v = 0u64;
        for _ in 0..width {
            let bit = (self.bytes[self.pos / 8] >> (7 - self.pos % 8)) & 1;
            v = (v << 1) | bit as u64;
            self.pos += 1;
        }
        v
    }
}

pub fn pack_bits(report: &CsiReport, config: &CodebookConfig, n_tx: usize) -> Result<PackedReport> {
    let mut w = BitWriter::default();
    match (report, config.kind) {
        (CsiReport::TypeI { beam_index }, CodebookKind::TypeI) => {
            if *beam_index >= config.oversampling as usize * n_tx {
                return Err(Error::Report(format!("beam index {beam_index} out of range")));
            }
            w.put(*beam_index as u64, bits_for(config.oversampling as u64 * n_tx as u64))?;
        }
        (CsiReport::TypeII(r), CodebookKind::TypeII) => {
            let l = config.n_beams;
            check_type_ii_shape(r, config)?;
            if r.beam_combo >= binomial(n_tx, l) || r.strongest >= l || r.rotation >= config.oversampling as usize {
                return Err(Error::Report("type-II index out of range".into()));
            }
            w.put(r.rotation as u64, bits_for(config.oversampling as u64))?;
            w.put(r.beam_combo, bits_for(binomial(n_tx, l)))?;
            w.put(r.strongest as u64, bits_for(l as u64))?;
            for &a in &r.wideband_amp {
                w.put(a as u64, config.wideband_amp_bits)?;
            }
            for sb in &r.subband_amp {
                for &a in sb {
                    w.put(a as u64, config.subband_amp_bits)?;
                }
            }
            for sb in &r.subband_phase {
                for &p in sb {
                    w.put(p as u64, config.subband_phase_bits)?;
                }
            }
        }
        _ => return Err(Error::Report("report variant does not match codebook kind".into())),
    }
    debug_assert_eq!(w.n_bits, overhead_bits(config, n_tx));
    Ok(PackedReport {
        bytes: w.bytes,
        n_bits: w.n_bits,
    })
}

fn check_type_ii_shape(r: &TypeIIReport, config: &CodebookConfig) -> Result<()> {
    let others = config.n_beams - 1;
    let ok = r.wideband_amp.len() == others
        && r.subband_amp.len() == config.n_subbands
        && r.subband_phase.len() == config.n_subbands
        && r.subband_amp.iter().chain(&r.subband_phase).all(|s| s.len() == others);
    if ok {
        Ok(())
    } else {
        Err(Error::Report("type-II report shape does not match config".into()))
    }
}

pub fn unpack_bits(bits: &PackedReport, config: &CodebookConfig, n_tx: usize) -> Result<CsiReport> {
    let expected = overhead_bits(config, n_tx);
    if bits.n_bits != expected || bits.bytes.len() != expected.div_ceil(8) {
        return Err(Error::Report(format!(
            "bitstring holds {} bits in {} bytes, codebook {} needs {expected} bits",
            bits.n_bits,
            bits.bytes.len(),
            config.label()
        )));
    }
    if expected % 8 != 0 {
        let pad_mask = (1u8 << (8 - expected % 8)) - 1;
        if bits.bytes.last().is_some_and(|b| b & pad_mask != 0) {
            return Err(Error::Report("non-zero padding bits".into()));
        }
    }
    let mut r = BitReader {
        bytes: &bits.bytes,
        pos: 0,
    };
    match config.kind {
        CodebookKind::TypeI => {
            let b = r.take(bits_for(config.oversampling as u64 * n_tx as u64)) as usize;
            if b >= config.oversampling as usize * n_tx {
                return Err(Error::Report(format!("beam index {b} out of range")));
            }
            Ok(CsiReport::TypeI { beam_index: b })
        }
        CodebookKind::TypeII => {
            let l = config.n_beams;
            let others = l - 1;
            let rotation = r.take(bits_for(config.oversampling as u64)) as usize;
            let beam_combo = r.take(bits_for(binomial(n_tx, l)));
            let strongest = r.take(bits_for(l as u64)) as usize;
            if rotation >= config.oversampling as usize || beam_combo >= binomial(n_tx, l) || strongest >= l {
                return Err(Error::Report("type-II index out of range".into()));
            }
            let wideband_amp = (0..others).map(|_| r.take(config.wideband_amp_bits) as u8).collect();
            let subband_amp = (0..config.n_subbands)
                .map(|_| (0..others).map(|_| r.take(config.subband_amp_bits) as u8).collect())
                .collect();
            let subband_phase = (0..config.n_subbands)
                .map(|_| (0..others).map(|_| r.take(config.subband_phase_bits) as u8).collect())
                .collect();
            Ok(CsiReport::TypeII(TypeIIReport {
                rotation,
                beam_combo,
                strongest,
                wideband_amp,
                subband_amp,
                subband_phase,
            }))
        }
    }
}

/// Human-readable field-by-field dump of a report.
pub fn describe(report: &CsiReport, config: &CodebookConfig, n_tx: usize) -> String {
    use std::fmt::Write;
    let mut s = String::new();
    match report {
        CsiReport::TypeI { beam_index } => {
            let o = config.oversampling as usize;
            writeln!(s, "codebook       {}", config.label()).ok();
            writeln!(s, "beam_index     {beam_index} (beam {}, rotation {})", beam_index / o, beam_index % o).ok();
        }
        CsiReport::TypeII(r) => {
            writeln!(s, "codebook       {}", config.label()).ok();
            writeln!(s, "rotation       {}", r.rotation).ok();
            writeln!(s, "beam_combo     {} -> beams {:?}", r.beam_combo, r.beams(n_tx, config.n_beams)).ok();
            writeln!(s, "strongest      {}", r.strongest).ok();
            let amps: Vec<String> = r
                .wideband_amp
                .iter()
                .map(|&a| format!("{a} ({:.4})", wideband_amplitude(a)))
                .collect();
            writeln!(s, "wideband_amp   [{}]", amps.join(", ")).ok();
            for (sb, (a, p)) in r.subband_amp.iter().zip(&r.subband_phase).enumerate() {
                writeln!(s, "subband {sb:<2}     amp {a:?} phase {p:?}").ok();
            }
        }
    }
    s
}
