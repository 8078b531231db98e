//! Synthetic site-specific multipath channels.
//!
//! A scenario is a fixed layout of scattering clusters around the base station.
//! Each user draws its own paths around those clusters, the paths are turned
//! into a sinc-pulse delay-tap channel and then into per-subcarrier vectors.
//! A [`TwinPerturbation`] models an imperfect digital replica of the same site.

use std::f64::consts::{FRAC_PI_2, PI};

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Open01, StandardNormal};
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::parallel;

pub type CMatrix = DMatrix<Complex64>;

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;
/// Scatterer distance used to turn a position error into an angular error.
pub const NOMINAL_SCATTERER_DISTANCE_M: f64 = 50.0;
pub const THERMAL_NOISE_DBM_PER_HZ: f64 = -174.0;
const MAX_DELAY_REDRAWS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum PathTag {
    Building,
    Foliage,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathParams {
    pub gain: Complex64,
    /// Seconds, within the tap window.
    pub delay: f64,
    /// Radians in [-pi, pi).
    pub azimuth: f64,
    /// Radians in [-pi/2, pi/2].
    pub elevation: f64,
    pub tag: PathTag,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PathSet {
    pub paths: Vec<PathParams>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }
}

/// One scattering cluster of the site layout.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusterSpec {
    pub mean_azimuth: f64,
    pub mean_elevation: f64,
    /// Seconds.
    pub mean_delay: f64,
    /// Standard deviation of the Laplacian angle spread, radians.
    pub angular_spread: f64,
    /// Mean excess delay of the exponential delay spread, seconds.
    pub delay_spread: f64,
    /// Per-path mean power `E|gain|^2` in dB.
    pub mean_power_db: f64,
    pub tag: PathTag,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub n_tx: usize,
    pub n_subcarriers: usize,
    /// Hz.
    pub subcarrier_spacing: f64,
    /// Hz.
    pub carrier_freq: f64,
    pub n_taps: usize,
    /// Radiated power at the base station.
    pub tx_power_dbm: f64,
    pub noise_figure_db: f64,
    pub cluster_layout: Vec<ClusterSpec>,
    pub paths_per_cluster: usize,
    /// Half-width of the uniform azimuth offset that places each user: all of a
    /// user's clusters rotate together, as seen from the base station.
    pub user_azimuth_range: f64,
    /// Redraw the cluster means for every user (a non-site-specific scenario).
    pub resample_layout: bool,
    pub rng_seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self::full_scale()
    }
}

impl ScenarioConfig {
    /// 32 antennas, 288 subcarriers at 30 kHz, 3.5 GHz, 30 dBm, 7 dB noise figure.
    pub fn full_scale() -> Self {
        Self {
            n_tx: 32,
            n_subcarriers: 288,
            subcarrier_spacing: 30e3,
            carrier_freq: 3.5e9,
            n_taps: 64,
            tx_power_dbm: 30.0,
            noise_figure_db: 7.0,
            cluster_layout: default_layout(),
            paths_per_cluster: 4,
            user_azimuth_range: 0.6,
            resample_layout: false,
            rng_seed: 0,
        }
    }

    /// 16 antennas, 48 subcarriers, 16 taps.
    pub fn desk() -> Self {
        Self {
            n_tx: 16,
            n_subcarriers: 48,
            n_taps: 16,
            ..Self::full_scale()
        }
    }

    /// Tap spacing `1 / (K * subcarrier_spacing)`.
    pub fn sampling_period(&self) -> f64 {
        1.0 / (self.n_subcarriers as f64 * self.subcarrier_spacing)
    }

    pub fn max_delay(&self) -> f64 {
        self.n_taps as f64 * self.sampling_period()
    }

    pub fn bandwidth(&self) -> f64 {
        self.n_subcarriers as f64 * self.subcarrier_spacing
    }

    pub fn tx_power(&self) -> f64 {
        dbm_to_watts(self.tx_power_dbm)
    }

    /// Thermal noise over the occupied bandwidth plus the receiver noise figure.
    pub fn noise_power(&self) -> f64 {
        dbm_to_watts(
            THERMAL_NOISE_DBM_PER_HZ + 10.0 * self.bandwidth().log10() + self.noise_figure_db,
        )
    }

    pub fn n_paths(&self) -> usize {
        self.cluster_layout.len() * self.paths_per_cluster
    }

    /// Every violated invariant, one message each.
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        if self.n_tx == 0 {
            v.push("scenario.n_tx must be at least 1".into());
        }
        if self.n_subcarriers == 0 {
            v.push("scenario.n_subcarriers must be at least 1".into());
        }
        if self.n_taps == 0 || self.n_taps > self.n_subcarriers {
            v.push(format!(
                "scenario.n_taps must be in 1..=n_subcarriers ({}), got {}",
                self.n_subcarriers, self.n_taps
            ));
        }
        if !(self.subcarrier_spacing > 0.0) {
            v.push("scenario.subcarrier_spacing must be positive".into());
        }
        if !(self.carrier_freq > 0.0) {
            v.push("scenario.carrier_freq must be positive".into());
        }
        if !self.tx_power_dbm.is_finite() {
            v.push("scenario.tx_power_dbm must be finite".into());
        }
        if !self.noise_figure_db.is_finite() {
            v.push("scenario.noise_figure_db must be finite".into());
        }
        if self.cluster_layout.is_empty() {
            v.push("scenario.cluster_layout must not be empty".into());
        }
        if self.paths_per_cluster == 0 {
            v.push("scenario.paths_per_cluster must be at least 1".into());
        }
        if !(self.user_azimuth_range >= 0.0 && self.user_azimuth_range <= PI) {
            v.push("scenario.user_azimuth_range must be in [0, pi]".into());
        }
        if self.n_subcarriers > 0 && self.subcarrier_spacing > 0.0 {
            let window = self.max_delay();
            for (i, c) in self.cluster_layout.iter().enumerate() {
                if !(c.mean_delay >= 0.0 && c.mean_delay < window) {
                    v.push(format!(
                        "scenario.cluster_layout[{i}].mean_delay must be in [0, {window:.3e}) s"
                    ));
                }
                if !(c.angular_spread >= 0.0) || !(c.delay_spread >= 0.0) {
                    v.push(format!("scenario.cluster_layout[{i}] spreads must be non-negative"));
                }
                if !c.mean_power_db.is_finite() {
                    v.push(format!("scenario.cluster_layout[{i}].mean_power_db must be finite"));
                }
            }
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
}

/// Three clusters of four paths; the third cluster is foliage. Per-path
/// gains around -120 dB put the post-beamforming SNR near 25 dB at desk scale.
fn default_layout() -> Vec<ClusterSpec> {
    vec![
        ClusterSpec {
            mean_azimuth: 0.35,
            mean_elevation: 0.05,
            mean_delay: 0.3e-6,
            angular_spread: 0.06,
            delay_spread: 0.15e-6,
            mean_power_db: -120.0,
            tag: PathTag::Building,
        },
        ClusterSpec {
            mean_azimuth: -0.55,
            mean_elevation: 0.0,
            mean_delay: 1.1e-6,
            angular_spread: 0.08,
            delay_spread: 0.3e-6,
            mean_power_db: -123.0,
            tag: PathTag::Building,
        },
        ClusterSpec {
            mean_azimuth: 0.9,
            mean_elevation: 0.1,
            mean_delay: 0.7e-6,
            angular_spread: 0.1,
            delay_spread: 0.2e-6,
            mean_power_db: -122.0,
            tag: PathTag::Foliage,
        },
    ]
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

/// Map an angle into [-pi, pi).
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(2.0 * PI) - PI;
    if w >= PI {
        -PI
    } else {
        w
    }
}

fn laplacian(rng: &mut impl Rng, std_dev: f64) -> f64 {
    let u: f64 = rng.sample::<f64, _>(Open01) - 0.5;
    let scale = std_dev / std::f64::consts::SQRT_2;
    -scale * u.signum() * (1.0 - 2.0 * u.abs()).ln()
}

fn complex_normal(rng: &mut impl Rng, variance: f64) -> Complex64 {
    let s = (variance / 2.0).sqrt();
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(s * re, s * im)
}

/// Draw one user's multipath realization around the scenario's cluster layout.
pub fn sample_paths(
    scenario: &ScenarioConfig,
    user_index: usize,
    rng: &mut impl Rng,
) -> Result<PathSet> {
    if scenario.cluster_layout.is_empty() {
        return Err(Error::Config("scenario.cluster_layout is empty".into()));
    }
    let window = scenario.max_delay();
    let mut paths = Vec::with_capacity(scenario.n_paths());
    let placement = if scenario.user_azimuth_range > 0.0 {
        let r = scenario.user_azimuth_range;
        rng.random_range(-r..r)
    } else {
        0.0
    };
    for spec in &scenario.cluster_layout {
        let resampled;
        let cluster = if scenario.resample_layout {
            resampled = ClusterSpec {
                mean_azimuth: rng.random_range(-FRAC_PI_2..FRAC_PI_2),
                mean_delay: rng.random_range(0.0..0.25 * window),
                ..spec.clone()
            };
            &resampled
        } else {
            spec
        };
        let delay_dist = (cluster.delay_spread > 0.0)
            .then(|| Exp::new(1.0 / cluster.delay_spread).expect("positive rate"));
        for _ in 0..scenario.paths_per_cluster {
            let azimuth = wrap_angle(cluster.mean_azimuth + placement + laplacian(rng, cluster.angular_spread));
            let elevation = (cluster.mean_elevation + laplacian(rng, cluster.angular_spread))
                .clamp(-FRAC_PI_2, FRAC_PI_2);
            let mut delay = cluster.mean_delay;
            if let Some(dist) = &delay_dist {
                let mut accepted = false;
                for _ in 0..MAX_DELAY_REDRAWS {
                    delay = cluster.mean_delay + dist.sample(rng);
                    if delay < window {
                        accepted = true;
                        break;
                    }
                }
                if !accepted {
                    warn!("user {user_index}: path delay redrawn {MAX_DELAY_REDRAWS} times, truncating to tap window");
                    delay = window.next_down();
                }
            }
            let gain = loop {
                let g = complex_normal(rng, 10f64.powf(cluster.mean_power_db / 10.0));
                if g.norm() > 0.0 {
                    break g;
                }
            };
            paths.push(PathParams {
                gain,
                delay,
                azimuth,
                elevation,
                tag: cluster.tag,
            });
        }
    }
    Ok(PathSet { paths })
}

/// Half-wavelength uniform linear array along the y axis.
pub fn array_response(azimuth: f64, elevation: f64, n_tx: usize) -> Vec<Complex64> {
    let spatial = PI * elevation.cos() * azimuth.sin();
    (0..n_tx)
        .map(|n| Complex64::from_polar(1.0, spatial * n as f64))
        .collect()
}

/// Normalized sinc; arguments within 1e-9 of an integer land exactly on the grid.
pub fn sinc(x: f64) -> f64 {
    let r = x.round();
    if (x - r).abs() < 1e-9 {
        return if r == 0.0 { 1.0 } else { 0.0 };
    }
    let px = PI * x;
    px.sin() / px
}

/// Delay-tap channel, one row per tap (`n_taps x n_tx`).
pub fn delay_domain_channel(paths: &PathSet, scenario: &ScenarioConfig) -> CMatrix {
    let ts = scenario.sampling_period();
    let mut taps = CMatrix::zeros(scenario.n_taps, scenario.n_tx);
    for p in &paths.paths {
        let a = array_response(p.azimuth, p.elevation, scenario.n_tx);
        let delay_in_taps = p.delay / ts;
        for d in 0..scenario.n_taps {
            let coef = p.gain * sinc(d as f64 - delay_in_taps);
            if coef == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (n, an) in a.iter().enumerate() {
                taps[(d, n)] += coef * an;
            }
        }
    }
    taps
}

/// `h_k = sum_d h_d exp(-j 2 pi k d / K)` for k = 0..K-1, computed with an FFT.
pub fn freq_channel(taps: &CMatrix, n_subcarriers: usize) -> CMatrix {
    let (n_taps, n_tx) = taps.shape();
    assert!(n_taps <= n_subcarriers, "more taps than subcarriers");
    let fft = FftPlanner::<f64>::new().plan_fft_forward(n_subcarriers);
    let mut out = CMatrix::zeros(n_tx, n_subcarriers);
    let mut buf = vec![Complex64::new(0.0, 0.0); n_subcarriers];
    for n in 0..n_tx {
        buf.fill(Complex64::new(0.0, 0.0));
        for d in 0..n_taps {
            buf[d] = taps[(d, n)];
        }
        fft.process(&mut buf);
        for (k, v) in buf.iter().enumerate() {
            out[(n, k)] = *v;
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct UserChannel {
    /// `n_taps x n_tx`.
    pub taps: CMatrix,
    /// `n_tx x n_subcarriers`.
    pub freq: CMatrix,
}

impl UserChannel {
    pub fn from_taps(taps: CMatrix, n_subcarriers: usize) -> Self {
        let freq = freq_channel(&taps, n_subcarriers);
        Self { taps, freq }
    }

    pub fn from_paths(paths: &PathSet, scenario: &ScenarioConfig) -> Self {
        Self::from_taps(delay_domain_channel(paths, scenario), scenario.n_subcarriers)
    }
}

/// Modeling errors of a digital replica relative to the real site.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TwinPerturbation {
    pub drop_foliage: bool,
    /// Meters.
    pub position_error_std: f64,
    pub rng_seed: u64,
}

impl TwinPerturbation {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn foliage_removed(rng_seed: u64) -> Self {
        Self {
            drop_foliage: true,
            position_error_std: 0.0,
            rng_seed,
        }
    }

    pub fn is_identity(&self) -> bool {
        !self.drop_foliage && self.position_error_std == 0.0
    }

    /// The replica's site layout: every building cluster is displaced once by
    /// `dd ~ Normal(0, position_error_std)`, moving its mean delay by `dd / c`
    /// and its mean azimuth by `atan(dd / r)`, so all paths off one building
    /// share the error. Foliage clusters keep their place.
    pub fn shifted_layout(&self, scenario: &ScenarioConfig) -> ScenarioConfig {
        let mut out = scenario.clone();
        if self.position_error_std == 0.0 {
            return out;
        }
        let dist = Normal::new(0.0, self.position_error_std).expect("finite std");
        let mut rng = ChaCha8Rng::seed_from_u64(self.rng_seed);
        let window = scenario.max_delay();
        for c in out.cluster_layout.iter_mut().filter(|c| c.tag == PathTag::Building) {
            let dd: f64 = dist.sample(&mut rng);
            c.mean_delay = (c.mean_delay + dd / SPEED_OF_LIGHT).clamp(0.0, window.next_down());
            c.mean_azimuth = wrap_angle(c.mean_azimuth + (dd / NOMINAL_SCATTERER_DISTANCE_M).atan());
        }
        out
    }

    pub fn violations(&self, prefix: &str) -> Vec<String> {
        if self.position_error_std >= 0.0 && self.position_error_std.is_finite() {
            Vec::new()
        } else {
            vec![format!("{prefix}.position_error_std must be a finite value >= 0")]
        }
    }
}

/// Apply a replica's imperfections to a path set: optional foliage removal and
/// a per-path position error mapped to delay and azimuth offsets. Datasets use
/// [`TwinPerturbation::shifted_layout`] instead, which displaces whole buildings.
pub fn apply_twin_perturbation(
    paths: &PathSet,
    pert: &TwinPerturbation,
    rng: &mut impl Rng,
) -> PathSet {
    if pert.is_identity() {
        return paths.clone();
    }
    let shift = (pert.position_error_std > 0.0)
        .then(|| Normal::new(0.0, pert.position_error_std).expect("finite std"));
    let mut out = Vec::with_capacity(paths.len());
    for p in &paths.paths {
        if pert.drop_foliage && p.tag == PathTag::Foliage {
            continue;
        }
        let mut q = *p;
        if let Some(dist) = &shift {
            let dd: f64 = dist.sample(rng);
            q.delay = (q.delay + dd / SPEED_OF_LIGHT).max(0.0);
            q.azimuth = wrap_angle(q.azimuth + (dd / NOMINAL_SCATTERER_DISTANCE_M).atan());
        }
        out.push(q);
    }
    if out.is_empty() && !paths.is_empty() {
        warn!("twin perturbation removed every path; channel is identically zero");
    }
    PathSet { paths: out }
}

/// `H + E` with `E[|E|_F^2] / |H|_F^2 = 10^(nmse_db / 10)`; `-inf` returns `H`.
pub fn estimate_channel(h: &CMatrix, nmse_db: f64, rng: &mut impl Rng) -> CMatrix {
    if nmse_db == f64::NEG_INFINITY {
        return h.clone();
    }
    let energy = h.norm_squared();
    if energy == 0.0 {
        return h.clone();
    }
    let per_entry = energy * 10f64.powf(nmse_db / 10.0) / h.len() as f64;
    h.map(|v| v + complex_normal(rng, per_entry))
}

#[derive(Clone, Debug, PartialEq)]
pub struct DatasetRecord {
    pub user_channels: Vec<UserChannel>,
    /// The user-side estimates, one `n_tx x n_subcarriers` matrix per user.
    pub estimated_channels: Vec<CMatrix>,
    pub scenario_id: u64,
    pub sample_index: usize,
}

impl DatasetRecord {
    pub fn n_users(&self) -> usize {
        self.user_channels.len()
    }

    pub fn true_freq(&self) -> Vec<&CMatrix> {
        self.user_channels.iter().map(|c| &c.freq).collect()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub scenario: ScenarioConfig,
    pub n_users: usize,
    pub scenario_id: u64,
    pub records: Vec<DatasetRecord>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// A dataset holding a contiguous range of this one's records.
    pub fn slice(&self, range: std::ops::Range<usize>) -> Dataset {
        Dataset {
            scenario: self.scenario.clone(),
            n_users: self.n_users,
            scenario_id: self.scenario_id,
            records: self.records[range].to_vec(),
        }
    }
}

/// How the user equipment observes its own channel.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimation {
    /// `f64::NEG_INFINITY` for perfect estimates.
    pub nmse_db: f64,
    pub noise_seed: u64,
}

impl Estimation {
    pub fn perfect() -> Self {
        Self {
            nmse_db: f64::NEG_INFINITY,
            noise_seed: 0,
        }
    }
}

/// Stable identifier of a scenario plus optional perturbation.
pub fn scenario_id(scenario: &ScenarioConfig, pert: Option<&TwinPerturbation>) -> u64 {
    let pert = pert.filter(|p| !p.is_identity());
    let json = serde_json::to_string(&(scenario, pert)).expect("serializable");
    crate::hash::digest_u64(json.as_bytes())
}

/// Seeded generator for item `index` of a stream keyed by `seed`.
pub fn child_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Generate `n_samples` records of `n_users` users each. Record `i` depends only
/// on `(scenario.rng_seed, i)` and the estimation seed, never on the thread count.
pub fn generate_dataset(
    scenario: &ScenarioConfig,
    n_users: usize,
    n_samples: usize,
    pert: Option<&TwinPerturbation>,
    estimation: Estimation,
) -> Result<Dataset> {
    scenario.validate()?;
    if n_users == 0 {
        return Err(Error::Invalid(vec!["n_users must be at least 1".into()]));
    }
    let id = scenario_id(scenario, pert);
    let layout = pert.map_or_else(|| scenario.clone(), |p| p.shifted_layout(scenario));
    let build = |i: usize| -> Result<DatasetRecord> {
        let mut rng = child_rng(scenario.rng_seed, i as u64);
        let mut noise_rng = child_rng(estimation.noise_seed, i as u64);
        let mut user_channels = Vec::with_capacity(n_users);
        let mut estimated_channels = Vec::with_capacity(n_users);
        for u in 0..n_users {
            // Records draw the same random numbers as on the site; only the
            // replica's misplaced buildings and missing foliage differ.
            let mut paths = sample_paths(&layout, u, &mut rng)?;
            if pert.is_some_and(|p| p.drop_foliage) {
                paths.paths.retain(|q| q.tag != PathTag::Foliage);
            }
            let ch = UserChannel::from_paths(&paths, scenario);
            estimated_channels.push(estimate_channel(&ch.freq, estimation.nmse_db, &mut noise_rng));
            user_channels.push(ch);
        }
        Ok(DatasetRecord {
            user_channels,
            estimated_channels,
            scenario_id: id,
            sample_index: i,
        })
    };
    let records = parallel::map_indexed(n_samples, parallel::worker_count(), build)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    Ok(Dataset {
        scenario: scenario.clone(),
        n_users,
        scenario_id: id,
        records,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one_cluster(spread: f64, delay_spread: f64, power_db: f64, paths: usize) -> ScenarioConfig {
        ScenarioConfig {
            cluster_layout: vec![ClusterSpec {
                mean_azimuth: 0.4,
                mean_elevation: 0.1,
                mean_delay: 2.0e-6,
                angular_spread: spread,
                delay_spread,
                mean_power_db: power_db,
                tag: PathTag::Building,
            }],
            paths_per_cluster: paths,
            user_azimuth_range: 0.0,
            ..ScenarioConfig::desk()
        }
    }

    #[test]
    fn degenerate_spread_lands_on_cluster_mean() {
        let s = one_cluster(0.0, 0.0, 0.0, 1);
        let ps = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(3)).unwrap();
        assert_eq!(ps.len(), 1);
        let p = ps.paths[0];
        assert_eq!(p.azimuth, 0.4);
        assert_eq!(p.elevation, 0.1);
        assert_eq!(p.delay, 2.0e-6);
    }

    #[test]
    fn sampling_is_deterministic() {
        let s = ScenarioConfig::desk();
        let a = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let b = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 12);
    }

    #[test]
    fn empty_layout_is_a_config_error() {
        let s = ScenarioConfig {
            cluster_layout: vec![],
            ..ScenarioConfig::desk()
        };
        let err = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap_err();
        assert!(matches!(err, Error::Config(_)));
    }

    #[test]
    fn mean_gain_power_matches_cluster_power() {
        let s = one_cluster(0.1, 0.2e-6, 0.0, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 10_000;
        let mean: f64 = (0..n)
            .map(|_| sample_paths(&s, 0, &mut rng).unwrap().paths[0].gain.norm_sqr())
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean |g|^2 = {mean}");
    }

    #[test]
    fn delays_stay_inside_tap_window() {
        let s = one_cluster(0.1, 20e-6, 0.0, 50);
        let ps = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(5)).unwrap();
        assert!(ps.paths.iter().all(|p| p.delay < s.max_delay()));
    }

    #[test]
    fn array_response_examples() {
        let a = array_response(0.0, 0.0, 4);
        assert!(a.iter().all(|v| *v == Complex64::new(1.0, 0.0)));
        let b = array_response(FRAC_PI_2, 0.0, 2);
        assert!((b[1] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        let c = array_response(0.3, 0.2, 8);
        for (n, v) in c.iter().enumerate() {
            let phase = PI * n as f64 * 0.2f64.cos() * 0.3f64.sin();
            assert!((v - Complex64::new(phase.cos(), phase.sin())).norm() < 1e-12);
            assert!((v.norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn integer_delay_hits_a_single_tap() {
        let s = ScenarioConfig::desk();
        let ps = PathSet {
            paths: vec![PathParams {
                gain: Complex64::new(1.0, 0.0),
                delay: 3.0 * s.sampling_period(),
                azimuth: 0.0,
                elevation: 0.0,
                tag: PathTag::Building,
            }],
        };
        let taps = delay_domain_channel(&ps, &s);
        for d in 0..s.n_taps {
            for n in 0..s.n_tx {
                let expect = if d == 3 { 1.0 } else { 0.0 };
                assert_eq!(taps[(d, n)], Complex64::new(expect, 0.0));
            }
        }
        let empty = delay_domain_channel(&PathSet::default(), &s);
        assert!(empty.iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn fractional_delays_match_direct_double_loop() {
        let s = ScenarioConfig::desk();
        let ts = s.sampling_period();
        let ps = PathSet {
            paths: vec![
                PathParams {
                    gain: Complex64::new(0.3, -0.7),
                    delay: 2.37 * ts,
                    azimuth: 0.2,
                    elevation: 0.1,
                    tag: PathTag::Building,
                },
                PathParams {
                    gain: Complex64::new(-1.1, 0.4),
                    delay: 5.81 * ts,
                    azimuth: -0.9,
                    elevation: -0.05,
                    tag: PathTag::Foliage,
                },
            ],
        };
        let taps = delay_domain_channel(&ps, &s);
        for d in 0..s.n_taps {
            for n in 0..s.n_tx {
                let mut acc = Complex64::new(0.0, 0.0);
                for p in &ps.paths {
                    let x = (d as f64 * ts - p.delay) / ts;
                    let pulse = (PI * x).sin() / (PI * x);
                    let phase = PI * n as f64 * p.elevation.cos() * p.azimuth.sin();
                    acc += p.gain * pulse * Complex64::from_polar(1.0, phase);
                }
                assert!((taps[(d, n)] - acc).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn flat_and_unit_delay_channels() {
        let mut taps = CMatrix::zeros(2, 3);
        taps[(0, 0)] = Complex64::new(1.0, 2.0);
        taps[(0, 2)] = Complex64::new(-0.5, 0.0);
        let f = freq_channel(&taps, 5);
        for k in 0..5 {
            for n in 0..3 {
                assert!((f[(n, k)] - taps[(0, n)]).norm() < 1e-14);
            }
        }
        let mut unit = CMatrix::zeros(2, 1);
        unit[(1, 0)] = Complex64::new(1.0, 0.0);
        let f = freq_channel(&unit, 4);
        for k in 0..4 {
            let expect = Complex64::from_polar(1.0, -2.0 * PI * k as f64 / 4.0);
            assert!((f[(0, k)] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn identity_perturbation_is_noop() {
        let s = ScenarioConfig::desk();
        let ps = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let out = apply_twin_perturbation(&ps, &TwinPerturbation::identity(), &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(out, ps);
    }

    #[test]
    fn dropping_foliage_can_empty_the_set() {
        let s = ScenarioConfig {
            cluster_layout: vec![ClusterSpec {
                tag: PathTag::Foliage,
                ..default_layout()[0].clone()
            }],
            ..ScenarioConfig::desk()
        };
        let ps = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let out = apply_twin_perturbation(&ps, &TwinPerturbation::foliage_removed(0), &mut ChaCha8Rng::seed_from_u64(2));
        assert!(out.is_empty());
        let zero = UserChannel::from_paths(&out, &s);
        assert_eq!(zero.freq.norm(), 0.0);
    }

    #[test]
    fn position_error_delay_spread_matches_std() {
        let base = PathParams {
            gain: Complex64::new(1.0, 0.0),
            delay: 1e-6,
            azimuth: 0.0,
            elevation: 0.0,
            tag: PathTag::Building,
        };
        let ps = PathSet {
            paths: vec![base; 10_000],
        };
        let pert = TwinPerturbation {
            drop_foliage: false,
            position_error_std: 5.0,
            rng_seed: 0,
        };
        let out = apply_twin_perturbation(&ps, &pert, &mut ChaCha8Rng::seed_from_u64(77));
        let shifts: Vec<f64> = out.paths.iter().map(|p| p.delay - base.delay).collect();
        let mean = shifts.iter().sum::<f64>() / shifts.len() as f64;
        let std = (shifts.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (shifts.len() - 1) as f64).sqrt();
        let target = 5.0 / SPEED_OF_LIGHT;
        assert!((std - target).abs() < 0.1 * target, "std {std:e} vs {target:e}");
        assert!(out.paths.iter().all(|p| p.gain == base.gain));
    }

    #[test]
    fn building_shift_moves_whole_building_clusters_only() {
        let s = ScenarioConfig::desk();
        let pert = TwinPerturbation {
            drop_foliage: false,
            position_error_std: 5.0,
            rng_seed: 3,
        };
        let shifted = pert.shifted_layout(&s);
        assert_eq!(shifted, pert.shifted_layout(&s));
        for (a, b) in s.cluster_layout.iter().zip(&shifted.cluster_layout) {
            match a.tag {
                PathTag::Foliage => assert_eq!(a, b),
                PathTag::Building => {
                    let dd = (b.mean_delay - a.mean_delay) * SPEED_OF_LIGHT;
                    assert!(dd != 0.0);
                    assert!((wrap_angle(b.mean_azimuth - a.mean_azimuth) - (dd / NOMINAL_SCATTERER_DISTANCE_M).atan()).abs() < 1e-9);
                    assert_eq!((a.angular_spread, a.delay_spread, a.mean_power_db), (b.angular_spread, b.delay_spread, b.mean_power_db));
                }
            }
        }
        assert_eq!(TwinPerturbation::foliage_removed(3).shifted_layout(&s), s);
    }

    #[test]
    fn building_shift_std_matches_position_error() {
        let s = ScenarioConfig::desk();
        let mut shifts = Vec::new();
        for seed in 0..5000 {
            let pert = TwinPerturbation {
                drop_foliage: false,
                position_error_std: 5.0,
                rng_seed: seed,
            };
            let t = pert.shifted_layout(&s);
            for (a, b) in s.cluster_layout.iter().zip(&t.cluster_layout).filter(|(a, _)| a.tag == PathTag::Building) {
                shifts.push((b.mean_delay - a.mean_delay) * SPEED_OF_LIGHT);
            }
        }
        let n = shifts.len() as f64;
        let mean = shifts.iter().sum::<f64>() / n;
        let std = (shifts.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((std - 5.0).abs() < 0.5, "std {std}");
    }

    #[test]
    fn twin_records_drop_foliage_and_keep_the_site_randomness() {
        let s = ScenarioConfig::desk();
        let pert = TwinPerturbation::foliage_removed(0);
        let site = generate_dataset(&s, 1, 3, None, Estimation::perfect()).unwrap();
        let twin = generate_dataset(&s, 1, 3, Some(&pert), Estimation::perfect()).unwrap();
        let mut rng = child_rng(s.rng_seed, 1);
        let mut paths = sample_paths(&s, 0, &mut rng).unwrap();
        paths.paths.retain(|p| p.tag != PathTag::Foliage);
        assert_eq!(twin.records[1].user_channels[0], UserChannel::from_paths(&paths, &s));
        assert_ne!(twin.records[1].user_channels[0], site.records[1].user_channels[0]);
        assert_ne!(twin.scenario_id, site.scenario_id);
    }

    #[test]
    fn estimation_noise_hits_requested_nmse() {
        let s = ScenarioConfig::desk();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut nmse = 0.0;
        let n = 1000;
        for _ in 0..n {
            let h = UserChannel::from_paths(&sample_paths(&s, 0, &mut rng).unwrap(), &s).freq;
            let e = estimate_channel(&h, -10.0, &mut rng);
            nmse += (&e - &h).norm_squared() / h.norm_squared();
        }
        let db = 10.0 * (nmse / n as f64).log10();
        assert!((-10.5..=-9.5).contains(&db), "empirical nmse {db} dB");
    }

    #[test]
    fn perfect_estimation_returns_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let h = CMatrix::from_fn(3, 4, |i, j| Complex64::new(i as f64, j as f64));
        assert_eq!(estimate_channel(&h, f64::NEG_INFINITY, &mut rng), h);
        let z = CMatrix::zeros(3, 4);
        assert_eq!(estimate_channel(&z, f64::NEG_INFINITY, &mut rng), z);
    }

    #[test]
    fn gain_scaling_is_linear() {
        let s = ScenarioConfig::desk();
        let ps = sample_paths(&s, 0, &mut ChaCha8Rng::seed_from_u64(8)).unwrap();
        let c = Complex64::new(0.3, -2.0);
        let scaled = PathSet {
            paths: ps.paths.iter().map(|p| PathParams { gain: p.gain * c, ..*p }).collect(),
        };
        let a = UserChannel::from_paths(&ps, &s).freq.norm();
        let b = UserChannel::from_paths(&scaled, &s).freq.norm();
        assert!((b - c.norm() * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn noise_power_follows_bandwidth() {
        let s = ScenarioConfig::full_scale();
        let dbm = 10.0 * (s.noise_power() * 1e3).log10();
        assert!((dbm - (-97.63)).abs() < 0.01, "{dbm}");
        assert!((s.tx_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dataset_shapes_and_determinism() {
        let s = ScenarioConfig::desk();
        let ds = generate_dataset(&s, 2, 1, None, Estimation::perfect()).unwrap();
        assert_eq!(ds.records.len(), 1);
        assert_eq!(ds.records[0].user_channels.len(), 2);
        for ch in &ds.records[0].user_channels {
            assert_eq!(ch.freq.shape(), (16, 48));
            assert_eq!(ch.taps.shape(), (16, 16));
        }
        let a = generate_dataset(&s, 2, 3, None, Estimation { nmse_db: -15.0, noise_seed: 3 }).unwrap();
        let b = generate_dataset(&s, 2, 3, None, Estimation { nmse_db: -15.0, noise_seed: 3 }).unwrap();
        assert_eq!(a, b);
        let twin = generate_dataset(&s, 2, 3, Some(&TwinPerturbation::identity()), Estimation { nmse_db: -15.0, noise_seed: 3 }).unwrap();
        assert_eq!(a.records, twin.records);
    }

    #[test]
    fn stored_frequency_response_matches_taps() {
        let s = ScenarioConfig::desk();
        let ds = generate_dataset(&s, 2, 4, None, Estimation::perfect()).unwrap();
        for r in &ds.records {
            for ch in &r.user_channels {
                let again = freq_channel(&ch.taps, s.n_subcarriers);
                assert!((&again - &ch.freq).norm() <= 1e-10 * ch.freq.norm());
            }
        }
    }
}
