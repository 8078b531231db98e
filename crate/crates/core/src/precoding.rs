//! Zero-forcing precoding and achievable-rate metrics.

use std::borrow::Borrow;

use log::warn;
use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::CMatrix;

/// Tikhonov loading relative to the mean Gram diagonal.
pub const ZF_REGULARIZATION: f64 = 1e-12;
/// A user whose channel keeps less than this fraction of its energy after
/// projecting out earlier users is treated as linearly dependent.
pub const ZF_DEPENDENCE_TOL: f64 = 1e-10;

/// One `Nt x U` precoding matrix per subcarrier.
#[derive(Clone, Debug, PartialEq)]
pub struct PrecoderSet {
    pub per_subcarrier: Vec<CMatrix>,
    pub power: f64,
}

impl PrecoderSet {
    pub fn n_subcarriers(&self) -> usize {
        self.per_subcarrier.len()
    }

    /// `Tr(F_k F_k^H)` for every subcarrier.
    pub fn powers(&self) -> Vec<f64> {
        self.per_subcarrier.iter().map(|f| f.norm_squared()).collect()
    }
}

/// Stack column `k` of every user's channel into an `Nt x U` matrix.
pub fn stack_subcarrier<M: Borrow<CMatrix>>(channels: &[M], k: usize) -> CMatrix {
    let n_tx = channels[0].borrow().nrows();
    CMatrix::from_fn(n_tx, channels.len(), |n, u| channels[u].borrow()[(n, k)])
}

/// Zero-forcing for a single subcarrier with equal per-user power.
///
/// Returns the precoder and whether any user had to be dropped as linearly
/// dependent on earlier users (its column is zero).
pub fn zero_forcing_subcarrier(hk: &CMatrix, power: f64) -> (CMatrix, bool) {
    let (n_tx, n_users) = hk.shape();
    let mut active = Vec::with_capacity(n_users);
    let mut basis: Vec<nalgebra::DVector<Complex64>> = Vec::new();
    for u in 0..n_users {
        let h = hk.column(u).into_owned();
        let energy = h.norm_squared();
        let mut r = h.clone();
        for q in &basis {
            let c = q.dotc(&r);
            r -= q * c;
        }
        let residual = r.norm_squared();
        if energy > 0.0 && residual > ZF_DEPENDENCE_TOL * energy {
            basis.push(r / Complex64::new(residual.sqrt(), 0.0));
            active.push(u);
        }
    }
    let dropped = active.len() < n_users;
    let mut f = CMatrix::zeros(n_tx, n_users);
    if active.is_empty() {
        return (f, dropped);
    }
    let ha = hk.select_columns(&active);
    let mut gram = ha.adjoint() * &ha;
    let load = ZF_REGULARIZATION * gram.trace().re / active.len() as f64;
    for i in 0..active.len() {
        gram[(i, i)] += load;
    }
    let inv = gram
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| gram.try_inverse())
        .unwrap_or_else(|| DMatrix::identity(active.len(), active.len()));
    let fa = ha * inv;
    let per_user = (power / active.len() as f64).sqrt();
    for (j, &u) in active.iter().enumerate() {
        let col = fa.column(j);
        let norm = col.norm();
        if norm > 0.0 {
            f.set_column(u, &(col * Complex64::new(per_user / norm, 0.0)));
        }
    }
    (f, dropped)
}

/// Zero-forcing on every subcarrier; `channels` holds one `Nt x K` matrix per user.
pub fn zero_forcing<M: Borrow<CMatrix>>(channels: &[M], power: f64) -> PrecoderSet {
    let k = channels[0].borrow().ncols();
    let mut dropped = 0;
    let per_subcarrier = (0..k)
        .map(|kk| {
            let (f, d) = zero_forcing_subcarrier(&stack_subcarrier(channels, kk), power);
            dropped += usize::from(d);
            f
        })
        .collect();
    if dropped > 0 {
        log::debug!("zero forcing dropped dependent users on {dropped} of {k} subcarriers");
    }
    PrecoderSet {
        per_subcarrier,
        power,
    }
}

/// Downlink sum rate in bit/s/Hz averaged over subcarriers.
pub fn sum_rate<M: Borrow<CMatrix>>(channels: &[M], precoders: &PrecoderSet, noise_power: f64) -> f64 {
    assert!(noise_power > 0.0, "noise power must be positive");
    let k = precoders.n_subcarriers();
    let mut total = 0.0;
    for (kk, f) in precoders.per_subcarrier.iter().enumerate() {
        let hk = stack_subcarrier(channels, kk);
        // g[(u, v)] = h_u^H f_v
        let g = hk.adjoint() * f;
        for u in 0..channels.len() {
            let signal = g[(u, u)].norm_sqr();
            let interference: f64 = (0..f.ncols()).filter(|&v| v != u).map(|v| g[(u, v)].norm_sqr()).sum();
            total += (1.0 + signal / (interference + noise_power)).log2();
        }
    }
    total / k as f64
}

/// `(1/K) sum_k log2(1 + |h_k^H w_k|^2 / noise)` with `w` used as given.
pub fn single_user_rate(h: &CMatrix, w: &CMatrix, noise_power: f64) -> f64 {
    assert!(noise_power > 0.0, "noise power must be positive");
    let k = h.ncols();
    (0..k)
        .map(|kk| {
            let g = h.column(kk).dotc(&w.column(kk));
            (1.0 + g.norm_sqr() / noise_power).log2()
        })
        .sum::<f64>()
        / k as f64
}

/// Scale every column of `w` to norm `sqrt(power)`; zero columns stay zero.
pub fn power_normalize_columns(w: &CMatrix, power: f64) -> CMatrix {
    let mut out = w.clone();
    for mut col in out.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col *= Complex64::new(power.sqrt() / n, 0.0);
        }
    }
    out
}

/// Single-user rate of refined CSI under the shared power budget.
pub fn budgeted_single_user_rate(h: &CMatrix, w: &CMatrix, power: f64, noise_power: f64) -> f64 {
    single_user_rate(h, &power_normalize_columns(w, power), noise_power)
}

/// Zero-forcing on the true channels: the genie-aided ceiling.
pub fn genie_zf_rate<M: Borrow<CMatrix>>(channels: &[M], power: f64, noise_power: f64) -> f64 {
    sum_rate(channels, &zero_forcing(channels, power), noise_power)
}

/// Scale each `F_k` to `Tr(F_k F_k^H) = power`; all-zero matrices stay zero.
pub fn normalize_total_power(per_subcarrier: Vec<CMatrix>, power: f64) -> PrecoderSet {
    let mut zero = 0;
    let per_subcarrier = per_subcarrier
        .into_iter()
        .map(|f| {
            let t = f.norm_squared();
            if t > 0.0 {
                f * Complex64::new((power / t).sqrt(), 0.0)
            } else {
                zero += 1;
                f
            }
        })
        .collect();
    if zero > 0 {
        warn!("{zero} all-zero precoders left unscaled");
    }
    PrecoderSet {
        per_subcarrier,
        power,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn randc(rng: &mut impl Rng) -> Complex64 {
        Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    }

    fn random_channels(rng: &mut impl Rng, u: usize, n_tx: usize, k: usize) -> Vec<CMatrix> {
        (0..u).map(|_| CMatrix::from_fn(n_tx, k, |_, _| randc(rng))).collect()
    }

    #[test]
    fn single_user_zf_is_matched_filter() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let h = random_channels(&mut rng, 1, 6, 3);
        let f = zero_forcing(&h, 2.0);
        for k in 0..3 {
            let hk = h[0].column(k);
            let expect = hk * Complex64::new(2f64.sqrt() / hk.norm(), 0.0);
            assert!((f.per_subcarrier[k].column(0) - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn orthogonal_users_are_nulled() {
        let mut h0 = CMatrix::zeros(4, 1);
        let mut h1 = CMatrix::zeros(4, 1);
        h0[(0, 0)] = Complex64::new(1.0, 1.0);
        h1[(2, 0)] = Complex64::new(0.0, -2.0);
        let p: f64 = 3.0;
        let f = zero_forcing(&[h0.clone(), h1.clone()], p);
        let fk = &f.per_subcarrier[0];
        assert!(h0.column(0).dotc(&fk.column(1)).norm() < 1e-9 * p.sqrt());
        assert!(h1.column(0).dotc(&fk.column(0)).norm() < 1e-9 * p.sqrt());
        // equal power per user, so the genie rate is the sum of matched-filter rates at P/U
        let sigma = 0.1;
        let expect = (1.0 + p / 2.0 * 2.0 / sigma).log2() + (1.0 + p / 2.0 * 4.0 / sigma).log2();
        assert!((genie_zf_rate(&[h0, h1], p, sigma) - expect).abs() < 1e-12);
    }

    #[test]
    fn random_instances_null_interference_and_meet_power() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let h = random_channels(&mut rng, 2, 4, 2);
            let f = zero_forcing(&h, 1.5);
            for (k, fk) in f.per_subcarrier.iter().enumerate() {
                assert!((fk.norm_squared() - 1.5).abs() <= 1e-9 * 1.5);
                // oracle: pseudo-inverse direction
                let hk = stack_subcarrier(&h, k);
                let pinv = &hk * (hk.adjoint() * &hk).try_inverse().unwrap();
                for u in 0..2 {
                    let a = pinv.column(u).normalize();
                    let b = fk.column(u).normalize();
                    assert!((a.dotc(&b).norm() - 1.0).abs() < 1e-9);
                    for v in 0..2 {
                        if u != v {
                            let leak = hk.column(u).dotc(&fk.column(v)).norm();
                            let own = hk.column(u).dotc(&fk.column(u)).norm();
                            assert!(leak <= 1e-8 * own);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn dependent_user_gets_zero_column() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h0 = random_channels(&mut rng, 1, 4, 1).remove(0);
        let h1 = &h0 * Complex64::new(0.0, 2.0);
        let (f, dropped) = zero_forcing_subcarrier(&stack_subcarrier(&[h0.clone(), h1], 0), 1.0);
        assert!(dropped);
        assert_eq!(f.column(1).norm(), 0.0);
        assert!((f.norm_squared() - 1.0).abs() < 1e-12);
        let (z, dropped) = zero_forcing_subcarrier(&CMatrix::zeros(4, 2), 1.0);
        assert!(dropped);
        assert_eq!(z.norm(), 0.0);
    }

    #[test]
    fn scalar_sum_rate() {
        let h = CMatrix::from_element(1, 1, Complex64::new(1.0, 0.0));
        let p: f64 = 5.0;
        let f = PrecoderSet {
            per_subcarrier: vec![CMatrix::from_element(1, 1, Complex64::new(p.sqrt(), 0.0))],
            power: p,
        };
        assert!((sum_rate(&[h.clone()], &f, 1.0) - (1.0 + p).log2()).abs() < 1e-15);
        let z = PrecoderSet {
            per_subcarrier: vec![CMatrix::zeros(1, 1)],
            power: p,
        };
        assert_eq!(sum_rate(&[h], &z, 1.0), 0.0);
    }

    fn naive_sum_rate(h: &[CMatrix], f: &[CMatrix], sigma: f64) -> f64 {
        let (n_tx, k) = h[0].shape();
        let u = h.len();
        let mut total = 0.0;
        for kk in 0..k {
            for uu in 0..u {
                let mut gains = vec![0.0; u];
                for (v, g) in gains.iter_mut().enumerate() {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for n in 0..n_tx {
                        acc += h[uu][(n, kk)].conj() * f[kk][(n, v)];
                    }
                    *g = acc.norm_sqr();
                }
                let interf: f64 = (0..u).filter(|&v| v != uu).map(|v| gains[v]).sum();
                total += (1.0 + gains[uu] / (interf + sigma)).log2();
            }
        }
        total / k as f64
    }

    #[test]
    fn sum_rate_matches_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..20 {
            let h = random_channels(&mut rng, 3, 5, 4);
            let f: Vec<CMatrix> = (0..4).map(|_| CMatrix::from_fn(5, 3, |_, _| randc(&mut rng))).collect();
            let set = PrecoderSet {
                per_subcarrier: f.clone(),
                power: 1.0,
            };
            assert!((sum_rate(&h, &set, 0.3) - naive_sum_rate(&h, &f, 0.3)).abs() < 1e-12);
        }
    }

    #[test]
    fn sum_rate_is_phase_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let h = random_channels(&mut rng, 2, 4, 3);
        let f = zero_forcing(&h, 1.0);
        let base = sum_rate(&h, &f, 0.1);
        let rot = Complex64::from_polar(1.0, 1.234);
        let mut h2 = h.clone();
        h2[1] *= rot;
        let mut f2 = f.clone();
        for fk in &mut f2.per_subcarrier {
            let c = fk.column(1) * rot;
            fk.set_column(1, &c);
        }
        assert!((sum_rate(&h2, &f2, 0.1) - base).abs() < 1e-12);
        assert!(base >= 0.0);
    }

    #[test]
    fn single_user_rate_examples() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let h = random_channels(&mut rng, 1, 4, 5).remove(0);
        let p: f64 = 2.5;
        let sigma = 0.2;
        let w = power_normalize_columns(&h, p);
        let mf: f64 = (0..5).map(|k| (1.0 + p * h.column(k).norm_squared() / sigma).log2()).sum::<f64>() / 5.0;
        assert!((single_user_rate(&h, &w, sigma) - mf).abs() < 1e-12);
        assert_eq!(single_user_rate(&h, &CMatrix::zeros(4, 5), sigma), 0.0);
        let w = CMatrix::from_fn(4, 5, |_, _| randc(&mut rng));
        let naive: f64 = (0..5)
            .map(|k| {
                let mut acc = Complex64::new(0.0, 0.0);
                for n in 0..4 {
                    acc += h[(n, k)].conj() * w[(n, k)];
                }
                (1.0 + acc.norm_sqr() / sigma).log2()
            })
            .sum::<f64>()
            / 5.0;
        assert!((single_user_rate(&h, &w, sigma) - naive).abs() < 1e-12);
        let h1 = random_channels(&mut rng, 1, 4, 5);
        assert!((genie_zf_rate(&h1, p, sigma) - budgeted_single_user_rate(&h1[0], &h1[0], p, sigma)).abs() < 1e-12);
    }

    #[test]
    #[should_panic(expected = "noise power")]
    fn non_positive_noise_is_rejected() {
        let h = CMatrix::zeros(1, 1);
        single_user_rate(&h, &h, 0.0);
    }
}
