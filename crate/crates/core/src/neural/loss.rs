//! Training objectives and their gradients with respect to the network output.
//!
//! Outputs are `(2U, Nt, K)` tensors: channel `2u` / `2u + 1` hold the real /
//! imaginary part of user `u`'s column on every subcarrier. Gradients are
//! returned in the same layout as `(dL/dRe, dL/dIm)`. Every function scores one
//! sample; batch losses are the mean of these values.

use std::f64::consts::LN_2;

use num_complex::Complex64;

use super::tensor::Tensor;
use crate::channel::CMatrix;

/// A loss value with its gradient and the number of subcarrier columns that
/// fell back to zero (zero output or zero-norm target).
#[derive(Clone, Debug, PartialEq)]
pub struct LossGrad {
    pub value: f64,
    pub grad: Tensor,
    pub degenerate: usize,
}

fn column(out: &Tensor, u: usize, k: usize) -> Vec<Complex64> {
    (0..out.height)
        .map(|n| Complex64::new(out.at(2 * u, n, k), out.at(2 * u + 1, n, k)))
        .collect()
}

fn put_column(grad: &mut Tensor, u: usize, k: usize, g: &[Complex64]) {
    for (n, v) in g.iter().enumerate() {
        *grad.at_mut(2 * u, n, k) = v.re;
        *grad.at_mut(2 * u + 1, n, k) = v.im;
    }
}

fn check_shape(out: &Tensor, users: usize, h: &CMatrix) {
    assert_eq!(out.channels, 2 * users, "output must have two channels per user");
    assert_eq!((out.height, out.width), h.shape(), "output and channel shapes differ");
}

/// `h^H w`
fn inner(h: &CMatrix, k: usize, w: &[Complex64]) -> Complex64 {
    h.column(k).iter().zip(w).map(|(a, b)| a.conj() * b).sum()
}

/// Negative single-user rate with every column mapped to `sqrt(P) w / |w|`.
pub fn loss_ts_rate(out: &Tensor, h: &CMatrix, power: f64, noise_power: f64) -> LossGrad {
    check_shape(out, 1, h);
    let k_total = out.width;
    let snr = power / noise_power;
    let mut grad = Tensor::zeros(out.channels, out.height, out.width);
    let mut rate = 0.0;
    let mut degenerate = 0;
    for k in 0..k_total {
        let w = column(out, 0, k);
        let n: f64 = w.iter().map(|v| v.norm_sqr()).sum();
        if n == 0.0 {
            degenerate += 1;
            continue;
        }
        let a = inner(h, k, &w);
        let s = snr * a.norm_sqr() / n;
        rate += (1.0 + s).log2();
        let scale = -2.0 / (k_total as f64 * LN_2) / (1.0 + s) * snr;
        let g: Vec<Complex64> = h
            .column(k)
            .iter()
            .zip(&w)
            .map(|(hn, wn)| (a * hn / n - wn * (a.norm_sqr() / (n * n))) * scale)
            .collect();
        put_column(&mut grad, 0, k, &g);
    }
    LossGrad {
        value: -rate / k_total as f64,
        grad,
        degenerate,
    }
}

/// Squared Frobenius distance to the unit-norm true channel `h_k / |h_k|`.
///
/// Zero-norm true columns are left out of both the value and the gradient.
pub fn loss_ts_recon(out: &Tensor, h: &CMatrix) -> LossGrad {
    check_shape(out, 1, h);
    let mut grad = Tensor::zeros(out.channels, out.height, out.width);
    let mut value = 0.0;
    let mut degenerate = 0;
    for k in 0..out.width {
        let norm = h.column(k).norm();
        if norm == 0.0 {
            degenerate += 1;
            continue;
        }
        let w = column(out, 0, k);
        let g: Vec<Complex64> = h
            .column(k)
            .iter()
            .zip(&w)
            .map(|(hn, wn)| {
                let d = wn - hn / norm;
                value += d.norm_sqr();
                d * 2.0
            })
            .collect();
        put_column(&mut grad, 0, k, &g);
    }
    LossGrad { value, grad, degenerate }
}

/// Precoders read from an end-to-end output: `F_k[:, u]` is user `u`'s column `k`,
/// scaled so that `Tr(F_k F_k^H) = P`. All-zero `F_k` stay zero.
pub fn output_to_precoders(out: &Tensor, power: f64) -> Vec<CMatrix> {
    let users = out.channels / 2;
    (0..out.width)
        .map(|k| {
            let f = CMatrix::from_fn(out.height, users, |n, u| Complex64::new(out.at(2 * u, n, k), out.at(2 * u + 1, n, k)));
            let t = f.norm_squared();
            if t > 0.0 {
                f * Complex64::new((power / t).sqrt(), 0.0)
            } else {
                f
            }
        })
        .collect()
}

/// Negative multi-user sum rate of the power-normalized end-to-end precoders.
pub fn loss_e2e(out: &Tensor, channels: &[&CMatrix], power: f64, noise_power: f64) -> LossGrad {
    let users = channels.len();
    check_shape(out, users, channels[0]);
    let k_total = out.width;
    let n_tx = out.height;
    let mut grad = Tensor::zeros(out.channels, out.height, out.width);
    let mut rate = 0.0;
    let mut degenerate = 0;
    let coef = 2.0 / (k_total as f64 * LN_2);
    for k in 0..k_total {
        let f: Vec<Vec<Complex64>> = (0..users).map(|v| column(out, v, k)).collect();
        let t: f64 = f.iter().flatten().map(|x| x.norm_sqr()).sum();
        if t == 0.0 {
            degenerate += 1;
            continue;
        }
        let c = (power / t).sqrt();
        let g: Vec<Vec<Complex64>> = f.iter().map(|col| col.iter().map(|x| x * c).collect()).collect();
        // b[u][v] = h_u^H g_v
        let b: Vec<Vec<Complex64>> = channels
            .iter()
            .map(|h| g.iter().map(|gv| inner(h, k, gv)).collect())
            .collect();
        // Gradient of the rate with respect to g, in (dRe, dIm) form.
        let mut gamma = vec![vec![Complex64::new(0.0, 0.0); n_tx]; users];
        for (u, h) in channels.iter().enumerate() {
            let total: f64 = b[u].iter().map(|x| x.norm_sqr()).sum::<f64>() + noise_power;
            let interference = total - b[u][u].norm_sqr();
            rate += (total / interference).log2();
            for v in 0..users {
                let mut w = 1.0 / total;
                if v != u {
                    w -= 1.0 / interference;
                }
                let s = b[u][v] * (coef * w);
                for (gm, hn) in gamma[v].iter_mut().zip(h.column(k).iter()) {
                    *gm += s * hn;
                }
            }
        }
        // Chain through g = sqrt(P) f / |f|, then negate for the loss.
        let proj: f64 = g
            .iter()
            .flatten()
            .zip(gamma.iter().flatten())
            .map(|(a, b)| (a.conj() * b).re)
            .sum::<f64>()
            / power;
        for v in 0..users {
            let col: Vec<Complex64> = gamma[v]
                .iter()
                .zip(&g[v])
                .map(|(gm, gv)| -(gm - gv * proj) * c)
                .collect();
            put_column(&mut grad, v, k, &col);
        }
    }
    LossGrad {
        value: -rate / k_total as f64,
        grad,
        degenerate,
    }
}
