//! Layer kernels over a shared flat parameter vector.
//!
//! Every layer only stores where its weights live; the values are passed in
//! as `&[f64]` and gradients accumulate into a slice of the same length.

use rand::Rng;

use super::tensor::Tensor;

pub const LEAKY_SLOPE: f64 = 0.2;
pub const KERNEL: usize = 3;
const TAPS: usize = KERNEL * KERNEL;

/// `c = a * b + beta * c` on strided row-major views; `c` is `m x n` contiguous.
#[allow(clippy::too_many_arguments)]
fn gemm(
    m: usize,
    k: usize,
    n: usize,
    a: &[f64],
    rsa: usize,
    csa: usize,
    b: &[f64],
    rsb: usize,
    csb: usize,
    beta: f64,
    c: &mut [f64],
) {
    assert!(m == 0 || k == 0 || a.len() > (m - 1) * rsa + (k - 1) * csa);
    assert!(k == 0 || n == 0 || b.len() > (k - 1) * rsb + (n - 1) * csb);
    assert_eq!(c.len(), m * n);
    if m <= SMALL_M && csb == 1 && m * k * n > 0 {
        // Few output rows: accumulate whole rows of `b`, which streams far
        // better than a packed kernel built for wide outputs.
        if beta == 0.0 {
            c.fill(0.0);
        } else if beta != 1.0 {
            c.iter_mut().for_each(|v| *v *= beta);
        }
        for p in 0..k {
            let brow = &b[p * rsb..p * rsb + n];
            for i in 0..m {
                let s = a[i * rsa + p * csa];
                if s != 0.0 {
                    for (cv, bv) in c[i * n..(i + 1) * n].iter_mut().zip(brow) {
                        *cv += s * bv;
                    }
                }
            }
        }
        return;
    }
    if m <= SMALL_M && rsb == 1 && csa == 1 && m * k * n > 0 {
        for i in 0..m {
            let arow = &a[i * rsa..i * rsa + k];
            for j in 0..n {
                let d = dot(arow, &b[j * csb..j * csb + k]);
                let cv = &mut c[i * n + j];
                *cv = if beta == 0.0 { d } else { beta * *cv + d };
            }
        }
        return;
    }
    // SAFETY: the asserts above keep every strided access inside the slices.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            1.0,
            a.as_ptr(),
            rsa as isize,
            csa as isize,
            b.as_ptr(),
            rsb as isize,
            csb as isize,
            beta,
            c.as_mut_ptr(),
            n as isize,
            1,
        );
    }
}

const SMALL_M: usize = 4;

/// Dot product with independent partial sums so the loop vectorizes.
fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut acc = [0.0; 8];
    let ca = a.chunks_exact(8);
    let cb = b.chunks_exact(8);
    let tail: f64 = ca.remainder().iter().zip(cb.remainder()).map(|(x, y)| x * y).sum();
    for (x, y) in ca.zip(cb) {
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    acc.iter().sum::<f64>() + tail
}

/// Output columns `lo..hi` whose input column `ox * stride + kx - 1` is in bounds.
fn valid_range(kx: usize, stride: usize, w: usize, wo: usize) -> (usize, usize) {
    let lo = if kx == 0 { 1 } else { 0 };
    let hi = if w + 1 > kx { ((w + 1 - kx - 1) / stride + 1).min(wo) } else { 0 };
    (lo.min(hi), hi)
}

/// Uniform Glorot bound `sqrt(6 / (fan_in + fan_out))`.
pub fn glorot_bound(fan_in: usize, fan_out: usize) -> f64 {
    (6.0 / (fan_in + fan_out) as f64).sqrt()
}

pub fn fill_uniform(dst: &mut [f64], bound: f64, rng: &mut impl Rng) {
    for v in dst {
        *v = rng.random_range(-bound..=bound);
    }
}

/// 3x3 convolution with zero "same" padding.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Conv2d {
    pub in_ch: usize,
    pub out_ch: usize,
    pub stride: usize,
    /// Start of the `out_ch x in_ch x 3 x 3` weights; biases follow.
    pub offset: usize,
}

impl Conv2d {
    pub fn new(in_ch: usize, out_ch: usize, stride: usize, offset: usize) -> Self {
        Self {
            in_ch,
            out_ch,
            stride,
            offset,
        }
    }

    pub fn n_weights(&self) -> usize {
        self.out_ch * self.in_ch * TAPS
    }

    pub fn n_params(&self) -> usize {
        self.n_weights() + self.out_ch
    }

    pub fn end(&self) -> usize {
        self.offset + self.n_params()
    }

    pub fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.n_weights()]
    }

    pub fn bias<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset + self.n_weights()..self.end()]
    }

    pub fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        ((h - 1) / self.stride + 1, (w - 1) / self.stride + 1)
    }

    pub fn init_glorot(&self, params: &mut [f64], rng: &mut impl Rng) {
        let bound = glorot_bound(self.in_ch * TAPS, self.out_ch * TAPS);
        fill_uniform(&mut params[self.offset..self.offset + self.n_weights()], bound, rng);
        params[self.offset + self.n_weights()..self.end()].fill(0.0);
    }

    /// Narrow stride-1 layers convolve shifted rows directly instead of
    /// building a patch matrix that would dwarf the actual work.
    pub fn is_direct(&self) -> bool {
        self.stride == 1 && self.out_ch <= SMALL_M
    }

    /// Unfold `x` into a `(in_ch * 9) x (ho * wo)` patch matrix.
    fn im2col(&self, x: &Tensor, ho: usize, wo: usize, col: &mut Vec<f64>) {
        let p = ho * wo;
        col.clear();
        col.resize(self.in_ch * TAPS * p, 0.0);
        let (h, w, s) = (x.height, x.width, self.stride);
        for c in 0..self.in_ch {
            let src = x.channel(c);
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let (lo, hi) = valid_range(kx, s, w, wo);
                    let row = &mut col[((c * TAPS) + ky * KERNEL + kx) * p..][..p];
                    for oy in 0..ho {
                        let iy = oy * s + ky;
                        if iy == 0 || iy > h {
                            continue;
                        }
                        let line = &src[(iy - 1) * w..][..w];
                        let dst = &mut row[oy * wo..(oy + 1) * wo];
                        if s == 1 {
                            dst[lo..hi].copy_from_slice(&line[lo + kx - 1..hi + kx - 1]);
                        } else {
                            for ox in lo..hi {
                                dst[ox] = line[ox * s + kx - 1];
                            }
                        }
                    }
                }
            }
        }
    }

    fn col2im(&self, dcol: &[f64], ho: usize, wo: usize, dx: &mut Tensor) {
        let p = ho * wo;
        let (h, w, s) = (dx.height, dx.width, self.stride);
        for c in 0..self.in_ch {
            let dst = dx.channel_mut(c);
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let (lo, hi) = valid_range(kx, s, w, wo);
                    let row = &dcol[((c * TAPS) + ky * KERNEL + kx) * p..][..p];
                    for oy in 0..ho {
                        let iy = oy * s + ky;
                        if iy == 0 || iy > h {
                            continue;
                        }
                        let line = &mut dst[(iy - 1) * w..][..w];
                        let g = &row[oy * wo..(oy + 1) * wo];
                        if s == 1 {
                            for (d, v) in line[lo + kx - 1..hi + kx - 1].iter_mut().zip(&g[lo..hi]) {
                                *d += v;
                            }
                        } else {
                            for ox in lo..hi {
                                line[ox * s + kx - 1] += g[ox];
                            }
                        }
                    }
                }
            }
        }
    }

    /// Visit every in-bounds `(weight index, input row, output row, lo, hi)`
    /// of a stride-1 convolution; row slices are `[lo + kx - 1, hi + kx - 1)`
    /// in the input and `[lo, hi)` in the output.
    fn for_each_shift(&self, h: usize, w: usize, mut f: impl FnMut(usize, usize, usize, usize, usize, usize)) {
        for c in 0..self.in_ch {
            for ky in 0..KERNEL {
                for kx in 0..KERNEL {
                    let (lo, hi) = valid_range(kx, 1, w, w);
                    if lo >= hi {
                        continue;
                    }
                    for oy in 0..h {
                        let iy = oy + ky;
                        if iy == 0 || iy > h {
                            continue;
                        }
                        f(c, (c * KERNEL + ky) * KERNEL + kx, (iy - 1) * w + kx, oy * w, lo, hi);
                    }
                }
            }
        }
    }

    /// Forward pass writing into reusable buffers; `col` receives what
    /// [`Conv2d::backward_into`] needs (empty for direct layers).
    pub fn forward_into(&self, params: &[f64], x: &Tensor, col: &mut Vec<f64>, y: &mut Tensor) {
        assert_eq!(x.channels, self.in_ch, "conv input channel mismatch");
        let (ho, wo) = self.out_dims(x.height, x.width);
        let p = ho * wo;
        y.reset(self.out_ch, ho, wo);
        for (o, b) in self.bias(params).iter().enumerate() {
            y.channel_mut(o).fill(*b);
        }
        let wts = self.weights(params);
        let kdim = self.in_ch * TAPS;
        if self.is_direct() {
            col.clear();
            let (h, w) = (x.height, x.width);
            self.for_each_shift(h, w, |c, tap, src, dst, lo, hi| {
                let xr = &x.channel(c)[src + lo - 1..src + hi - 1];
                for o in 0..self.out_ch {
                    let s = wts[o * kdim + tap];
                    let yr = &mut y.data[o * p + dst + lo..o * p + dst + hi];
                    for (a, b) in yr.iter_mut().zip(xr) {
                        *a += s * b;
                    }
                }
            });
            return;
        }
        self.im2col(x, ho, wo, col);
        gemm(self.out_ch, kdim, p, wts, kdim, 1, col, p, 1, 1.0, &mut y.data);
    }

    /// Accumulate weight and bias gradients into `grads` and write the input
    /// gradient into `dx`; `scratch` is reused between calls.
    #[allow(clippy::too_many_arguments)]
    pub fn backward_into(
        &self,
        params: &[f64],
        x: &Tensor,
        col: &[f64],
        dy: &Tensor,
        grads: &mut [f64],
        scratch: &mut Vec<f64>,
        dx: &mut Tensor,
    ) {
        let p = dy.plane();
        let kdim = self.in_ch * TAPS;
        let nw = self.n_weights();
        for o in 0..self.out_ch {
            grads[self.offset + nw + o] += dy.channel(o).iter().sum::<f64>();
        }
        dx.reset(self.in_ch, x.height, x.width);
        let wts = self.weights(params);
        if self.is_direct() {
            let gw = &mut grads[self.offset..self.offset + nw];
            self.for_each_shift(x.height, x.width, |c, tap, src, dst, lo, hi| {
                let xr = &x.channel(c)[src + lo - 1..src + hi - 1];
                let plane = dx.plane();
                for o in 0..self.out_ch {
                    let g = &dy.data[o * p + dst + lo..o * p + dst + hi];
                    gw[o * kdim + tap] += dot(g, xr);
                    let s = wts[o * kdim + tap];
                    let dr = &mut dx.data[c * plane + src + lo - 1..c * plane + src + hi - 1];
                    for (d, v) in dr.iter_mut().zip(g) {
                        *d += s * v;
                    }
                }
            });
            return;
        }
        {
            let gw = &mut grads[self.offset..self.offset + nw];
            // dW += dy * col^T
            gemm(self.out_ch, p, kdim, &dy.data, p, 1, col, 1, p, 1.0, gw);
        }
        // dcol = W^T * dy
        scratch.clear();
        scratch.resize(kdim * p, 0.0);
        gemm(kdim, self.out_ch, p, wts, 1, kdim, &dy.data, p, 1, 0.0, scratch);
        self.col2im(scratch, dy.height, dy.width, dx);
    }

    /// Output and the patch matrix needed by [`Conv2d::backward`].
    pub fn forward(&self, params: &[f64], x: &Tensor) -> (Tensor, Vec<f64>) {
        let mut col = Vec::new();
        let mut y = Tensor::default();
        self.forward_into(params, x, &mut col, &mut y);
        (y, col)
    }

    /// Accumulate weight and bias gradients into `grads`, return the input gradient.
    pub fn backward(&self, params: &[f64], x: &Tensor, col: &[f64], dy: &Tensor, grads: &mut [f64]) -> Tensor {
        let mut dx = Tensor::default();
        self.backward_into(params, x, col, dy, grads, &mut Vec::new(), &mut dx);
        dx
    }
}

/// Fully connected layer `y = W x + b` with `W` stored `n_out x n_in`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Dense {
    pub n_in: usize,
    pub n_out: usize,
    pub offset: usize,
}

impl Dense {
    pub fn new(n_in: usize, n_out: usize, offset: usize) -> Self {
        Self { n_in, n_out, offset }
    }

    pub fn n_params(&self) -> usize {
        self.n_in * self.n_out + self.n_out
    }

    pub fn end(&self) -> usize {
        self.offset + self.n_params()
    }

    fn weights<'a>(&self, params: &'a [f64]) -> &'a [f64] {
        &params[self.offset..self.offset + self.n_in * self.n_out]
    }

    pub fn init_glorot(&self, params: &mut [f64], rng: &mut impl Rng) {
        let nw = self.n_in * self.n_out;
        fill_uniform(&mut params[self.offset..self.offset + nw], glorot_bound(self.n_in, self.n_out), rng);
        params[self.offset + nw..self.end()].fill(0.0);
    }

    pub fn forward(&self, params: &[f64], x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n_in, "dense input length mismatch");
        let mut y = params[self.offset + self.n_in * self.n_out..self.end()].to_vec();
        gemm(self.n_out, self.n_in, 1, self.weights(params), self.n_in, 1, x, 1, 1, 1.0, &mut y);
        y
    }

    pub fn backward(&self, params: &[f64], x: &[f64], dy: &[f64], grads: &mut [f64]) -> Vec<f64> {
        let nw = self.n_in * self.n_out;
        {
            let gw = &mut grads[self.offset..self.offset + nw];
            gemm(self.n_out, 1, self.n_in, dy, 1, 1, x, self.n_in, 1, 1.0, gw);
        }
        for (g, d) in grads[self.offset + nw..self.end()].iter_mut().zip(dy) {
            *g += d;
        }
        let mut dx = vec![0.0; self.n_in];
        gemm(self.n_in, self.n_out, 1, self.weights(params), 1, self.n_in, dy, 1, 1, 0.0, &mut dx);
        dx
    }
}

pub fn leaky_relu_inplace(x: &mut [f64]) {
    for v in x {
        if *v < 0.0 {
            *v *= LEAKY_SLOPE;
        }
    }
}

/// Multiply `dy` by the derivative, given the activation output.
pub fn leaky_relu_backward(out: &[f64], dy: &mut [f64]) {
    for (g, o) in dy.iter_mut().zip(out) {
        if *o < 0.0 {
            *g *= LEAKY_SLOPE;
        }
    }
}

pub fn tanh_inplace(x: &mut [f64]) {
    for v in x {
        *v = v.tanh();
    }
}

pub fn tanh_backward(out: &[f64], dy: &mut [f64]) {
    for (g, o) in dy.iter_mut().zip(out) {
        *g *= 1.0 - o * o;
    }
}

/// How the encoder's logits become feedback symbols.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum Binarizer {
    /// `sign(x)` in {-1, +1}; `sign(0) = +1`.
    #[default]
    Sign,
    /// `clamp(x, -1, 1)`, whose exact derivative is the straight-through surrogate.
    HardTanh,
}

impl Binarizer {
    pub fn forward(self, logits: &[f64]) -> Vec<f64> {
        match self {
            Binarizer::Sign => ste_binarize(logits),
            Binarizer::HardTanh => logits.iter().map(|x| x.clamp(-1.0, 1.0)).collect(),
        }
    }
}

/// Forward pass of the straight-through binarizer.
pub fn ste_binarize(logits: &[f64]) -> Vec<f64> {
    logits.iter().map(|&x| if x >= 0.0 { 1.0 } else { -1.0 }).collect()
}

/// Straight-through gradient: pass `dy` where `|logit| <= 1`, zero elsewhere.
pub fn ste_backward(logits: &[f64], dy: &[f64]) -> Vec<f64> {
    logits
        .iter()
        .zip(dy)
        .map(|(x, g)| if x.abs() <= 1.0 { *g } else { 0.0 })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(rng: &mut impl Rng, c: usize, h: usize, w: usize) -> Tensor {
        Tensor::from_vec(c, h, w, (0..c * h * w).map(|_| rng.random_range(-1.0..1.0)).collect())
    }

    /// Direct nested-loop convolution.
    fn naive_conv(conv: &Conv2d, params: &[f64], x: &Tensor) -> Tensor {
        let (ho, wo) = conv.out_dims(x.height, x.width);
        let w = conv.weights(params);
        let b = conv.bias(params);
        let mut y = Tensor::zeros(conv.out_ch, ho, wo);
        for o in 0..conv.out_ch {
            for oy in 0..ho {
                for ox in 0..wo {
                    let mut acc = b[o];
                    for c in 0..conv.in_ch {
                        for ky in 0..3 {
                            for kx in 0..3 {
                                let iy = (oy * conv.stride + ky) as isize - 1;
                                let ix = (ox * conv.stride + kx) as isize - 1;
                                if iy >= 0 && ix >= 0 && (iy as usize) < x.height && (ix as usize) < x.width {
                                    acc += w[((o * conv.in_ch + c) * 3 + ky) * 3 + kx] * x.at(c, iy as usize, ix as usize);
                                }
                            }
                        }
                    }
                    *y.at_mut(o, oy, ox) = acc;
                }
            }
        }
        y
    }

    #[test]
    fn conv_matches_naive_loops() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for (cin, cout, stride, h, w) in [(2, 3, 1, 4, 4), (3, 2, 2, 5, 7), (1, 4, 2, 4, 6), (2, 6, 1, 3, 5), (5, 2, 1, 1, 3)] {
            let conv = Conv2d::new(cin, cout, stride, 3);
            let mut params = vec![0.0; conv.end() + 2];
            fill_uniform(&mut params, 1.0, &mut rng);
            let x = random_tensor(&mut rng, cin, h, w);
            let (y, _) = conv.forward(&params, &x);
            assert!(y.max_abs_diff(&naive_conv(&conv, &params, &x)) < 1e-13);
        }
    }

    #[test]
    fn conv_and_dense_gradients_match_finite_differences() {
        // Strided patch-matrix path, direct path and wide patch-matrix path.
        for conv in [Conv2d::new(2, 3, 2, 0), Conv2d::new(2, 3, 1, 0), Conv2d::new(2, 6, 1, 0)] {
            check_conv_then_dense(conv);
        }
    }

    fn check_conv_then_dense(conv: Conv2d) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (ho, wo) = conv.out_dims(4, 5);
        let dense = Dense::new(conv.out_ch * ho * wo, 4, conv.end());
        let mut params = vec![0.0; dense.end()];
        fill_uniform(&mut params, 0.7, &mut rng);
        let x = random_tensor(&mut rng, 2, 4, 5);
        let probe: Vec<f64> = (0..4).map(|_| rng.random_range(-1.0..1.0)).collect();
        // L = probe . dense(lrelu(conv(x)))
        let loss = |p: &[f64], x: &Tensor| -> f64 {
            let (mut y, _) = conv.forward(p, x);
            leaky_relu_inplace(&mut y.data);
            dense.forward(p, &y.data).iter().zip(&probe).map(|(a, b)| a * b).sum()
        };
        let (mut y, col) = conv.forward(&params, &x);
        leaky_relu_inplace(&mut y.data);
        let mut grads = vec![0.0; params.len()];
        let mut dy = dense.backward(&params, &y.data, &probe, &mut grads);
        leaky_relu_backward(&y.data, &mut dy);
        let dy = Tensor::from_vec(y.channels, y.height, y.width, dy);
        let dx = conv.backward(&params, &x, &col, &dy, &mut grads);
        let h = 1e-6;
        for i in 0..params.len() {
            let mut p = params.clone();
            p[i] += h;
            let up = loss(&p, &x);
            p[i] -= 2.0 * h;
            let down = loss(&p, &x);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - grads[i]).abs() <= 1e-6 + 1e-4 * fd.abs(), "param {i}: fd {fd} vs {}", grads[i]);
        }
        for i in 0..x.data.len() {
            let mut xp = x.clone();
            xp.data[i] += h;
            let up = loss(&params, &xp);
            xp.data[i] -= 2.0 * h;
            let down = loss(&params, &xp);
            let fd = (up - down) / (2.0 * h);
            assert!((fd - dx.data[i]).abs() <= 1e-6 + 1e-4 * fd.abs());
        }
    }

    #[test]
    fn ste_examples() {
        assert_eq!(ste_binarize(&[0.3, -2.0, 0.0]), vec![1.0, -1.0, 1.0]);
        assert_eq!(ste_backward(&[0.5, 3.0, -1.0], &[2.0, 2.0, 2.0]), vec![2.0, 0.0, 2.0]);
    }

    #[test]
    fn tanh_derivative() {
        let mut x = vec![0.3, -1.2];
        let orig = x.clone();
        tanh_inplace(&mut x);
        let mut g = vec![1.0, 1.0];
        tanh_backward(&x, &mut g);
        for (i, o) in orig.iter().enumerate() {
            let fd = ((o + 1e-6f64).tanh() - (o - 1e-6f64).tanh()) / 2e-6;
            assert!((fd - g[i]).abs() < 1e-8);
        }
    }
}
