use num_complex::Complex64;

use crate::channel::CMatrix;

/// Dense `(channels, height, width)` array of `f64`, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Default for Tensor {
    fn default() -> Self {
        Tensor::zeros(0, 0, 0)
    }
}

impl Tensor {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        Self {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    pub fn from_vec(channels: usize, height: usize, width: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), channels * height * width, "tensor data length mismatch");
        Self {
            channels,
            height,
            width,
            data,
        }
    }

    /// Reshape to `(channels, height, width)` filled with zeros, keeping the allocation.
    pub fn reset(&mut self, channels: usize, height: usize, width: usize) {
        self.channels = channels;
        self.height = height;
        self.width = width;
        self.data.clear();
        self.data.resize(channels * height * width, 0.0);
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.channels, self.height, self.width)
    }

    pub fn plane(&self) -> usize {
        self.height * self.width
    }

    pub fn channel(&self, c: usize) -> &[f64] {
        let p = self.plane();
        &self.data[c * p..(c + 1) * p]
    }

    pub fn channel_mut(&mut self, c: usize) -> &mut [f64] {
        let p = self.plane();
        &mut self.data[c * p..(c + 1) * p]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    #[inline]
    pub fn at_mut(&mut self, c: usize, y: usize, x: usize) -> &mut f64 {
        &mut self.data[(c * self.height + y) * self.width + x]
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        assert_eq!(self.shape(), other.shape());
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Stack `U` complex `Nt x K` matrices into a `(2U, Nt, K)` tensor with
/// channel `2u` holding the real part and `2u + 1` the imaginary part of user `u`.
pub fn complex_to_tensor(users: &[&CMatrix]) -> Tensor {
    let (n_tx, k) = users[0].shape();
    let mut t = Tensor::zeros(2 * users.len(), n_tx, k);
    for (u, h) in users.iter().enumerate() {
        assert_eq!(h.shape(), (n_tx, k), "all users must share one shape");
        for n in 0..n_tx {
            for kk in 0..k {
                let v = h[(n, kk)];
                *t.at_mut(2 * u, n, kk) = v.re;
                *t.at_mut(2 * u + 1, n, kk) = v.im;
            }
        }
    }
    t
}

/// Inverse of [`complex_to_tensor`].
pub fn tensor_to_complex(t: &Tensor) -> Vec<CMatrix> {
    assert!(t.channels % 2 == 0, "need an even channel count");
    (0..t.channels / 2)
        .map(|u| {
            CMatrix::from_fn(t.height, t.width, |n, k| {
                Complex64::new(t.at(2 * u, n, k), t.at(2 * u + 1, n, k))
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_layout() {
        let h = CMatrix::from_element(1, 1, Complex64::new(3.0, 4.0));
        let t = complex_to_tensor(&[&h]);
        assert_eq!(t.shape(), (2, 1, 1));
        assert_eq!(t.data, vec![3.0, 4.0]);
    }

    #[test]
    fn two_users_interleave_real_and_imaginary() {
        let a = CMatrix::from_element(1, 1, Complex64::new(1.0, 2.0));
        let b = CMatrix::from_element(1, 1, Complex64::new(5.0, 6.0));
        let t = complex_to_tensor(&[&a, &b]);
        assert_eq!(t.data, vec![1.0, 2.0, 5.0, 6.0]);
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(vals in proptest::collection::vec(-1e3f64..1e3, 2 * 3 * 4 * 2)) {
            let users: Vec<CMatrix> = (0..2)
                .map(|u| CMatrix::from_fn(3, 4, |n, k| {
                    let i = ((u * 3 + n) * 4 + k) * 2;
                    Complex64::new(vals[i], vals[i + 1])
                }))
                .collect();
            let refs: Vec<&CMatrix> = users.iter().collect();
            prop_assert_eq!(tensor_to_complex(&complex_to_tensor(&refs)), users);
        }
    }
}
