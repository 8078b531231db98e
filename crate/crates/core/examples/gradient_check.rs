//! Check the refiner's backward pass against central finite differences
//! through the sum-rate loss.
//!
//!     cargo run --release --example gradient_check

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use csiforge::channel::CMatrix;
use csiforge::neural::loss::loss_e2e;
use csiforge::neural::{Init, RefinerNet, Tensor};

fn main() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let (n_tx, k) = (8, 6);
    let h: Vec<CMatrix> = (0..2)
        .map(|_| CMatrix::from_fn(n_tx, k, |_, _| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))))
        .collect();
    let mut net = RefinerNet::new(2, Init::Glorot, &mut rng);
    let x = Tensor::from_vec(4, n_tx, k, (0..4 * n_tx * k).map(|_| rng.random_range(-1.0..1.0)).collect());
    let loss = |net: &RefinerNet| loss_e2e(&net.forward(&x).unwrap(), &[&h[0], &h[1]], 1.0, 0.1);

    let (_, mut tape) = net.forward_recorded(&x).unwrap();
    let mut grads = vec![0.0; net.n_params()];
    net.backward(&mut tape, &loss(&net).grad, &mut grads).unwrap();
    println!("{} parameters, loss {:.6}", net.n_params(), loss(&net).value);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let i = rng.random_range(0..net.n_params());
        let base = net.params[i];
        net.params[i] = base + 1e-6;
        let up = loss(&net).value;
        net.params[i] = base - 1e-6;
        let down = loss(&net).value;
        net.params[i] = base;
        let fd = (up - down) / 2e-6;
        let rel = (fd - grads[i]).abs() / fd.abs().max(grads[i].abs()).max(1e-12);
        worst = worst.max(rel);
        println!("param {i:>5}: analytic {:+.6e}  finite difference {fd:+.6e}", grads[i]);
    }
    println!("worst relative error {worst:.2e}");
}
