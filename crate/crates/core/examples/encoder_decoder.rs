//! The learned encoder-decoder benchmark: a CNN at the user compresses its
//! channel to B binary symbols, the base station expands and refines them.
//!
//!     cargo run --release --example encoder_decoder -- [n_samples] [epochs] [bits]

use csiforge::neural::Decoder;
use csiforge::training::{self, ExperimentConfig, Scheme};

fn main() -> csiforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut c = ExperimentConfig::desk();
    c.n_samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    c.training.epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    c.training.feedback_bits = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(64);
    c.scheme = Scheme::EncdecBenchmark;
    c.split = 0.5;

    let e = training::run_experiment(&c)?;
    if let Decoder::EncoderDecoder(net) = &e.outcome.as_ref().unwrap().decoder {
        let data = training::generate(&c, None)?;
        let x = training::pipeline::network_input(c.scheme, &data.records[0], &[], 0);
        let symbols = net.encode(&x)?;
        let bits: String = symbols.iter().map(|s| if *s > 0.0 { '1' } else { '0' }).collect();
        println!("feedback for record 0, user 0: {bits}");
    }
    for r in &e.report.rows {
        println!("{:<18} {:<18} {:>3} bits  {:.4} ± {:.4}", r.method, r.codebook, r.overhead_bits, r.mean_rate, r.ci95);
    }
    Ok(())
}
