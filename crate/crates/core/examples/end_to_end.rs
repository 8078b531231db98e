//! Train the end-to-end refiner, which maps Type-I feedback for all users
//! directly to precoders with the sum-rate loss.
//!
//!     cargo run --release --example end_to_end -- [n_samples] [epochs]

use csiforge::codebook::CodebookConfig;
use csiforge::training::{self, ExperimentConfig, Scheme};

fn main() -> csiforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut c = ExperimentConfig::desk();
    c.n_samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    c.training.epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(3);
    c.scheme = Scheme::E2E;
    c.codebook = CodebookConfig::type_i(1);
    c.split = 0.5;

    let e = training::run_experiment(&c)?;
    println!("kept epoch {}", e.outcome.as_ref().unwrap().best_epoch);
    for r in &e.report.rows {
        println!("{:<14} {:<10} {:>3} bits  {:.4} ± {:.4}", r.method, r.codebook, r.overhead_bits, r.mean_rate, r.ci95);
    }
    Ok(())
}
