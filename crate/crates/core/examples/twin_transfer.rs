//! Train on imperfect digital twins of the site and test on the site itself.
//!
//!     cargo run --release --example twin_transfer -- [n_samples] [epochs]

use csiforge::training::{self, ExperimentConfig, TARGET_TRAINED};

fn main() -> csiforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut c = ExperimentConfig::desk();
    c.n_samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    c.training.epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    c.split = 0.5;

    let study = training::twin_transfer_experiment(&c)?;
    for r in &study.report.rows {
        let gap = study.report.paired_mean_difference(TARGET_TRAINED, &r.method).unwrap();
        println!("{:<30} {:.4} ± {:.4}  (target-trained minus this: {gap:+.4})", r.method, r.mean_rate, r.ci95);
    }
    Ok(())
}
