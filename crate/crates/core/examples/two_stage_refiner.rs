//! Train the two-stage refiner with the rate loss on Type-II feedback and
//! compare it with codebook-only zero-forcing.
//!
//!     cargo run --release --example two_stage_refiner -- [n_samples] [epochs] [recon]
//!
//! Pass `recon` as the third argument to train with the reconstruction loss.

use csiforge::codebook::CodebookConfig;
use csiforge::training::{self, ExperimentConfig, Scheme};

fn main() -> csiforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut c = ExperimentConfig::desk();
    c.n_samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    c.training.epochs = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(2);
    c.scheme = if args.get(3).is_some_and(|s| s == "recon") { Scheme::TwoStageRecon } else { Scheme::TwoStageRate };
    c.codebook = CodebookConfig::type_ii(4, 4);
    c.split = 0.5;

    let e = training::run_experiment(&c)?;
    let o = e.outcome.as_ref().expect("trained scheme");
    for l in &o.curve {
        println!("epoch {:>2}  train loss {:>9}  val rate {:.4}", l.epoch, l.train_loss.map_or("-".into(), |v| format!("{v:.4}")), l.val_rate.unwrap_or(f64::NAN));
    }
    println!("kept epoch {}", o.best_epoch);
    for r in &e.report.rows {
        println!("{:<16} {:<18} {:>3} bits  {:.4} ± {:.4}", r.method, r.codebook, r.overhead_bits, r.mean_rate, r.ci95);
    }
    let gain = e.report.paired_mean_difference(c.scheme.name(), "CODEBOOK_ONLY").unwrap();
    println!("paired gain over codebook-only: {gain:+.4} bit/s/Hz");
    Ok(())
}
