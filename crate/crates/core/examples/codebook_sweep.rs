//! Rate against feedback overhead for codebook-only zero-forcing across the
//! benchmark codebooks, written as CSV and gnuplot data.
//!
//!     cargo run --release --example codebook_sweep -- [n_samples] [out_dir]

use csiforge::codebook::CodebookConfig;
use csiforge::training::{self, ExperimentConfig, Method, Scheme};

fn main() -> csiforge::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let mut c = ExperimentConfig::desk();
    c.n_samples = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(400);
    c.split = 0.5;
    let out = args.get(2).map_or("results/sweep".into(), std::path::PathBuf::from);

    let data = training::generate(&c, None)?;
    let (_, test) = training::split(&c, &data);
    let n_tx = c.scenario.n_tx;
    let mut methods: Vec<Method> = CodebookConfig::benchmark_sweep()
        .into_iter()
        .map(|cb| Method::new("CODEBOOK_ONLY", Scheme::CodebookOnly, cb, None, n_tx))
        .collect();
    methods.push(Method::new("GENIE", Scheme::Genie, c.codebook, None, n_tx));
    let report = training::evaluate(&methods, &test, c.power(), c.noise_power(), c.training.seed, &c.hash())?;
    for r in &report.rows {
        println!("{:<20} {:>3} bits  {:.4} ± {:.4}", r.codebook, r.overhead_bits, r.mean_rate, r.ci95);
    }
    let (csv, dat) = csiforge::io::emit_report(&report, &out, "sweep")?;
    println!("wrote {} and {}", csv.display(), dat.display());
    Ok(())
}
