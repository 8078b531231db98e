//! Compress one channel with every benchmark codebook: overhead, packed
//! bitstring and how well the reconstruction aligns with the true channel.
//!
//!     cargo run --release --example codebook_feedback

use csiforge::channel::{generate_dataset, Estimation, ScenarioConfig};
use csiforge::codebook::{self, CodebookConfig};

fn main() -> csiforge::Result<()> {
    let scenario = ScenarioConfig::desk();
    let ds = generate_dataset(&scenario, 1, 1, None, Estimation::perfect())?;
    let h = &ds.records[0].estimated_channels[0];
    let n_tx = scenario.n_tx;
    println!("{:<20} {:>5}  {:>8}  packed", "codebook", "bits", "|cos|");
    for cb in CodebookConfig::benchmark_sweep() {
        let report = codebook::encode(h, &cb);
        let packed = codebook::pack_bits(&report, &cb, n_tx)?;
        assert_eq!(codebook::unpack_bits(&packed, &cb, n_tx)?, report);
        let w = codebook::reconstruct(h, &cb)?;
        // Mean per-subcarrier alignment between the unit-norm reconstruction and h.
        let cos: f64 = (0..h.ncols())
            .map(|k| h.column(k).dotc(&w.column(k)).norm() / (h.column(k).norm() * w.column(k).norm()))
            .sum::<f64>()
            / h.ncols() as f64;
        println!("{:<20} {:>5}  {cos:>8.4}  {packed}", cb.label(), codebook::overhead_bits(&cb, n_tx));
    }
    let cb = CodebookConfig::type_ii(4, 4);
    println!("\n{}", codebook::describe(&codebook::encode(h, &cb), &cb, n_tx));
    Ok(())
}
