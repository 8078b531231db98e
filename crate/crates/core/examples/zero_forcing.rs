//! Zero-forcing on codebook CSI versus on the true channels (the genie bound),
//! averaged over a few two-user records.
//!
//!     cargo run --release --example zero_forcing

use csiforge::channel::{generate_dataset, Estimation, ScenarioConfig};
use csiforge::codebook::CodebookConfig;
use csiforge::precoding::{genie_zf_rate, stack_subcarrier, sum_rate, zero_forcing};
use csiforge::training::codebook_csi;

fn main() -> csiforge::Result<()> {
    let scenario = ScenarioConfig::desk();
    let (p, n0) = (scenario.tx_power(), scenario.noise_power());
    let ds = generate_dataset(&scenario, 2, 50, None, Estimation::perfect())?;
    let cb = CodebookConfig::type_ii(4, 4);
    let (mut genie, mut fed_back) = (0.0, 0.0);
    for rec in &ds.records {
        let h = rec.true_freq();
        genie += genie_zf_rate(&h, p, n0);
        let csi = codebook_csi(rec, &cb)?;
        fed_back += sum_rate(&h, &zero_forcing(&csi, p), n0);
    }
    let n = ds.len() as f64;
    println!("genie ZF {:.3} bit/s/Hz, {} ZF {:.3} bit/s/Hz", genie / n, cb.label(), fed_back / n);

    // Nulling on one subcarrier of the true channels.
    let h = ds.records[0].true_freq();
    let f = &zero_forcing(&h, p).per_subcarrier[0];
    let g = stack_subcarrier(&h, 0).adjoint() * f;
    println!("|h_u^H f_v| on subcarrier 0:\n{:.3e}", g.map(|v| v.norm()));
    Ok(())
}
