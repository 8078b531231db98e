//! Draw one user's multipath, turn it into taps and a frequency response, and
//! show what the digital-twin imperfections change.
//!
//!     cargo run --release --example channel_model

use num_complex::Complex64;

use csiforge::channel::{child_rng, generate_dataset, sample_paths, CMatrix, Estimation, PathTag, ScenarioConfig, TwinPerturbation, UserChannel};

fn correlation(a: &CMatrix, b: &CMatrix) -> f64 {
    let inner: Complex64 = a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum();
    inner.norm() / (a.norm() * b.norm()).max(f64::MIN_POSITIVE)
}

fn main() -> csiforge::Result<()> {
    let scenario = ScenarioConfig::desk();
    let mut rng = child_rng(scenario.rng_seed, 0);
    let paths = sample_paths(&scenario, 0, &mut rng)?;
    let foliage = paths.paths.iter().filter(|p| p.tag == PathTag::Foliage).count();
    println!("{} paths ({foliage} through foliage), tap window {:.3e} s", paths.len(), scenario.max_delay());

    let ch = UserChannel::from_paths(&paths, &scenario);
    println!("taps {:?}, frequency response {:?}", ch.taps.shape(), ch.freq.shape());
    for k in [0, 12, 24, 36] {
        println!("  |h_{k}| = {:.3e}", ch.freq.column(k).norm());
    }

    let site = generate_dataset(&scenario, 1, 200, None, Estimation::perfect())?;
    for (name, pert) in [
        ("foliage removed", TwinPerturbation::foliage_removed(7)),
        ("foliage removed + 5 m building shift", TwinPerturbation { drop_foliage: true, position_error_std: 5.0, rng_seed: 7 }),
    ] {
        let layout = pert.shifted_layout(&scenario);
        for (a, b) in scenario.cluster_layout.iter().zip(&layout.cluster_layout) {
            if a != b {
                println!("  {name}: cluster moved {:+.1} ns, {:+.4} rad", (b.mean_delay - a.mean_delay) * 1e9, b.mean_azimuth - a.mean_azimuth);
            }
        }
        let twin = generate_dataset(&scenario, 1, 200, Some(&pert), Estimation::perfect())?;
        let mean_corr = site
            .records
            .iter()
            .zip(&twin.records)
            .map(|(s, t)| correlation(&s.user_channels[0].freq, &t.user_channels[0].freq))
            .sum::<f64>()
            / site.len() as f64;
        println!("{name}: mean correlation with the site channel {mean_corr:.3}");
    }
    Ok(())
}
