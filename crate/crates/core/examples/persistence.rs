//! Round-trip a dataset, a checkpoint and a resolved configuration through
//! their on-disk formats.
//!
//!     cargo run --release --example persistence

use csiforge::io;
use csiforge::training;

fn main() -> csiforge::Result<()> {
    let dir = std::env::temp_dir().join(format!("csiforge-persistence-{}", std::process::id()));
    let config = io::resolve_config(None, &["scenario.n_tx=8".into(), "n_subcarriers=48".into(), "n_taps=16".into(), "n_samples=20".into()])?;
    std::fs::create_dir_all(&dir)?;
    io::write_resolved_config(&config, &dir)?;
    println!("config {} -> {}", config.hash(), dir.join("config.json").display());
    let again = io::load_config(Some(&dir.join("config.json")), &[])?;
    assert_eq!(again, config);

    let ds = training::generate(&config, None)?;
    let path = dir.join("dataset.csif");
    io::save_dataset(&ds, &path, Some(&config.hash()))?;
    let back = io::load_dataset(&path)?;
    assert_eq!(back, ds);
    println!("dataset: {} records, {} bytes", back.len(), std::fs::metadata(&path)?.len());

    let decoder = training::new_decoder(&config)?;
    let ckpt = dir.join("model.csiw");
    io::save_checkpoint(&ckpt, &decoder)?;
    assert_eq!(io::load_checkpoint(&ckpt)?, decoder);
    println!("checkpoint: {} parameters, {} bytes", decoder.n_params(), std::fs::metadata(&ckpt)?.len());
    std::fs::remove_dir_all(&dir)?;
    Ok(())
}
