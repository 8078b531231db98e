//! Command-line front end. Exit codes: 0 success, 2 configuration error,
//! 3 data-format error, 4 numerical failure, 1 anything else.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use csiforge::codebook::{self, CodebookConfig};
use csiforge::io::{self, DirLock};
use csiforge::neural::Decoder;
use csiforge::training::{self, EpochLog, EvalReport, ExperimentConfig, Method, Scheme};
use csiforge::{Error, Result};

#[derive(Parser)]
#[command(name = "csiforge", version, about = "Decoder-only compressed CSI feedback experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON configuration file; defaults apply when omitted.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override a configuration key, e.g. `--set scenario.n_tx=16` (repeatable).
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory (one writer at a time).
    #[arg(short, long, default_value = "results")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the target-site dataset (optionally through the twin perturbation).
    GenData {
        #[command(flatten)]
        common: Common,
        /// Apply the configured twin perturbation.
        #[arg(long)]
        twin: bool,
    },
    /// Encode one user's channel and print the report field by field.
    EncodeDebug {
        #[command(flatten)]
        common: Common,
        /// Read records from this dataset instead of generating them.
        #[arg(long)]
        data: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        sample: usize,
        #[arg(long, default_value_t = 0)]
        user: usize,
    },
    /// Train the configured scheme and save the checkpoint.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
    },
    /// Evaluate a checkpoint (or only the baselines) on the test split.
    Evaluate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        data: Option<PathBuf>,
        /// Checkpoint of the configured scheme.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Also score codebook-only ZF for every benchmark codebook.
        #[arg(long)]
        sweep: bool,
    },
    /// Train on the target and on two twins, test all on the target.
    TwinStudy {
        #[command(flatten)]
        common: Common,
    },
    /// Merge every report CSV in a directory into summary.csv / summary.dat.
    Report {
        /// Directory holding report CSVs.
        #[arg(short, long, default_value = "results")]
        input: PathBuf,
        /// Where to write the summary (defaults to the input directory).
        #[arg(short, long)]
        out: Option<PathBuf>,
    },
}

struct Session {
    config: ExperimentConfig,
    out: PathBuf,
    _lock: DirLock,
}

fn open(common: &Common) -> Result<Session> {
    let config = io::load_config(common.config.as_deref(), &common.overrides)?;
    let lock = DirLock::acquire(&common.out)?;
    io::write_resolved_config(&config, &common.out)?;
    log::info!("configuration {} ({})", config.hash(), common.out.join("config.json").display());
    Ok(Session {
        config,
        out: common.out.clone(),
        _lock: lock,
    })
}

fn dataset(config: &ExperimentConfig, data: Option<&Path>) -> Result<csiforge::channel::Dataset> {
    match data {
        Some(p) => {
            let ds = io::load_dataset(p)?;
            if ds.scenario != config.scenario || ds.n_users != config.n_users {
                return Err(Error::Config(format!(
                    "{} was generated for a different scenario or user count than the configuration",
                    p.display()
                )));
            }
            Ok(ds)
        }
        None => training::generate(config, None),
    }
}

fn print_rows(report: &EvalReport) {
    println!("{:<30} {:<24} {:>5} {:>10} {:>8}", "method", "codebook", "bits", "rate", "ci95");
    for r in &report.rows {
        println!("{:<30} {:<24} {:>5} {:>10.4} {:>8.4}", r.method, r.codebook, r.overhead_bits, r.mean_rate, r.ci95);
    }
}

fn write_curve(path: &Path, curve: &[EpochLog], hash: &str) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:?}"));
    let mut s = String::from("epoch,train_loss,val_loss,val_rate,config_hash\n");
    for l in curve {
        s += &format!("{},{},{},{},{hash}\n", l.epoch, opt(l.train_loss), opt(l.val_loss), opt(l.val_rate));
    }
    std::fs::write(path, s)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { common, twin } => {
            let s = open(&common)?;
            let pert = twin.then_some(&s.config.twin);
            let ds = training::generate(&s.config, pert)?;
            let path = s.out.join(if twin { "twin_dataset.csif" } else { "dataset.csif" });
            io::save_dataset(&ds, &path, Some(&s.config.hash()))?;
            println!("wrote {} records to {}", ds.len(), path.display());
        }
        Command::EncodeDebug {
            common,
            data,
            sample,
            user,
        } => {
            let config = io::load_config(common.config.as_deref(), &common.overrides)?;
            let ds = match &data {
                Some(p) => io::load_dataset(p)?,
                None => {
                    let c = ExperimentConfig {
                        n_samples: sample + 1,
                        split: 0.5,
                        ..config.clone()
                    };
                    training::generate(&c, None)?
                }
            };
            let rec = ds
                .records
                .get(sample)
                .ok_or_else(|| Error::Config(format!("sample {sample} out of range (dataset has {})", ds.len())))?;
            let h = rec
                .estimated_channels
                .get(user)
                .ok_or_else(|| Error::Config(format!("user {user} out of range (record has {})", rec.n_users())))?;
            let cb = config.codebook;
            let n_tx = ds.scenario.n_tx;
            let report = codebook::encode(h, &cb);
            let packed = codebook::pack_bits(&report, &cb, n_tx)?;
            println!("codebook {} ({} bits) for sample {sample}, user {user}", cb.label(), codebook::overhead_bits(&cb, n_tx));
            println!("{}", codebook::describe(&report, &cb, n_tx));
            println!("packed {packed}");
            let back = codebook::unpack_bits(&packed, &cb, n_tx)?;
            println!("unpack matches: {}", back == report);
        }
        Command::Train { common, data } => {
            let s = open(&common)?;
            let ds = dataset(&s.config, data.as_deref())?;
            let (train_set, _) = training::split(&s.config, &ds);
            let outcome = training::train(&s.config, &train_set)?;
            let hash = s.config.hash();
            io::save_checkpoint(&s.out.join("model.csiw"), &outcome.decoder)?;
            write_curve(&s.out.join("training_curve.csv"), &outcome.curve, &hash)?;
            std::fs::write(
                s.out.join("model.json"),
                serde_json::to_string_pretty(&serde_json::json!({
                    "scheme": s.config.scheme,
                    "config_hash": hash,
                    "best_epoch": outcome.best_epoch,
                    "skipped_steps": outcome.skipped_steps,
                    "curve": outcome.curve,
                }))? + "\n",
            )?;
            println!("best epoch {}; checkpoint {}", outcome.best_epoch, s.out.join("model.csiw").display());
        }
        Command::Evaluate {
            common,
            data,
            model,
            sweep,
        } => {
            let s = open(&common)?;
            let c = &s.config;
            let ds = dataset(c, data.as_deref())?;
            let (_, test) = training::split(c, &ds);
            let decoder: Option<Decoder> = model.as_deref().map(io::load_checkpoint).transpose()?;
            let n_tx = c.scenario.n_tx;
            let mut methods = Vec::new();
            if let Some(d) = &decoder {
                if !c.scheme.is_trained() {
                    return Err(Error::Config(format!("a checkpoint was given but scheme {} uses none", c.scheme)));
                }
                methods.push(Method::new(c.scheme.name(), c.scheme, c.codebook, Some(d), n_tx));
            }
            methods.extend(training::baseline_methods(c.codebook, n_tx));
            if sweep {
                for cb in CodebookConfig::benchmark_sweep().into_iter().filter(|cb| *cb != c.codebook) {
                    methods.push(Method::new(Scheme::CodebookOnly.name(), Scheme::CodebookOnly, cb, None, n_tx));
                }
            }
            let report = training::evaluate(&methods, &test, c.power(), c.noise_power(), c.training.seed, &c.hash())?;
            io::emit_report(&report, &s.out, "evaluation")?;
            print_rows(&report);
        }
        Command::TwinStudy { common } => {
            let s = open(&common)?;
            let study = training::twin_transfer_experiment(&s.config)?;
            io::emit_report(&study.report, &s.out, "twin_study")?;
            print_rows(&study.report);
        }
        Command::Report { input, out } => {
            let out = out.unwrap_or_else(|| input.clone());
            let mut files: Vec<PathBuf> = std::fs::read_dir(&input)?
                .map(|e| e.map(|e| e.path()))
                .collect::<std::io::Result<_>>()?;
            files.retain(|p| p.extension().is_some_and(|e| e == "csv") && p.file_stem().is_some_and(|s| s != "summary"));
            files.sort();
            let mut rows = Vec::new();
            for f in &files {
                match io::report::read_report_csv(f) {
                    Ok(r) => rows.extend(r),
                    Err(Error::Config(msg)) if msg.contains("unexpected header") => log::debug!("skipping {msg}"),
                    Err(e) => return Err(e),
                }
            }
            if rows.is_empty() {
                return Err(Error::Config(format!("no evaluation reports found in {}", input.display())));
            }
            let _lock = DirLock::acquire(&out)?;
            let per_sample = rows.iter().map(|_| Vec::new()).collect();
            let report = EvalReport { rows, per_sample };
            io::emit_report(&report, &out, "summary")?;
            print_rows(&report);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
