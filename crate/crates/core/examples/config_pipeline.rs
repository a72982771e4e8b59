//! Parses a configuration document with overrides and runs the same
//! `spectrum` command the binary exposes, into a temporary directory.
//!
//! cargo run --release --example config_pipeline -- [config] [key=value ...]

use clap::Parser;
use mimsqueeze::cli::{Cli, run};
use mimsqueeze::model::derived_rates;

fn main() -> mimsqueeze::Result<()> {
    let mut args = std::env::args().skip(1);
    let config = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/configs/reference.toml").to_string());
    let overrides: Vec<String> = args.collect();

    let text = std::fs::read_to_string(&config)?;
    let model = mimsqueeze::io::parse_config_with_overrides(&text, &overrides)?.model()?;
    println!("model {}", model.content_hash());
    for i in 0..model.modes().len() {
        let r = derived_rates(&model, i)?;
        println!("  {}: Gamma_meas/2pi = {:.1} Hz, C_q = {:.2}", model.modes()[i].label(), r.gamma_meas / std::f64::consts::TAU, r.quantum_cooperativity);
    }

    let out = std::env::temp_dir().join("mimsqueeze-pipeline");
    let mut argv = vec!["mimsqueeze".to_string(), "spectrum".into(), "--config".into(), config, "--out".into(), out.display().to_string()];
    for o in overrides {
        argv.push("--set".into());
        argv.push(o);
    }
    let cli = Cli::try_parse_from(argv).map_err(|e| mimsqueeze::Error::Parse { source_name: "arguments".into(), message: e.to_string() })?;
    let output = run(&cli)?;
    for line in output.summary {
        println!("{line}");
    }
    println!("{} files in {}", output.files.len(), out.display());
    Ok(())
}
