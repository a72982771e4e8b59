use clap::Parser;
use clap::error::ErrorKind;
use mimsqueeze::cli::{Cli, run};
use mimsqueeze::Error;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if e.kind() == ErrorKind::InvalidSubcommand => {
            let name = std::env::args().nth(1).unwrap_or_default();
            eprintln!("error: {}", Error::UnknownCommand(name));
            std::process::exit(Error::UnknownCommand(String::new()).exit_code());
        }
        Err(e) => e.exit(),
    };
    match run(&cli) {
        Ok(out) => {
            for line in &out.summary {
                println!("{line}");
            }
            for f in &out.files {
                log::info!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
