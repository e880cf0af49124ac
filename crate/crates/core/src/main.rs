use cellflame::cli::{self, EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_OK};
use clap::Parser;
use std::path::PathBuf;
use std::process::ExitCode;

/// Runs a cellflame experiment described by a key=value config file.
#[derive(Parser)]
#[command(version, about)]
struct Args {
    /// Path to the config file.
    config: PathBuf,
    /// Print the validated config (defaults filled in) and exit.
    #[arg(long)]
    print_config: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let text = match std::fs::read_to_string(&args.config) {
        Ok(t) => t,
        Err(e) => {
            eprintln!(
                "error kind=config exit={EXIT_CONFIG} module=config message={:?}",
                format!("cannot read {}: {e}", args.config.display())
            );
            return ExitCode::from(EXIT_CONFIG as u8);
        }
    };
    let cfg = match cli::parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            return ExitCode::from(cli::exit_code(&e) as u8);
        }
    };
    if args.print_config {
        print!("{}", cfg.to_text());
        return ExitCode::from(EXIT_OK as u8);
    }
    match cli::execute(&cfg) {
        Ok(outcome) => {
            for line in &outcome.summary {
                println!("{line}");
            }
            for f in &outcome.files {
                println!("wrote {}", f.display());
            }
            if outcome.check_passed == Some(false) {
                eprintln!(
                    "error kind=check_failed exit={EXIT_CHECK_FAILED} module={} message=\"check failed\"",
                    cfg.command
                );
                return ExitCode::from(EXIT_CHECK_FAILED as u8);
            }
            ExitCode::from(EXIT_OK as u8)
        }
        Err(e) => {
            eprintln!("{}", cli::error_line(&e));
            ExitCode::from(cli::exit_code(&e) as u8)
        }
    }
}
