use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = zwitscher::cli::Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(cli.log_level())).init();
    match zwitscher::cli::dispatch(cli) {
        Ok(outcome) if outcome.failures == 0 => ExitCode::SUCCESS,
        Ok(outcome) => {
            log::error!("{} item(s) failed", outcome.failures);
            ExitCode::from(1)
        }
        Err(e) => {
            log::error!("{e:#}");
            ExitCode::from(2)
        }
    }
}
