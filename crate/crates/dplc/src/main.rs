use clap::Parser;
use dplc::cli::{run, Cli};
use dplc::error::EXIT_OK;

fn main() {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("DPLC_LOG", "warn")).init();
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
