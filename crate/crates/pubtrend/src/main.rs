use std::process::exit;

use pubtrend::cli::{load_config, run_study, ConfigError};

fn main() {
    let env = |key: &str| std::env::var(key).ok();
    match load_config(std::env::args(), &env) {
        Ok(config) => exit(run_study(&config)),
        Err(ConfigError::Help(text)) => {
            println!("{text}");
            exit(0);
        }
        Err(err) => {
            eprintln!("pubtrend: error: {err}");
            exit(err.exit_code());
        }
    }
}
