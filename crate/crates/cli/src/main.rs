use clap::Parser;
use plurisem_cli::{error_report, exit_code, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("{}", error_report(&e));
        std::process::exit(exit_code(&e));
    }
}
