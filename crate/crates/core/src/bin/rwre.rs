use clap::Parser;

use rwre_boundary::cli::{error_json, run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("{}", error_json(&e));
        std::process::exit(e.exit_code());
    }
}
