use clap::Parser;
use ham_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(&cli) {
        eprintln!("ham: {e}");
        std::process::exit(e.exit_code());
    }
}
