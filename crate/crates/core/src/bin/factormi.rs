use clap::Parser;
use factormi::cli::{init_logging, run, Cli};

fn main() {
    init_logging();
    let cli = Cli::parse();
    match run(&cli) {
        Ok(outcome) => print!("{}", outcome.text),
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
