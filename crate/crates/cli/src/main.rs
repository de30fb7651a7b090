use clap::Parser;

use qbench_cli::{exit_code, run, RunConfig};

fn main() {
    let config = RunConfig::parse();
    match run(&config) {
        Ok(outcome) => {
            println!("{}", outcome.summary);
            for p in outcome.written {
                println!("wrote {}", p.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(exit_code(&e));
        }
    }
}
