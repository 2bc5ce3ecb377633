use clap::Parser;
use moranlab::cli::{run, RunConfig};

fn main() {
    let config = RunConfig::parse();
    let report = run(&config);
    print!("{}", report.to_json());
    if let Some(e) = &report.error {
        eprintln!("error: {}", e.message);
    }
    std::process::exit(report.status.exit_code());
}
