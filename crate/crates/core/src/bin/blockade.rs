use clap::Parser;
use kerr_blockade::cli::{run, Cli};

fn main() {
    std::process::exit(run(Cli::parse()));
}
