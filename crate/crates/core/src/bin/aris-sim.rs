use aris_sim::cli::{dispatch, Cli};
use clap::Parser;

fn main() {
    std::process::exit(dispatch(Cli::parse()));
}
