use clap::Parser;
use disclosure_cli::{run, Cli};

fn main() {
    let cli = Cli::parse();
    std::process::exit(run(&cli).code());
}
