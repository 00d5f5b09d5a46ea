use clap::Parser;
use vit_lab::{run, Cli};

fn main() {
    let cli = Cli::parse();
    if let Err(e) = run(cli) {
        eprintln!("vit-lab: {e}");
        std::process::exit(e.exit_code());
    }
}
