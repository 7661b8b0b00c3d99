use clap::error::ErrorKind;
use clap::Parser;

use oscimax::cli::{run, Cli, EXIT_ERROR};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => e.exit(),
        Err(e) => {
            eprint!("oscimax-error: usage: {e}");
            std::process::exit(EXIT_ERROR);
        }
    };
    std::process::exit(run(cli));
}
