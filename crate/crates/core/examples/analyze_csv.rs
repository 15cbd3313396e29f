//! Every interval method on a CSV file, the library-level equivalent of
//! `ivrand analyze`. Defaults to the bundled weak-instrument fixture, where
//! the almost-exact set is infinite while TSLS and Bloom stay bounded.
//!
//! ```text
//! cargo run --release --example analyze_csv -- [path.csv]
//! ```

use ivrand::cli::{cmd_analyze, AnalyzeArgs, Cli, Command};
use clap::Parser;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/examples/data/weak_instrument.csv").to_string());
    let cli = Cli::parse_from([
        "ivrand",
        "analyze",
        "--data",
        &path,
        "--outcome",
        "outcome",
        "--treatment",
        "took_treatment",
        "--instrument",
        "assigned",
    ]);
    let Command::Analyze(args) = cli.command else { unreachable!() };
    let args: AnalyzeArgs = args;
    let out = cmd_analyze(&args);
    print!("{}", out.stdout);
    eprint!("{}", out.stderr);
    std::process::exit(out.code);
}
