//! Runs the verification suite and prints the report.
//!
//!     cargo run --release --example verify -- [check-or-module ...]

use qnormal::verify::{run, VerifyOptions};

fn main() -> qnormal::Result<()> {
    let only: Vec<String> = std::env::args().skip(1).collect();
    let report = run(&VerifyOptions { only, seed: 7, ..Default::default() })?;
    print!("{}", report.to_text());
    Ok(())
}
