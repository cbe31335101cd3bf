//! The `erw` command-line tool: simulation, exact enumeration, the
//! verification grid and post-hoc analysis.

pub mod analyze;
pub mod args;
pub mod oracle;
pub mod report;
pub mod simulate;
pub mod svg;
pub mod verify;

use std::io::Write;

use anyhow::Context;
pub use args::{Cli, Command};

/// Runs one subcommand and returns whether all of its checks passed.
pub fn run(cli: &Cli, out: &mut dyn Write) -> anyhow::Result<bool> {
    match &cli.command {
        Command::Simulate(a) => {
            let summary = simulate::run(a)?;
            let last = summary.last();
            writeln!(
                out,
                "n = {}: mean speed {:.6}, return probability {:.6}, fluctuation variance {:.6}; wrote {}",
                last.n,
                last.speed.mean(),
                last.return_prob(),
                last.fluct.variance(),
                a.out_dir.display()
            )?;
            Ok(true)
        }
        Command::Oracle(a) => {
            let report = oracle::run(a)?;
            let json = serde_json::to_string_pretty(&report)?;
            match &a.out {
                Some(path) => std::fs::write(path, json + "\n")
                    .with_context(|| format!("cannot write {}", path.display()))?,
                None => writeln!(out, "{json}")?,
            }
            Ok(report.compare_mc.as_ref().is_none_or(|c| c.pass))
        }
        Command::Verify(a) => {
            let results = verify::run(a);
            write!(out, "{}", verify::render_table(&results))?;
            Ok(results.iter().all(|r| r.pass))
        }
        Command::Analyze(a) => {
            let output = analyze::run(a)?;
            write!(out, "{}", analyze::render(&output))?;
            Ok(output.pass)
        }
    }
}
