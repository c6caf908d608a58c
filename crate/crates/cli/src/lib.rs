//! Command-line driver for building and checking the construction.
//!
//! Exit codes: 0 when every record passes, 1 when a property check fails,
//! 2 for an invalid configuration or arguments. Reports are deterministic for
//! a fixed configuration and seed. Running several invocations against the
//! same output directory at once is not supported.

pub mod commands;
pub mod config;
pub mod report;

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use blender_core::endo::ValidationMode;
use clap::{Args, Parser, Subcommand};

use crate::commands::{Abort, Check, Outcome, ProbeSelection, ALL_CHECKS};
use crate::config::Config;

/// Environment variable that overrides the worker count.
pub const THREADS_VAR: &str = "BLENDER_THREADS";

#[derive(Parser, Debug)]
#[command(name = "blender", version, about = "Build and check singular torus endomorphisms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct Common {
    /// TOML config; defaults to the built-in three-dimensional instance.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    mode: Option<ValidationMode>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory for report files; without it only the text report is printed.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Validate parameters and write the map bundle.
    Build(Common),
    /// Run sampled and interval checks.
    Verify {
        #[command(flatten)]
        common: Common,
        /// Comma-separated checks; all when omitted.
        #[arg(long, value_enum, value_delimiter = ',')]
        check: Vec<Check>,
        #[arg(long, value_parser = parse_count)]
        samples: Option<usize>,
        /// Region for the cone certificate: torus, ball, complement or transition.
        #[arg(long)]
        region: Option<String>,
        #[arg(long)]
        depth: Option<usize>,
    },
    /// Run orbit and manifold probes; all when none is selected.
    Probe {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        coverage: bool,
        #[arg(long = "negative-control-A")]
        negative_control_a: bool,
        #[arg(long)]
        transitivity: bool,
        #[arg(long)]
        unstable_manifold: bool,
        #[arg(long)]
        stable_manifold: bool,
        #[arg(long)]
        robustness: bool,
        /// Orbit length for coverage.
        #[arg(long = "N", value_parser = parse_count)]
        n: Option<usize>,
        #[arg(long)]
        res: Option<usize>,
        #[arg(long, value_parser = parse_count)]
        trials: Option<usize>,
        /// Cloud size for transitivity.
        #[arg(long, value_parser = parse_count)]
        samples: Option<usize>,
    },
    /// Summarize the reports found in the output directory.
    Report(Common),
}

/// Accepts plain integers and exact float notation such as `1e6`.
fn parse_count(s: &str) -> Result<usize, String> {
    if let Ok(v) = s.parse::<usize>() {
        return Ok(v);
    }
    let f: f64 = s.parse().map_err(|_| format!("`{s}` is not a count"))?;
    if f >= 0.0 && f.fract() == 0.0 && f <= usize::MAX as f64 {
        Ok(f as usize)
    } else {
        Err(format!("`{s}` is not a non-negative integer"))
    }
}

fn load(common: &Common) -> Result<Config, Abort> {
    let mut cfg = match &common.config {
        Some(path) => Config::load(path).map_err(|e| Abort::Invalid(e.to_string()))?,
        None => Config::default(),
    };
    if let Some(m) = common.mode {
        cfg.mode = m;
    }
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(d) = &common.out {
        cfg.output.dir = Some(d.clone());
    }
    Ok(cfg)
}

fn dispatch(command: Command) -> Result<(Config, Outcome), Abort> {
    match command {
        Command::Build(common) => {
            let cfg = load(&common)?;
            let out = commands::build(&cfg)?;
            Ok((cfg, out))
        }
        Command::Verify { common, check, samples, region, depth } => {
            let mut cfg = load(&common)?;
            if let Some(s) = samples {
                cfg.budgets.samples = s;
            }
            if let Some(r) = region {
                cfg.budgets.rigor_region = r;
            }
            if let Some(d) = depth {
                cfg.budgets.rigor_depth = d;
            }
            let checks = if check.is_empty() { ALL_CHECKS.to_vec() } else { check };
            let out = commands::verify(&cfg, &checks)?;
            Ok((cfg, out))
        }
        Command::Probe {
            common,
            coverage,
            negative_control_a,
            transitivity,
            unstable_manifold,
            stable_manifold,
            robustness,
            n,
            res,
            trials,
            samples,
        } => {
            let mut cfg = load(&common)?;
            let b = &mut cfg.budgets;
            if let Some(n) = n {
                b.coverage_steps = n;
            }
            if let Some(r) = res {
                b.coverage_resolution = r;
            }
            if let Some(t) = trials {
                b.trials = t;
            }
            if let Some(s) = samples {
                b.transitivity_samples = s;
            }
            let mut sel = ProbeSelection {
                coverage,
                negative_control_a,
                transitivity,
                unstable_manifold,
                stable_manifold,
                robustness,
            };
            if sel.is_empty() {
                sel = ProbeSelection::all();
            }
            let out = commands::probe(&cfg, sel)?;
            Ok((cfg, out))
        }
        Command::Report(common) => {
            let cfg = load(&common)?;
            let dir = cfg
                .output
                .dir
                .clone()
                .ok_or_else(|| Abort::Invalid("report needs --out or output.dir".into()))?;
            let out = commands::report(&cfg, &dir)?;
            Ok((cfg, out))
        }
    }
}

/// Runs the CLI on `args` and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    blender_core::exec::init_workers_from_env(THREADS_VAR);
    let start = Instant::now();
    let (cfg, outcome) = match dispatch(cli.command) {
        Ok(v) => v,
        Err(Abort::Invalid(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
        Err(Abort::Io(msg)) => {
            eprintln!("error: {msg}");
            return 2;
        }
    };
    print!("{}", outcome.report.to_text());
    if let Some(dir) = &cfg.output.dir {
        if let Err(e) = outcome.write(dir) {
            eprintln!("error: writing {}: {e}", dir.display());
            return 2;
        }
    }
    // wall time stays out of the report files so they are reproducible
    eprintln!("wall time: {:.3}s", start.elapsed().as_secs_f64());
    match (outcome.report.command.as_str(), outcome.report.passed()) {
        (_, true) => 0,
        ("build", false) => 2,
        _ => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts_accept_exponents() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250"), Ok(250));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
        assert!(parse_count("ten").is_err());
    }
}
