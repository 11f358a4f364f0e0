use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;
mod config;
mod error;
mod output;

#[derive(Parser, Debug)]
#[command(name = "compsum", version, about = "Distributions of compound sums with random summation boundaries")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Exact P{S <= x} for exponential claims and inter-arrival times.
    Exact(Common),
    /// One approximation of the distribution of the sum.
    Approx {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum)]
        method: Method,
    },
    /// Per-path crossing index and sums.
    Simulate(Common),
    /// All requested methods over a grid of premiums.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Premium grid `lo:hi:n`.
        #[arg(long)]
        c: String,
        #[arg(long, value_delimiter = ',', default_value = "exact,ig,normal,qnormal")]
        methods: Vec<SweepMethod>,
    },
    /// Renewal counting means at the level.
    Renewal(Common),
    /// Scaled garbage term sample and its limit law.
    Garbage(Common),
    /// Block estimates for a Markov-modulated model.
    Modular {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_parser = parse_count, default_value = "1000000")]
        blocks: u64,
        #[arg(long, value_parser = parse_count, default_value = "64")]
        replicates: u64,
    },
}

#[derive(Args, Debug, Clone)]
pub struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Number of simulated paths; accepts forms such as `1e6`.
    #[arg(long, value_parser = parse_count, default_value = "100000")]
    paths: u64,
    /// Step cap per path.
    #[arg(long, value_parser = parse_count, default_value = "1000000")]
    cap: u64,
    #[arg(long, value_parser = parse_count)]
    workers: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Crossing level (initial capital, or renewal time).
    #[arg(long, visible_alias = "t", value_parser = parse_real)]
    level: Option<f64>,
    /// Evaluation point(s) `x` or a grid `lo:hi:n`.
    #[arg(long, visible_alias = "x")]
    horizon: Option<String>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    Normal,
    Qnormal,
    Ig,
    Edgeworth,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMethod {
    Exact,
    Normal,
    Qnormal,
    Ig,
    Edgeworth,
    Simulate,
}

fn parse_real(s: &str) -> Result<f64, String> {
    config::parse_f64(s).ok_or_else(|| format!("`{s}` is not a finite number"))
}

/// Non-negative integer, also written as `1e6`.
fn parse_count(s: &str) -> Result<u64, String> {
    if let Ok(n) = s.parse::<u64>() {
        return Ok(n);
    }
    match config::parse_f64(s) {
        Some(v) if v >= 0.0 && v.fract() == 0.0 && v < 1.8e19 => Ok(v as u64),
        _ => Err(format!("`{s}` is not a non-negative integer")),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match cli.command {
        Command::Exact(c) => commands::exact(&c),
        Command::Approx { common, method } => commands::approx(&common, method),
        Command::Simulate(c) => commands::simulate(&c),
        Command::Sweep { common, c, methods } => commands::sweep(&common, &c, &methods),
        Command::Renewal(c) => commands::renewal(&c),
        Command::Garbage(c) => commands::garbage(&c),
        Command::Modular { common, blocks, replicates } => commands::modular(&common, blocks, replicates),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(parse_count("1e6"), Ok(1_000_000));
        assert_eq!(parse_count("250"), Ok(250));
        assert!(parse_count("1.5").is_err());
        assert!(parse_count("-3").is_err());
    }

    #[test]
    fn cli_definition() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
