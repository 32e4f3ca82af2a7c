use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::config::Scenario;
use crate::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "pendulum",
    version,
    about = "Inverted spherical pendulum with a moving pivot"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Integrate one trajectory and write it as CSV.
    Simulate(SimulateArgs),
    /// Run the sampled block certificate.
    Certify(CertifyArgs),
    /// Search for the falling-free periodic orbit.
    FindOrbit(CommonArgs),
    /// Repeat the orbit search along one parameter axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Scenario file (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Override the time step.
    #[arg(long)]
    pub dt: Option<f64>,
}

impl CommonArgs {
    pub fn scenario(&self) -> Result<Scenario, CliError> {
        let s = Scenario::load(&self.config)?;
        match self.dt {
            Some(dt) => s.with_dt(dt),
            None => Ok(s),
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Duration in pivot periods.
    #[arg(long)]
    pub periods: Option<f64>,
}

#[derive(Debug, Clone, Args)]
pub struct CertifyArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Energy level of the block; defaults to twice the threshold.
    #[arg(long)]
    pub c: Option<f64>,
    /// Shell grid as TIMESxPOSITIONSxDIRECTIONS, e.g. 64x512x16.
    #[arg(long, value_parser = parse_samples)]
    pub samples: Option<[usize; 3]>,
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// NAME=START:STOP:COUNT or NAME=V1,V2,... with NAME one of
    /// friction, mass, gravity, rod_length, amplitude.
    #[arg(long)]
    pub axis: String,
}

pub fn parse_samples(text: &str) -> Result<[usize; 3], String> {
    let parts: Vec<&str> = text.split(['x', 'X']).collect();
    let [a, b, c] = parts.as_slice() else {
        return Err(format!("expected TxPxD, got {text:?}"));
    };
    let mut out = [0; 3];
    for (slot, p) in out.iter_mut().zip([a, b, c]) {
        *slot = p
            .trim()
            .parse()
            .ok()
            .filter(|&n: &usize| n > 0)
            .ok_or_else(|| format!("sample count {p:?} is not a positive integer"))?;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn samples_flag() {
        assert_eq!(parse_samples("64x512x16"), Ok([64, 512, 16]));
        assert!(parse_samples("64x512").is_err());
        assert!(parse_samples("0x1x1").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
