//! Command-line flags. The same structs are read from the `[<subcommand>]`
//! tables of a TOML config file; flags given on the command line win.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::range::{Angle, AutoOr};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "rotkey", version, about = "Key rates and security checks for (M,L) polarization QKD protocols")]
pub struct Cli {
    /// TOML file with per-subcommand defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Write results here instead of standard output.
    #[arg(long, short = 'o', global = true)]
    pub output: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check operator and state identities against brute-force constructions.
    Verify(VerifyArgs),
    /// Key rate at finite loss.
    Rate(RateArgs),
    /// High-loss key gain, at a given γ or optimized over γ.
    Asymptotic(AsymptoticArgs),
    /// γ-optimized high-loss gain over a range of channel noise.
    Scan(ScanArgs),
    /// Largest channel noise with positive high-loss gain.
    Threshold(ThresholdArgs),
    /// Event-level Monte Carlo simulation of the honest protocol.
    Simulate(SimulateArgs),
}

/// Combine command-line values with config-file values.
pub trait Merge: Sized {
    fn merge(self, file: Option<Self>) -> Self;
}

macro_rules! merge_fields {
    ($ty:ty { options: [$($o:ident),*], flags: [$($f:ident),*] }) => {
        impl Merge for $ty {
            fn merge(self, file: Option<Self>) -> Self {
                let Some(file) = file else { return self };
                Self {
                    $($o: self.$o.or(file.$o),)*
                    $($f: self.$f || file.$f,)*
                }
            }
        }
    };
}

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct VerifyArgs {
    /// Comma-separated values of M.
    #[arg(long = "M", value_delimiter = ',')]
    #[serde(rename = "M")]
    pub m: Option<Vec<usize>>,
    /// Comma-separated values of L.
    #[arg(long = "L", value_delimiter = ',')]
    #[serde(rename = "L")]
    pub l: Option<Vec<usize>>,
    /// Photon-number truncation; enables the state and Fock-oracle checks.
    #[arg(long)]
    pub nmax: Option<usize>,
    /// Source intensities for the state checks.
    #[arg(long, value_delimiter = ',')]
    pub mu: Option<Vec<f64>>,
    /// Phases for the phase-error operator check.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub phi: Option<Vec<f64>>,
    /// Perturb one amplitude of the source state (self-test of the checker).
    #[arg(long, hide = true, allow_hyphen_values = true)]
    pub perturb: Option<f64>,
}
merge_fields!(VerifyArgs { options: [m, l, nmax, mu, phi, perturb], flags: [] });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RateArgs {
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    /// Analysis order, or `auto` for the largest admissible value.
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<AutoOr<usize>>,
    /// Source intensity, or `auto` to optimize it.
    #[arg(long)]
    pub mu: Option<AutoOr<f64>>,
    /// Channel transmission.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Probability of a random polarization rotation in the channel.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Same as `--mu auto`.
    #[arg(long)]
    #[serde(default)]
    pub optimize_mu: bool,
    /// Minimize the phase-error bound over φ′ as well.
    #[arg(long)]
    #[serde(default)]
    pub scan_phi: bool,
    /// Count the mirrored detector class as a second key pool (even M).
    #[arg(long)]
    #[serde(default)]
    pub double_even: bool,
    /// JSON file with observed statistics replacing the honest-channel model.
    #[arg(long)]
    pub stats_json: Option<PathBuf>,
}
merge_fields!(RateArgs { options: [m, l, k, mu, eta, eps, stats_json], flags: [optimize_mu, scan_phi, double_even] });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct AsymptoticArgs {
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<AutoOr<usize>>,
    #[arg(long)]
    pub eps: Option<f64>,
    /// Scaling parameter γ in μ = (γη)^{1/K}; omit to optimize.
    #[arg(long, conflicts_with = "optimize")]
    pub gamma: Option<f64>,
    #[arg(long)]
    #[serde(default)]
    pub optimize: bool,
    #[arg(long)]
    #[serde(default)]
    pub double_even: bool,
}
merge_fields!(AsymptoticArgs { options: [m, l, k, eps, gamma], flags: [optimize, double_even] });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ScanArgs {
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<AutoOr<usize>>,
    /// start:stop:count
    #[arg(long)]
    pub eps_range: Option<String>,
    #[arg(long)]
    #[serde(default)]
    pub double_even: bool,
}
merge_fields!(ScanArgs { options: [m, l, k, eps_range], flags: [double_even] });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ThresholdArgs {
    #[arg(long = "K")]
    #[serde(rename = "K")]
    pub k: Option<AutoOr<usize>>,
    /// Bit-encoding angle(s), e.g. `pi/8` or `0.39`; comma-separated.
    #[arg(long = "Theta", value_delimiter = ',')]
    #[serde(rename = "Theta")]
    pub theta: Option<Vec<Angle>>,
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
}
merge_fields!(ThresholdArgs { options: [k, theta, m, l], flags: [] });

#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct SimulateArgs {
    #[arg(long = "M")]
    #[serde(rename = "M")]
    pub m: Option<usize>,
    #[arg(long = "L")]
    #[serde(rename = "L")]
    pub l: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub eps: Option<f64>,
    #[arg(long)]
    pub pulses: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Compare against the analytic statistics; exit 1 on a mismatch.
    #[arg(long)]
    #[serde(default)]
    pub compare: bool,
    #[arg(long)]
    #[serde(default)]
    pub double_even: bool,
    /// Write a per-pulse CSV event log here (runs serially).
    #[arg(long)]
    pub event_log: Option<PathBuf>,
}
merge_fields!(SimulateArgs { options: [m, l, mu, eta, eps, pulses, seed, event_log], flags: [compare, double_even] });
