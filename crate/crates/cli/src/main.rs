//! Command-line front end: protocol benchmarks, activation fits, private
//! inference on toy models, exhaustive checks and tamper trials.

mod cmd;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use hamsdm::net::{NetworkProfile, Role, TamperPolicy, TamperRule};
use hamsdm::ring::{RingElement, RingParams};

#[derive(Parser, Debug)]
#[command(name = "hamsdm", version, about = "Helper-assisted MPC over Z_2^(l+s): costs, fits and private inference")]
#[command(after_help = "Any argument written as key=value is read as --key value.")]
struct Cli {
    #[command(flatten)]
    opts: Opts,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug, Default, Clone)]
pub struct Opts {
    /// Number of computing parties.
    #[arg(long, global = true)]
    n: Option<usize>,
    /// Value bits.
    #[arg(long, global = true)]
    l: Option<u32>,
    /// MAC security bits.
    #[arg(long, global = true)]
    s: Option<u32>,
    /// Fractional bits.
    #[arg(long, global = true)]
    d: Option<u32>,
    /// Polynomial or power degree.
    #[arg(long, global = true)]
    k: Option<usize>,
    /// Seed, hexadecimal with or without 0x.
    #[arg(long, global = true, value_parser = parse_seed)]
    seed: Option<u64>,
    /// lan, wan, or custom:<file> with rtt_ms and bandwidth_mbps.
    #[arg(long, global = true)]
    profile: Option<String>,
    /// Offset one message: LABEL:PARTY:ELEMENT:OFFSET, PARTY 1-based or "king".
    #[arg(long, global = true)]
    tamper: Option<String>,
    /// Directory for CSV and model files.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// TOML file with defaults for any of the options above.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Measure per-protocol costs and optionally compare with the published tables.
    Bench {
        /// Protocol name or "all".
        #[arg(long, default_value = "all")]
        protocol: String,
        #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value = "false")]
        check_tables: bool,
        /// Print CSV instead of the table.
        #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value = "false")]
        csv: bool,
    },
    /// Least-squares polynomial fit of an activation on a uniform grid.
    Fit {
        #[arg(long, default_value = "relu")]
        activation: String,
        #[arg(long, default_value_t = -5.0, allow_negative_numbers = true)]
        lo: f64,
        #[arg(long, default_value_t = 5.0, allow_negative_numbers = true)]
        hi: f64,
        #[arg(long, default_value_t = hamsdm::nn::fit::FIT_GRID)]
        points: usize,
    },
    /// Write a seeded toy LeNet and a file of random images.
    Demo {
        #[arg(long, default_value_t = 8)]
        images: usize,
    },
    /// Private inference of one image of an IDX file.
    Infer {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
    /// Exhaustive multiplication and round-trip sweeps over a tiny ring.
    Check,
    /// Randomized single-value tamper trials across every protocol.
    TamperTest {
        #[arg(long, default_value_t = 1000)]
        trials: usize,
    },
}

fn parse_seed(s: &str) -> Result<u64, String> {
    let digits = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")).unwrap_or(s);
    u64::from_str_radix(digits, 16).map_err(|e| format!("bad hex seed {s:?}: {e}"))
}

#[derive(Deserialize, Default, Debug)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    n: Option<usize>,
    l: Option<u32>,
    s: Option<u32>,
    d: Option<u32>,
    k: Option<usize>,
    seed: Option<String>,
    profile: Option<String>,
    out: Option<PathBuf>,
}

/// Options after merging the config file under the command line.
#[derive(Debug, Clone)]
pub struct Settings {
    pub n: usize,
    pub params: RingParams,
    pub explicit_ring: Option<(u32, u32)>,
    pub k: usize,
    pub seed: u64,
    pub profile: NetworkProfile,
    pub profile_name: String,
    pub tamper: Option<String>,
    pub out: Option<PathBuf>,
}

impl Settings {
    fn resolve(opts: Opts) -> Result<Self> {
        let file = match &opts.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
                toml::from_str::<ConfigFile>(&text).with_context(|| format!("parsing {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        let n = opts.n.or(file.n).unwrap_or(2);
        if n < 2 {
            bail!("need at least two parties, got {n}");
        }
        let l = opts.l.or(file.l);
        let s = opts.s.or(file.s);
        let d = opts.d.or(file.d);
        let bits = l.unwrap_or(64);
        // the default scale shrinks to fit small rings
        let params = RingParams::new(bits, s.unwrap_or(64), d.unwrap_or(16.min(bits.saturating_sub(2))))?;
        let seed = match (opts.seed, file.seed) {
            (Some(v), _) => v,
            (None, Some(text)) => parse_seed(&text).map_err(anyhow::Error::msg)?,
            (None, None) => 0,
        };
        let profile_name = opts.profile.or(file.profile).unwrap_or_else(|| "lan".into());
        let profile = parse_profile(&profile_name)?;
        Ok(Self {
            n,
            params,
            explicit_ring: l.zip(s),
            k: opts.k.or(file.k).unwrap_or(6),
            seed,
            profile,
            profile_name,
            tamper: opts.tamper,
            out: opts.out.or(file.out),
        })
    }

    /// Tamper policy corrupting the party named in `--tamper`.
    pub fn tamper_policy(&self, n: usize) -> Result<TamperPolicy> {
        let Some(spec) = &self.tamper else {
            return Ok(TamperPolicy::honest());
        };
        let parts: Vec<&str> = spec.rsplitn(4, ':').collect();
        let [offset, element, party, label] = parts[..] else {
            bail!("tamper spec {spec:?} is not LABEL:PARTY:ELEMENT:OFFSET");
        };
        let role = if party.eq_ignore_ascii_case("king") {
            Role::King
        } else {
            let p: usize = party.parse().with_context(|| format!("bad party {party:?}"))?;
            if p == 0 || p > n {
                bail!("party {p} is not among P1..P{n}");
            }
            Role::Party(p - 1)
        };
        let element: usize = element.parse().with_context(|| format!("bad element {element:?}"))?;
        let by = match offset.strip_prefix("0x") {
            Some(hex) => u128::from_str_radix(hex, 16),
            None => offset.parse(),
        }
        .with_context(|| format!("bad offset {offset:?}"))?;
        let host = role.host().expect("parties and king have hosts");
        let rule = TamperRule::offset(label, role, element, self.params.reduce(RingElement(by)));
        Ok(TamperPolicy::new(n, [host], vec![rule])?)
    }

    pub fn out_dir(&self, fallback: &str) -> PathBuf {
        self.out.clone().unwrap_or_else(|| Path::new(fallback).to_path_buf())
    }
}

fn parse_profile(name: &str) -> Result<NetworkProfile> {
    Ok(match name {
        "lan" => NetworkProfile::lan(),
        "wan" => NetworkProfile::wan(),
        other => match other.strip_prefix("custom:") {
            Some(path) => NetworkProfile::from_file(Path::new(path))?,
            None => bail!("unknown profile {other:?}; use lan, wan or custom:<file>"),
        },
    })
}

/// Rewrites `key=value` arguments as `--key=value`.
fn expand_pairs(args: impl IntoIterator<Item = String>) -> Vec<String> {
    args.into_iter()
        .enumerate()
        .map(|(i, a)| match a.split_once('=') {
            Some((key, _)) if i > 0 && !a.starts_with('-') && !key.is_empty() && key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-') => {
                format!("--{}", a.replacen('_', "-", key.matches('_').count()))
            }
            _ => a,
        })
        .collect()
}

fn main() -> ExitCode {
    let cli = Cli::parse_from(expand_pairs(std::env::args()));
    let result = Settings::resolve(cli.opts).and_then(|settings| match cli.cmd {
        Command::Bench {
            protocol,
            check_tables,
            csv,
        } => cmd::bench(&settings, &protocol, check_tables, csv),
        Command::Fit {
            activation,
            lo,
            hi,
            points,
        } => cmd::fit(&settings, &activation, lo, hi, points),
        Command::Demo { images } => cmd::demo(&settings, images),
        Command::Infer { model, input, index } => cmd::infer(&settings, &model, &input, index),
        Command::Check => cmd::check(&settings),
        Command::TamperTest { trials } => cmd::tamper_test(&settings, trials),
    });
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
