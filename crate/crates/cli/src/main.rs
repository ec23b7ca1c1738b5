mod commands;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use forge_core::profiles::Profile;
use forge_core::ForgeError;
use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

/// Exit code when every identity checked by the command holds.
const EXIT_VERIFIED: u8 = 0;
const EXIT_VIOLATED: u8 = 2;
const EXIT_PRECISION: u8 = 3;
const EXIT_BAD_INPUT: u8 = 4;

#[derive(Parser, Debug)]
#[command(name = "forge", version, about = "Lubin-Tate formal groups, Coleman operators and interpolating series over p-adic rings")]
pub struct Cli {
    #[command(flatten)]
    pub global: Global,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct Global {
    /// Named parameter set.
    #[arg(long, global = true, env = "FORGE_PROFILE", default_value = "q3",
          value_parser = ["q3", "q27-cubic", "gm", "p5"])]
    pub profile: String,
    /// JSON file holding a full profile; overrides --profile.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// x-adic truncation.
    #[arg(long = "N", id = "trunc_n", global = true)]
    pub n: Option<usize>,
    /// p-adic working precision.
    #[arg(long = "M", id = "trunc_m", global = true)]
    pub m: Option<u32>,
    /// Seed for randomized samples.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Directory receiving result.json and manifest.json.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Trace operator, kernel generators and kernel membership.
    #[command(subcommand)]
    Coleman(commands::ColemanCmd),
    /// The map phi and interpolating series.
    #[command(subcommand)]
    Interp(commands::InterpCmd),
    /// The q/pi eigenspace of the trace operator.
    #[command(subcommand)]
    Eigen(commands::EigenCmd),
    /// Units and the multiplicative group.
    #[command(subcommand)]
    Gm(commands::GmCmd),
    /// Norm-compatible systems and group-ring idempotents.
    #[command(subcommand)]
    Explicit(commands::ExplicitCmd),
    /// Values at torsion points of the first tower levels.
    #[command(subcommand)]
    Tower(commands::TowerCmd),
    /// Acceptance battery.
    #[command(subcommand)]
    Suite(commands::SuiteCmd),
}

/// What a command hands back: its JSON result and whether its checks held.
pub struct Report {
    pub verified: bool,
    pub min_prec: Option<u32>,
    pub result: Value,
}

/// Loaded profile plus digests of every file read along the way.
pub struct Env {
    pub global: Global,
    pub profile: Profile,
    pub inputs: Vec<(String, String)>,
}

impl Env {
    fn new(global: Global) -> anyhow::Result<Self> {
        let mut inputs = vec![];
        let profile = match &global.config {
            Some(path) => {
                let bytes = std::fs::read(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
                inputs.push((path.display().to_string(), digest(&bytes)));
                serde_json::from_slice::<Profile>(&bytes).map_err(|e| bad_input(format!("{}: {e}", path.display())))?
            }
            None => Profile::named(&global.profile)?,
        };
        let profile = profile.with_truncation(global.n, global.m);
        profile.config.validate()?;
        Ok(Env { global, profile, inputs })
    }

    /// Read and record a JSON input file.
    pub fn read_json(&mut self, path: &PathBuf) -> anyhow::Result<Value> {
        let bytes = std::fs::read(path).map_err(|e| bad_input(format!("{}: {e}", path.display())))?;
        self.inputs.push((path.display().to_string(), digest(&bytes)));
        serde_json::from_slice(&bytes).map_err(|e| bad_input(format!("{}: {e}", path.display())))
    }
}

/// Input that cannot be used at all.
#[derive(Debug)]
pub struct BadInput(pub String);

impl std::fmt::Display for BadInput {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "bad input: {}", self.0)
    }
}

impl std::error::Error for BadInput {}

pub fn bad_input(msg: impl Into<String>) -> anyhow::Error {
    BadInput(msg.into()).into()
}

#[derive(Serialize)]
struct Manifest<'a> {
    config: &'a Profile,
    truncation: Value,
    command: Vec<String>,
    inputs: Vec<Value>,
    outputs: Vec<Value>,
    verified: bool,
    effective_precision: Option<u32>,
    wall_time_ms: u128,
}

fn digest(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<BadInput>().is_some() {
        return EXIT_BAD_INPUT;
    }
    match err.downcast_ref::<ForgeError>() {
        Some(ForgeError::PrecisionExhausted(_) | ForgeError::NoSolutionAtPrecision | ForgeError::NoConvergence(_)) => EXIT_PRECISION,
        Some(
            ForgeError::InvalidConfig(_)
            | ForgeError::SeedInvalid(_)
            | ForgeError::Precondition(_)
            | ForgeError::NotNormCompatible(_)
            | ForgeError::NotInKernel
            | ForgeError::NotInC(_)
            | ForgeError::Pi3NotDividingQ
            | ForgeError::NeedsQAboveTwo
            | ForgeError::ConstantTermNotTopologicallyNilpotent
            | ForgeError::TowerDepth(_),
        ) => EXIT_BAD_INPUT,
        Some(_) => EXIT_VIOLATED,
        None => EXIT_BAD_INPUT,
    }
}

fn run(cli: Cli) -> anyhow::Result<u8> {
    let start = Instant::now();
    let mut env = Env::new(cli.global.clone())?;
    let report = commands::dispatch(&mut env, &cli.command)?;
    let body = serde_json::to_string_pretty(&report.result)? + "\n";
    println!("{}", body.trim_end());
    if let Some(dir) = &env.global.out {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("result.json"), &body)?;
        let manifest = Manifest {
            config: &env.profile,
            truncation: json!({ "N": env.profile.n, "M": env.profile.config.prec }),
            command: std::env::args().collect(),
            inputs: env.inputs.iter().map(|(p, d)| json!({ "path": p, "sha256": d })).collect(),
            outputs: vec![json!({ "path": "result.json", "sha256": digest(body.as_bytes()) })],
            verified: report.verified,
            effective_precision: report.min_prec,
            wall_time_ms: start.elapsed().as_millis(),
        };
        std::fs::write(dir.join("manifest.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    }
    Ok(if report.verified { EXIT_VERIFIED } else { EXIT_VIOLATED })
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_BAD_INPUT } else { EXIT_VERIFIED };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
