use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use fbo_lab::harness::{parse_config_text, run, Command, ExperimentConfig, HarnessError};

/// Numerical laboratory for the dispersion-generalized Benjamin-Ono equation.
#[derive(Parser)]
#[command(name = "fbo-lab", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Solve the equation and record conservation diagnostics.
    Simulate(Flags),
    /// Run the Picard iteration and compare it with the reference solver.
    Picard(Flags),
    /// Scan the resonance lower bound over a list of alphas.
    VerifyResonance(Flags),
    /// Sample one estimate ratio across two or more resolutions.
    VerifyEstimate(Flags),
    /// Tabulate the main bilinear ratio over an (alpha, s) grid.
    Sweep(Flags),
}

/// Flags override `--config`, and `--set` overrides both.
#[derive(Args)]
struct Flags {
    /// Flat `key = value` file; the `config.txt` echo of a run is one.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated list.
    #[arg(long)]
    alpha: Option<String>,
    /// Comma-separated list, or `auto`.
    #[arg(long, allow_hyphen_values = true)]
    s: Option<String>,
    #[arg(long)]
    n_modes: Option<String>,
    #[arg(long)]
    box_length: Option<String>,
    #[arg(long)]
    t_span: Option<String>,
    #[arg(long)]
    dt: Option<String>,
    #[arg(long)]
    samples: Option<String>,
    #[arg(long)]
    seed: Option<String>,
    #[arg(long)]
    out: Option<String>,
    #[arg(long)]
    kind: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    b_prime: Option<String>,
    #[arg(long)]
    epsilon: Option<String>,
    /// Any other config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Flags {
    fn pairs(self) -> Result<Vec<(String, String)>, HarnessError> {
        let mut pairs = match &self.config {
            Some(path) => {
                let text = std::fs::read_to_string(path).map_err(|e| {
                    HarnessError::Config(format!("cannot read {}: {e}", path.display()))
                })?;
                parse_config_text(&text)?
            }
            None => Vec::new(),
        };
        let named = [
            ("alpha", self.alpha),
            ("s", self.s),
            ("n_modes", self.n_modes),
            ("box_length", self.box_length),
            ("t_span", self.t_span),
            ("dt", self.dt),
            ("samples", self.samples),
            ("seed", self.seed),
            ("out", self.out),
            ("kind", self.kind),
            ("b", self.b),
            ("b_prime", self.b_prime),
            ("epsilon", self.epsilon),
        ];
        pairs.extend(
            named
                .into_iter()
                .filter_map(|(k, v)| v.map(|v| (k.to_string(), v))),
        );
        for kv in &self.set {
            pairs.extend(parse_config_text(kv)?);
        }
        Ok(pairs)
    }
}

fn configure_threads() -> Result<(), HarnessError> {
    let Ok(value) = std::env::var("FBO_LAB_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        HarnessError::Config(format!(
            "FBO_LAB_THREADS={value:?} is not a positive integer"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| HarnessError::Config(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Simulate(f) => (Command::Simulate, f),
        Sub::Picard(f) => (Command::Picard, f),
        Sub::VerifyResonance(f) => (Command::VerifyResonance, f),
        Sub::VerifyEstimate(f) => (Command::VerifyEstimate, f),
        Sub::Sweep(f) => (Command::Sweep, f),
    };
    let result = configure_threads()
        .and_then(|()| flags.pairs())
        .and_then(|pairs| ExperimentConfig::from_pairs(command, &pairs))
        .and_then(|config| run(&config).map(|m| (config, m)));
    match result {
        Ok((config, manifest)) => {
            println!(
                "{}: wrote {} files to {}",
                manifest.command,
                manifest.outputs.len() + 1,
                config.out.display()
            );
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("fbo-lab: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
