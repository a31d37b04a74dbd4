//! `clmm`: experiment driver for concentrated-liquidity allocation.
//!
//! Exit codes: 0 on success, 1 on an invariant violation, 2 on bad input.

mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Arg, ArgAction, ArgMatches, Command};
use clmm_core::{Error, ExperimentConfig};

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Invariant(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Invariant(_) => 1,
            CliError::Input(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Input(m) => write!(f, "bad input: {m}"),
            CliError::Invariant(m) => write!(f, "{m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Invariant(_) | Error::OffCurve { .. } | Error::MultiBucketMove { .. } => {
                CliError::Invariant(e.to_string())
            }
            Error::Domain(_) | Error::NotFound(_) | Error::Parse(_) => CliError::Input(e.to_string()),
        }
    }
}

fn config_args() -> Vec<Arg> {
    let mut args = vec![Arg::new("config")
        .long("config")
        .value_name("PATH")
        .help("Config file, or `default` for the built-in baseline")];
    let defaults = ExperimentConfig::default().to_map();
    for (key, doc) in ExperimentConfig::KEYS.iter().zip(ExperimentConfig::DOCS) {
        let help = format!("{} [default: {}]", doc.trim(), defaults[*key]);
        let mut arg = Arg::new(*key).long(*key).value_name("VALUE").help(help).action(ArgAction::Set);
        if key.contains('_') {
            arg = arg.visible_alias(key.replace('_', "-"));
        }
        args.push(arg);
    }
    args
}

fn cli() -> Command {
    let sub = |name: &'static str, about: &'static str| Command::new(name).about(about).args(config_args());
    Command::new("clmm")
        .about("Concentrated-liquidity LP experiments")
        .version(env!("CARGO_PKG_VERSION"))
        .subcommand_required(true)
        .arg_required_else_help(true)
        .subcommand(sub("calibrate", "Fit the market model bandwidth to a price series"))
        .subcommand(sub("simulate", "Sample price paths and write them as CSV"))
        .subcommand(sub("optimize", "Optimal allocation for one bucket scheme and risk aversion"))
        .subcommand(sub("pareto", "OPT and GAS over every (theta, delta) scheme with frontier flags"))
        .subcommand(
            sub("sweep", "Sweep one experiment parameter").arg(
                Arg::new("param")
                    .long("param")
                    .required(true)
                    .value_parser(["delta", "risk", "k", "lambda", "gamma", "W", "bandwidth", "regime"])
                    .help("Parameter to sweep"),
            ),
        )
        .subcommand(sub("replay-appendix-c", "Replay the scripted three-LP pool scenario against expected values"))
}

/// Config file (or defaults) with flag overrides applied.
fn load_config(m: &ArgMatches) -> Result<ExperimentConfig, CliError> {
    let mut cfg = match m.get_one::<String>("config").map(String::as_str) {
        None | Some("default") => ExperimentConfig::default(),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{path}: {e}")))?;
            ExperimentConfig::parse(&text).map_err(|e| CliError::Input(format!("{path}: {e}")))?
        }
    };
    for key in ExperimentConfig::KEYS {
        if let Some(v) = m.get_one::<String>(key) {
            cfg.set(key, v).map_err(|e| CliError::Input(format!("--{key}: {e}")))?;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(m: &ArgMatches) -> Result<(), CliError> {
    let (name, sub) = m.subcommand().expect("subcommand required");
    let cfg = load_config(sub)?;
    let out = PathBuf::from(&cfg.out_dir);
    std::fs::create_dir_all(&out).map_err(|e| CliError::Input(format!("{}: {e}", out.display())))?;
    let outputs = match name {
        "calibrate" => commands::calibrate(&cfg, &out)?,
        "simulate" => commands::simulate(&cfg, &out)?,
        "optimize" => commands::optimize(&cfg, &out)?,
        "pareto" => commands::pareto(&cfg, &out)?,
        "sweep" => commands::sweep(&cfg, sub.get_one::<String>("param").expect("required"), &out)?,
        "replay-appendix-c" => commands::replay(&cfg, &out)?,
        _ => unreachable!("unknown subcommand {name}"),
    };
    output::write_manifest(&out, name, &cfg, &outputs)?;
    Ok(())
}

fn main() -> ExitCode {
    let matches = cli().get_matches();
    let started = Instant::now();
    match run(&matches) {
        Ok(()) => {
            eprintln!("done in {:.2}s", started.elapsed().as_secs_f64());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
