use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Arg, ArgAction, ArgMatches, Command};
use pgraph::commands::{self, COMMANDS};
use pgraph::config::{RunConfig, KEYS};
use pgraph::error::{CliError, CliResult};

fn cli() -> Command {
    let mut cmd = Command::new("pgraph")
        .about("Fit elastic principal graphs to point clouds")
        .subcommand_required(true)
        .arg_required_else_help(true);
    for &(name, about) in COMMANDS {
        let mut sub = Command::new(name)
            .about(about)
            .arg(
                Arg::new("config")
                    .short('c')
                    .long("config")
                    .value_name("FILE")
                    .help("TOML configuration"),
            )
            .arg(
                Arg::new("threads")
                    .long("threads")
                    .value_name("N")
                    .value_parser(clap::value_parser!(usize))
                    .help("worker threads (default: ELPI_THREADS, else all cores)"),
            )
            .arg(
                Arg::new("verbose")
                    .short('v')
                    .long("verbose")
                    .action(ArgAction::SetTrue)
                    .help("progress on stderr"),
            );
        for &(key, help) in KEYS {
            sub = sub.arg(
                Arg::new(key)
                    .long(key)
                    .value_name("VALUE")
                    .allow_hyphen_values(true)
                    .help(help),
            );
        }
        cmd = cmd.subcommand(sub);
    }
    cmd
}

fn threads(m: &ArgMatches) -> CliResult<Option<usize>> {
    if let Some(&n) = m.get_one::<usize>("threads") {
        return Ok(Some(n));
    }
    match std::env::var("ELPI_THREADS") {
        Ok(v) if !v.trim().is_empty() => v
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::config("config", format!("ELPI_THREADS must be a positive integer, got '{v}'"))),
        _ => Ok(None),
    }
}

fn execute(name: &str, m: &ArgMatches) -> CliResult<()> {
    let overrides: Vec<(String, String)> = KEYS
        .iter()
        .filter_map(|&(key, _)| m.get_one::<String>(key).map(|v| (key.to_string(), v.clone())))
        .collect();
    let file = m.get_one::<String>("config").map(PathBuf::from);
    let cfg = RunConfig::build(file.as_deref(), &overrides)?;
    if let Some(n) = threads(m)? {
        if n == 0 {
            return Err(CliError::config("config", "thread count must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::config("config", e.to_string()))?;
    }
    commands::run(name, &cfg, m.get_flag("verbose"))
}

fn main() -> ExitCode {
    let matches = match cli().try_get_matches() {
        Ok(m) => m,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let (name, sub) = matches.subcommand().expect("a subcommand is required");
    match execute(name, sub) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
