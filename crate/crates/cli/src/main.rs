mod args;
mod commands;
mod config;
mod error;
mod output;

use std::collections::BTreeMap;
use std::process::ExitCode;

use clap::Parser;
use serde::Serialize;
use serde_json::Value;

use args::{Cli, Command};
use error::CliError;
use output::Run;

fn flag_map<T: Serialize>(global: &args::GlobalArgs, sub: &T) -> Result<BTreeMap<String, Value>, CliError> {
    let mut map = BTreeMap::new();
    for part in [serde_json::to_value(global)?, serde_json::to_value(sub)?] {
        if let Value::Object(obj) = part {
            flatten_into(&mut map, obj);
        }
    }
    Ok(map)
}

fn flatten_into(map: &mut BTreeMap<String, Value>, obj: serde_json::Map<String, Value>) {
    for (k, v) in obj {
        match v {
            Value::Object(inner) => flatten_into(map, inner),
            other => {
                map.insert(k.replace('_', "-"), other);
            }
        }
    }
}

fn run(cli: Cli) -> Result<bool, CliError> {
    if cli.global.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.global.threads)
            .build_global()
            .map_err(|e| CliError::Usage(e.to_string()))?;
    }
    let g = &cli.global;
    let start = |name: &'static str, flags| Run::new(name, flags, g.seed, g.out_dir.clone());
    let (run, ok) = match &cli.command {
        Command::Calibrate(a) => (commands::tensor::calibrate(a, start("calibrate", flag_map(g, a)?))?, true),
        Command::Quantize(a) => (commands::tensor::quantize(a, start("quantize", flag_map(g, a)?))?, true),
        Command::Inspect(a) => (commands::tensor::inspect(a, start("inspect", flag_map(g, a)?))?, true),
        Command::Verify(a) => commands::verify::verify(a, start("verify", flag_map(g, a)?))?,
        Command::Analyze(a) => (commands::analyze::analyze(a, start("analyze", flag_map(g, a)?))?, true),
        Command::Simulate(a) => (commands::simulate::simulate(a, start("simulate", flag_map(g, a)?))?, true),
        Command::Train(a) => (commands::train::train(a, start("train", flag_map(g, a)?))?, true),
        Command::Report(a) => (commands::report::report(a, start("report", flag_map(g, a)?))?, true),
    };
    run.finish()?;
    Ok(ok)
}

fn main() -> ExitCode {
    let argv = match config::expand(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(argv);
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
