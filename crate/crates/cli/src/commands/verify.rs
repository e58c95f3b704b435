use szt_core::verify::{self, Status, Suite, VerifyOptions};

use crate::args::VerifyArgs;
use crate::error::CliError;
use crate::output::{self, fmt17, Run};

pub const HEADER: [&str; 8] = ["suite", "claim", "check", "value", "reference", "tolerance", "status", "note"];

/// Returns the run and whether every asserted check passed.
pub fn verify(args: &VerifyArgs, mut run: Run) -> Result<(Run, bool), CliError> {
    let suites = Suite::parse_list(&args.suite)?;
    let defaults = VerifyOptions::default();
    let opts = VerifyOptions {
        seed: run.seed,
        mc_samples: args.mc_samples.unwrap_or(defaults.mc_samples),
        mfpt_trials: args.trials.unwrap_or(defaults.mfpt_trials),
        renewal_trials: args.renewal_trials.unwrap_or(defaults.renewal_trials),
        noise_trials: args.noise_trials.unwrap_or(defaults.noise_trials),
    };
    let rows = verify::run_suites(&suites, &opts)?;
    let table: Vec<Vec<String>> = rows
        .iter()
        .map(|r| {
            vec![
                r.suite.clone(),
                r.claim.clone(),
                r.check.clone(),
                fmt17(r.value),
                fmt17(r.reference),
                fmt17(r.tolerance),
                r.status.to_string(),
                r.note.clone(),
            ]
        })
        .collect();
    let csv_path = run.path("verify.csv");
    output::write_csv(&csv_path, &HEADER, &table)?;
    run.output(&csv_path);
    let json_path = run.path("verify.json");
    output::write_json(&json_path, &rows)?;
    run.output(&json_path);

    let count = |s: Status| rows.iter().filter(|r| r.status == s).count();
    for r in &rows {
        println!("{} {}/{}: {} (value {} vs {})", r.status, r.suite, r.claim, r.check, r.value, r.reference);
    }
    let failed = count(Status::Fail);
    println!("{} passed, {} flagged, {} failed", count(Status::Pass), count(Status::Flag), failed);
    Ok((run, failed == 0))
}
