use szt_core::analysis::{self, MfptKind, StepDist};
use szt_core::sim::{self, OuParams};
use szt_core::Prior;

use crate::args::{SimMode, SimulateArgs};
use crate::error::CliError;
use crate::output::{self, fmt17, Run};

const HEADER: [&str; 5] = ["quantity", "estimate", "ci95", "oracle", "closed_form"];

fn row(quantity: &str, estimate: f64, ci: f64, oracle: f64, formula: f64) -> Vec<String> {
    vec![quantity.into(), fmt17(estimate), fmt17(ci), fmt17(oracle), fmt17(formula)]
}

pub fn simulate(args: &SimulateArgs, mut run: Run) -> Result<Run, CliError> {
    let rows = match args.mode {
        SimMode::Ou => {
            let delta = args.delta.unwrap_or(1.0);
            let dt = args.dt.unwrap_or(1e-4 * delta * delta / (args.sigma * args.sigma));
            let p = OuParams { kappa: args.kappa, sigma: args.sigma, delta, dt, trials: args.trials, seed: run.seed };
            let mc = sim::ou_mfpt_mc(&p)?;
            let bvp = sim::ou_mfpt_bvp(args.kappa, args.sigma, delta)?;
            let bt = analysis::mfpt_closed(MfptKind::Bt, args.kappa, args.sigma, delta)?;
            let szt = analysis::mfpt_closed(MfptKind::Szt, args.kappa, args.sigma, delta)?;
            vec![
                row("mean_exit_time_vs_bt_form", mc.mean, mc.ci95_halfwidth, bvp, bt),
                row("mean_exit_time_vs_szt_form", mc.mean, mc.ci95_halfwidth, bvp, szt),
            ]
        }
        SimMode::Renewal => {
            let prior = Prior::laplace(args.b)?;
            let delta = args.delta.unwrap_or(std::f64::consts::SQRT_2 * args.b);
            let step = StepDist::Deterministic { s0: args.step };
            let r = sim::renewal_mc(&step, &prior, delta, args.trials, run.seed)?;
            let fq = analysis::phi_f_quadrature(&prior, delta, args.step)?;
            let rq = analysis::phi_r_quadrature(&prior, delta, args.step)?;
            let f = analysis::phi_f(&prior, delta, args.step)?;
            let rr = analysis::phi_r(&prior, delta, args.step)?;
            vec![
                row("mean_t_f", r.mean_t_f, 1.96 * r.se_t_f, 1.0 / fq, 1.0 / f),
                row("mean_t_r", r.mean_t_r, 1.96 * r.se_t_r, 1.0 / rq, 1.0 / rr),
                row("wait_ratio", r.ratio, 1.96 * r.ratio_se, rq / fq, analysis::expected_ratio(&step, args.b, delta)?),
            ]
        }
    };
    let name = match args.mode {
        SimMode::Ou => "simulate_ou.csv",
        SimMode::Renewal => "simulate_renewal.csv",
    };
    let path = run.path(name);
    output::write_csv(&path, &HEADER, &rows)?;
    for r in &rows {
        println!("{}", r.join(","));
    }
    run.output(&path);
    Ok(run)
}
