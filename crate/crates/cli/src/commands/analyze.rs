use szt_core::analysis::{self, MfptKind};
use szt_core::grad;
use szt_core::quantizer;
use szt_core::sim;
use szt_core::Prior;

use crate::args::{AnalyzeArgs, Quantity};
use crate::error::CliError;
use crate::output::{self, fmt17, Run};

const HEADER: [&str; 6] = ["quantity", "inputs", "closed_form", "oracle", "abs_error", "rel_error"];

struct Table {
    name: &'static str,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(name: &'static str) -> Self {
        Self { name, rows: Vec::new() }
    }

    fn row(&mut self, quantity: &str, inputs: String, closed: f64, oracle: f64) {
        let abs = (closed - oracle).abs();
        let rel = if oracle == 0.0 { abs } else { abs / oracle.abs() };
        self.rows.push(vec![quantity.into(), inputs, fmt17(closed), fmt17(oracle), fmt17(abs), fmt17(rel)]);
    }
}

fn sensitivity(b: f64, delta: f64) -> Result<Table, CliError> {
    let prior = Prior::laplace(b)?;
    let mut t = Table::new("sensitivity");
    for frac in [0.005, 0.02, 0.05, 0.1, 0.25, 0.5] {
        let s = frac * delta;
        let inputs = format!("b={b};delta={delta};s={s}");
        let (f, r) = (analysis::phi_f(&prior, delta, s)?, analysis::phi_r(&prior, delta, s)?);
        let (fq, rq) = (analysis::phi_f_quadrature(&prior, delta, s)?, analysis::phi_r_quadrature(&prior, delta, s)?);
        t.row("phi_f", inputs.clone(), f, fq);
        t.row("phi_r", inputs.clone(), r, rq);
        t.row("ratio", inputs, r / f, rq / fq);
    }
    Ok(t)
}

fn entropy() -> Result<Table, CliError> {
    let mut t = Table::new("entropy");
    for i in 0..=10 {
        let p0 = f64::from(i) / 10.0;
        t.row("entropy_gap", format!("p0={p0}"), analysis::entropy_szt(p0)? - analysis::entropy_bt(p0)?, p0);
    }
    Ok(t)
}

fn priors() -> Result<[Prior; 2], CliError> {
    Ok([Prior::laplace(1.0)?, Prior::gaussian(1.0)?])
}

fn mse() -> Result<Table, CliError> {
    let mut t = Table::new("mse");
    for p in priors()? {
        for i in 1..=8 {
            let k = 0.25 * f64::from(i);
            let delta = k * p.sigma();
            let inputs = format!("prior={};k={k}", p.name());
            t.row("forward_mse", inputs, quantizer::mse_forward(&p, delta)?, quantizer::mse_forward_quadrature(&p, delta)?);
        }
    }
    Ok(t)
}

fn dead_zone() -> Result<Table, CliError> {
    let mut t = Table::new("dead_zone");
    for p in priors()? {
        for i in 1..=8 {
            let k = 0.25 * f64::from(i);
            let inputs = format!("prior={};k={k}", p.name());
            t.row("avg_dead_zone_mse", inputs, grad::avg_dead_zone_mse(&p, k)?, grad::avg_dead_zone_mse_quadrature(&p, k)?);
        }
    }
    Ok(t)
}

fn kl() -> Result<Table, CliError> {
    let mut t = Table::new("kl");
    for (q, p) in [
        ([0.25, 0.5, 0.25], [0.25, 0.5, 0.25]),
        ([0.1, 0.3, 0.6], [0.3, 0.4, 0.3]),
        ([0.45, 0.1, 0.45], [0.2, 0.6, 0.2]),
    ] {
        let r = analysis::kl_split_check(q, p)?;
        t.row("kl_difference", format!("q={q:?};p={p:?}"), r.difference, r.expected);
    }
    Ok(t)
}

fn mfpt() -> Result<Table, CliError> {
    let mut t = Table::new("mfpt");
    for lambda in [0.25, 0.5, 1.0, 1.5, 2.0] {
        let bvp = sim::ou_mfpt_bvp(1.0, 1.0, lambda)?;
        let inputs = format!("kappa=1;sigma=1;delta={lambda}");
        t.row("mfpt_bt_closed_form", inputs.clone(), analysis::mfpt_closed(MfptKind::Bt, 1.0, 1.0, lambda)?, bvp);
        t.row("mfpt_szt_closed_form", inputs, analysis::mfpt_closed(MfptKind::Szt, 1.0, 1.0, lambda)?, bvp);
    }
    Ok(t)
}

pub fn analyze(args: &AnalyzeArgs, mut run: Run) -> Result<Run, CliError> {
    let delta = args.delta.unwrap_or(std::f64::consts::SQRT_2 * args.b);
    let wanted = |q: Quantity| args.quantity == q || args.quantity == Quantity::All;
    let mut tables = Vec::new();
    if wanted(Quantity::Sensitivity) {
        tables.push(sensitivity(args.b, delta)?);
    }
    if wanted(Quantity::Entropy) {
        tables.push(entropy()?);
    }
    if wanted(Quantity::Mse) {
        tables.push(mse()?);
    }
    if wanted(Quantity::DeadZone) {
        tables.push(dead_zone()?);
    }
    if wanted(Quantity::Kl) {
        tables.push(kl()?);
    }
    if wanted(Quantity::Mfpt) {
        tables.push(mfpt()?);
    }
    for t in tables {
        let path = run.path(&format!("analyze_{}.csv", t.name));
        output::write_csv(&path, &HEADER, &t.rows)?;
        println!("wrote {} ({} rows)", path.display(), t.rows.len());
        run.output(&path);
    }
    Ok(run)
}
