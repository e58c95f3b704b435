use std::fs;

use serde_json::json;
use szt_core::dense::read_dense;
use szt_core::quantizer::{self, LayerQuantConfig, ScaleRule, ThresholdRule, ZeroTiebreak};
use szt_core::{Granularity, PackedTernaryTensor, Prior, TernaryCode};

use crate::args::{CalibrateArgs, GranularityArg, InspectArgs, PriorArg, QuantOptions, QuantizeArgs, RuleArg, ScaleArg};
use crate::error::CliError;
use crate::output::{self, Run};

fn fitted_prior(family: PriorArg, scale: Option<f64>, weights: &[f64]) -> Result<Prior, CliError> {
    let n = weights.len() as f64;
    let mean_abs = weights.iter().map(|w| w.abs()).sum::<f64>() / n;
    let rms = (weights.iter().map(|w| w * w).sum::<f64>() / n).sqrt();
    let prior = match family {
        PriorArg::Laplace => Prior::laplace(scale.unwrap_or(mean_abs))?,
        PriorArg::Gaussian => Prior::gaussian(scale.map_or_else(|| quantizer::sample_std(weights), Ok)?)?,
        PriorArg::HalfLaplace => Prior::half_laplace(scale.unwrap_or(mean_abs))?,
        PriorArg::HalfGaussian => Prior::half_gaussian(scale.unwrap_or(rms))?,
    };
    Ok(prior)
}

fn layer_config(q: &QuantOptions, scale: ScaleRule, weights: &[f64]) -> Result<LayerQuantConfig, CliError> {
    let threshold_rule = match q.rule {
        RuleArg::Sigma => ThresholdRule::SigmaRule,
        RuleArg::FixedK => ThresholdRule::FixedK(q.k),
        RuleArg::PriorOptimal => ThresholdRule::PriorOptimal(fitted_prior(q.prior, q.prior_scale, weights)?),
    };
    let granularity = match q.granularity {
        GranularityArg::PerLayer => Granularity::PerLayer,
        GranularityArg::PerChannel => Granularity::PerChannel(q.axis),
    };
    Ok(LayerQuantConfig { granularity, threshold_rule, scale_rule: scale, zero_tiebreak: ZeroTiebreak::ToZeroPlus })
}

pub fn calibrate(args: &CalibrateArgs, mut run: Run) -> Result<Run, CliError> {
    let (dims, weights) = read_dense(&args.quant.input)?;
    run.input(&args.quant.input)?;
    let config = layer_config(&args.quant, ScaleRule::EqualThreshold, &weights)?;
    let (_, reports) = quantizer::quantize_tensor_with_report(&weights, &dims, &config)?;
    let out = args.out.clone().unwrap_or_else(|| run.path("calibration.json"));
    match config.granularity {
        Granularity::PerLayer => output::write_json(&out, &reports[0])?,
        Granularity::PerChannel(_) => output::write_json(&out, &reports)?,
    }
    for r in &reports {
        println!("delta={} k={} forward_mse={} rule={}", output::fmt17(r.delta), output::fmt17(r.k), output::fmt17(r.forward_mse), r.rule);
    }
    run.output(&out);
    Ok(run)
}

pub fn quantize(args: &QuantizeArgs, mut run: Run) -> Result<Run, CliError> {
    let (dims, weights) = read_dense(&args.quant.input)?;
    run.input(&args.quant.input)?;
    let scale = match args.scale {
        ScaleArg::Unit => ScaleRule::Unit,
        ScaleArg::Threshold => ScaleRule::EqualThreshold,
    };
    let config = layer_config(&args.quant, scale, &weights)?;
    let tensor = quantizer::quantize_tensor(&weights, &dims, &config)?;
    let out = args.out.clone().unwrap_or_else(|| {
        let stem = args.quant.input.file_stem().map_or("weights".into(), |s| s.to_string_lossy().into_owned());
        run.path(&format!("{stem}.szt"))
    });
    output::write_bytes(&out, &tensor.to_bytes()?)?;
    println!("wrote {} ({} codes, {} payload bytes)", out.display(), tensor.numel(), tensor.payload().len());
    run.output(&out);
    Ok(run)
}

fn code_name(c: TernaryCode) -> &'static str {
    match c {
        TernaryCode::ZeroPlus => "0+",
        TernaryCode::PlusOne => "+1",
        TernaryCode::ZeroMinus => "0-",
        TernaryCode::MinusOne => "-1",
    }
}

pub fn inspect(args: &InspectArgs, mut run: Run) -> Result<Run, CliError> {
    let bytes = fs::read(&args.input).map_err(|e| CliError::io(&args.input, e))?;
    run.input(&args.input)?;
    let t = PackedTernaryTensor::from_bytes(&bytes)?;
    let h = t.histogram();
    let granularity = match t.granularity() {
        Granularity::PerLayer => json!("per-layer"),
        Granularity::PerChannel(axis) => json!({ "per-channel": axis }),
    };
    let mut report = json!({
        "dims": t.dims(),
        "numel": t.numel(),
        "granularity": granularity,
        "thresholds": t.thresholds(),
        "scales": t.scales(),
        "histogram": { "0+": h[0], "+1": h[1], "0-": h[2], "-1": h[3] },
        "payload_bytes": t.payload().len(),
        "file_sha256": output::sha256_file(&args.input)?,
    });
    if args.codes {
        report["codes"] = json!(t.codes().into_iter().map(code_name).collect::<Vec<_>>());
    }
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(run)
}
