use szt_core::grad::SteKind;
use szt_core::train::{self, DeltaRefresh, SynthTask, TrainConfig};

use crate::args::{RefreshArg, SteArg, TaskArg, TrainArgs};
use crate::error::CliError;
use crate::output::{self, Run};

pub fn train(args: &TrainArgs, mut run: Run) -> Result<Run, CliError> {
    let ste = match args.ste {
        SteArg::Bt => SteKind::Bt,
        SteArg::Szt => SteKind::Szt,
        SteArg::Sr => SteKind::Sr,
    };
    let task = match args.task {
        TaskArg::Regression => SynthTask::Regression { inputs: args.inputs, outputs: args.outputs, noise: args.noise },
        TaskArg::Parity => SynthTask::Parity { bits: args.bits },
    };
    let config = TrainConfig {
        ste,
        epochs: args.epochs,
        batch: args.batch,
        lr_schedule: args.lr.clone(),
        beta: args.beta,
        seed: run.seed,
        delta_refresh: match args.delta_refresh {
            RefreshArg::Never => DeltaRefresh::Never,
            RefreshArg::PerEpoch => DeltaRefresh::PerEpoch,
        },
        hidden: args.hidden,
        sr_stream: args.sr_stream,
        record_codes: false,
    };
    let data = train::synth_dataset(&task, args.size, run.seed)?;
    let (net, report) = train::train_with_net(&config, &data)?;

    let report_path = args.out.clone().unwrap_or_else(|| run.path("report.json"));
    output::write_json(&report_path, &report)?;
    run.output(&report_path);
    for layer in 0..2 {
        let packed = net.pack_layer(layer, &net.encode_layer(layer, ste))?;
        let path = run.path(&format!("layer{}.szt", layer + 1));
        output::write_bytes(&path, &packed.to_bytes()?)?;
        run.output(&path);
    }
    let latent = run.path("latent.json");
    output::write_json(&latent, &net)?;
    run.output(&latent);

    println!(
        "ste={} steps={} final_loss={} numeric={} representational={} digest={}",
        ste.name(),
        report.steps,
        report.loss_curve.last().copied().unwrap_or(f64::NAN),
        report.numeric_transitions,
        report.representational_transitions,
        report.checkpoint_digest
    );
    Ok(run)
}
