//! Train and evaluate the basic model on a synthetic dataset.
//!
//! cargo run --release -p anticipation --example synthetic_run -- [seed] [hidden] [epochs] [lr] [batch] [layers] [amplitude] [instances]

use std::time::Instant;

use anticipation::config::RunConfig;
use anticipation::data::{synth_generate, SynthConfig};
use anticipation::eval::{evaluate, EvalConfig};
use anticipation::sampling::LabeledSequence;
use anticipation::train::{train, TrainConfig};

fn main() -> anticipation::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let mut synth = SynthConfig::default();
    synth.amplitude = arg(6, "1.0").parse().unwrap();
    synth.instances_per_sequence = arg(7, "3").parse().unwrap();
    let data = synth_generate(&synth, arg(0, "1").parse().unwrap())?;
    let mut run = RunConfig::default();
    run.alpha = 0.0;
    run.beta = 0.0;
    run.seed = Some(arg(0, "1").parse().unwrap());
    run.hidden = arg(1, "100").parse().unwrap();
    run.epochs = arg(2, "30").parse().unwrap();
    run.adam.lr = arg(3, "0.001").parse().unwrap();
    run.batch_size = arg(4, "1").parse().unwrap();
    run.layers = arg(5, "3").parse().unwrap();
    let cfg = TrainConfig::from_run(&run, synth.layout())?;
    let seqs: Vec<LabeledSequence> = data
        .train
        .iter()
        .cloned()
        .enumerate()
        .map(|(i, s)| LabeledSequence::new(i, s, synth.classes))
        .collect::<anticipation::Result<_>>()?;
    let start = Instant::now();
    let outcome = train(&cfg, &seqs, synth.classes, None, &mut |e| {
        println!("{} ({:.1}s)", e.csv_row(), start.elapsed().as_secs_f64());
    })?;
    let eval_cfg = EvalConfig {
        normalize: cfg.normalize,
        ..EvalConfig::default()
    };
    let (report, _) = evaluate(&outcome.params, &data.test, synth.classes, &eval_cfg)?;
    print!("{}", report.to_csv());
    println!("total {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
