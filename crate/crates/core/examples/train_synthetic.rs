//! Train the denoiser on a synthetic corpus and save weights with their sidecar.
//!
//! cargo run --release --example train_synthetic -- [n] [epochs] [out.bin]

use layoutforge::dataio::synth_corpus;
use layoutforge::denoiser::{save_weights, train, WeightsSidecar};
use layoutforge::diffusion::ScheduleConfig;
use layoutforge::TrainConfig;

fn main() -> layoutforge::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map_or(600, |s| s.parse().expect("n"));
    let epochs: usize = args.next().map_or(5, |s| s.parse().expect("epochs"));
    let out = args
        .next()
        .unwrap_or_else(|| std::env::temp_dir().join("layoutforge-weights.bin").display().to_string());

    let corpus = synth_corpus(n, 0)?.split(0.9, 0)?;
    let schedule = ScheduleConfig::default();
    let cfg = TrainConfig { epochs, ..TrainConfig::default() };
    let data = corpus.examples(&corpus.train)?;
    println!("training on {} layouts, validating on {}", corpus.train.len(), corpus.validation.len());

    let outcome = train(&data, &cfg, &schedule.build()?, &mut |epoch, loss| {
        println!("epoch {epoch:>3}  loss {loss:.4}");
    })?;
    save_weights(&out, &outcome.params)?;
    WeightsSidecar::new(outcome.params.architecture(), schedule, cfg, outcome.epoch_losses)
        .save(WeightsSidecar::path_for(&out))?;
    println!("wrote {out}");
    Ok(())
}
