//! Generate a layout from a keyword prompt and a sketch, then rasterize it.
//!
//! cargo run --release --example generate_layout -- [weights.bin] [prompt]
//!
//! Without a weights file a small model is trained first.

use layoutforge::condition::{Condition, SKETCH_SIDE};
use layoutforge::dataio::synth_corpus;
use layoutforge::denoiser::{train, LoadedModel};
use layoutforge::diffusion::{sample, ScheduleConfig};
use layoutforge::raster::rasterize;
use layoutforge::rules::{RuleConfig, RuleReport};
use layoutforge::{DenoiserParams, SamplerConfig, TrainConfig};

fn model(path: Option<String>) -> layoutforge::Result<(DenoiserParams, ScheduleConfig)> {
    if let Some(path) = path {
        let loaded = LoadedModel::load(path, &ScheduleConfig::default())?;
        return Ok((loaded.params, loaded.schedule));
    }
    let corpus = synth_corpus(400, 1)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let cfg = TrainConfig { epochs: 4, ..TrainConfig::default() };
    let schedule = ScheduleConfig::default();
    let out = train(&corpus.examples(&all)?, &cfg, &schedule.build()?, &mut |_, _| {})?;
    Ok((out.params, schedule))
}

fn main() -> layoutforge::Result<()> {
    let mut args = std::env::args().skip(1);
    let weights = args.next().filter(|a| a != "-");
    let prompt = args.next().unwrap_or_else(|| "login form dark".into());
    let (params, schedule) = model(weights)?;

    // A header band across the top row and a block in the middle of the sketch.
    let mut sketch = vec![0.0; SKETCH_SIDE * SKETCH_SIDE];
    sketch[..SKETCH_SIDE].fill(1.0);
    for row in 3..5 {
        sketch[row * SKETCH_SIDE + 2..row * SKETCH_SIDE + 6].fill(0.8);
    }
    let condition = Condition::encode(&prompt, Some(&sketch))?;
    println!("keywords: {:?}", condition.words());

    let cfg = SamplerConfig::new(42).with_condition(condition);
    let layout = sample(&cfg, &params, &schedule.build()?)?;
    println!("{}", layout.to_json_pretty());
    println!("{:?}", RuleReport::of(&layout, &RuleConfig::default()));

    let png = std::env::temp_dir().join("layoutforge-sample.png");
    rasterize(&layout).save_png(&png)?;
    println!("raster written to {}", png.display());
    Ok(())
}
