//! The four-row ablation: full model against no conditioning, no design optimization
//! and no feedback, over a few seeds.
//!
//! cargo run --release --example ablation -- [runs] [epochs] [n]

use layoutforge::dataio::synth_corpus;
use layoutforge::metrics::{ablation_suite, AblationConfig, DirectionSummary, EvalConfig};
use layoutforge::TrainConfig;

fn main() -> layoutforge::Result<()> {
    let mut args = std::env::args().skip(1).map(|a| a.parse::<usize>().expect("number"));
    let runs = args.next().unwrap_or(2);
    let epochs = args.next().unwrap_or(4);
    let n = args.next().unwrap_or(600);

    let mut reports = Vec::new();
    for seed in 0..runs as u64 {
        let corpus = synth_corpus(n, seed)?.split(0.9, seed)?;
        let cfg = AblationConfig {
            train: TrainConfig { epochs, seed, ..TrainConfig::default() },
            eval: EvalConfig { seed, ..EvalConfig::default() },
            ..AblationConfig::default()
        };
        let report = ablation_suite(&corpus, &cfg)?;
        println!("seed {seed}");
        print!("{}", report.to_table());
        reports.push(report);
    }
    print!("{}", DirectionSummary::of(&reports).to_text());
    Ok(())
}
