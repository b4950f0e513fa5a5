//! Run the HTTP service on a freshly trained small model.
//!
//! cargo run --release --example serve -- [port] [static-dir]
//!
//!   curl localhost:8080/health
//!   curl -X POST localhost:8080/api/generate -d '{"prompt": "login dark", "seed": 42}'

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use layoutforge::config::AppConfig;
use layoutforge::dataio::synth_corpus;
use layoutforge::denoiser::{train, LoadedModel};
use layoutforge::server::{serve, AppState};

#[tokio::main]
async fn main() -> layoutforge::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let port: u16 = std::env::args().nth(1).map_or(8080, |p| p.parse().expect("port"));
    let static_dir = std::env::args().nth(2).map(PathBuf::from);

    let mut cfg = AppConfig::default();
    cfg.train.epochs = 3;
    let corpus = synth_corpus(300, 0)?;
    let all: Vec<usize> = (0..corpus.len()).collect();
    let params = train(&corpus.examples(&all)?, &cfg.train, &cfg.schedule.build()?, &mut |_, _| {})?.params;
    let model = LoadedModel {
        params,
        schedule: cfg.schedule,
        sidecar: None,
        version: "demo".into(),
    };
    let state = Arc::new(AppState::new(model, &cfg)?);
    serve(SocketAddr::from(([127, 0, 0, 1], port)), state, static_dir.as_deref()).await
}
