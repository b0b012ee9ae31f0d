//! Desk-scale workflow: synthesize data, pretrain an encoder on
//! classification, train both networks from it and score the test split.
//!
//! cargo run --release --example train_pipeline -- [epochs]

use std::path::Path;

use lungnet::net::ArchConfig;
use lungnet::pipeline::{
    evaluate, pretrain_encoder, train_pipeline, NetKind, NetPlan, TrainOptions,
};
use lungnet::synth::{generate_dataset, load_dataset, Split};
use lungnet::training::{load_weights, TrainConfig};

fn main() -> lungnet::Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let epochs = std::env::args()
        .nth(1)
        .map_or(Ok(30), |s| s.parse())
        .expect("epochs must be an integer");
    let root = Path::new("target/example_pipeline");
    let manifest = generate_dataset(100, 42, 64, root.join("data"))?;
    let arch = ArchConfig::desk();
    let opts = TrainOptions::default();
    let cfg = TrainConfig {
        epochs,
        ..TrainConfig::default()
    };
    let pre_cfg = TrainConfig {
        learning_rate: 3e-4,
        ..cfg.clone()
    };
    let encoder = pretrain_encoder(&arch, &manifest, &pre_cfg, &opts, &root.join("pretrain"))?;
    let init = load_weights(&encoder.weights_path)?;
    let pipeline = NetPlan {
        arch: arch.clone(),
        train: cfg.clone(),
    };
    let infection = NetPlan {
        arch: arch.clone(),
        train: TrainConfig {
            learning_rate: 3e-3,
            ..cfg.clone()
        },
    };
    let run = train_pipeline(
        &pipeline,
        &infection,
        &manifest,
        &opts,
        Some(&init),
        &root.join("nets"),
    )?;

    let test = load_dataset(&manifest, Split::Test)?;
    let lung = evaluate(&run.pipeline.graph, NetKind::Pipeline, &test, &opts, 1.0)?;
    let inf = evaluate(&run.infection.graph, NetKind::Infection, &test, &opts, 1.0)?;
    println!("test lung dice      {:.4}", lung.pixels.dice());
    println!("test accuracy       {:.4}", lung.accuracy());
    println!("test infection dice {:.4}", inf.pixels.dice());
    if let Some(cm) = &lung.confusion {
        let r = cm.report();
        println!(
            "macro sensitivity {:.4}, macro precision {:.4}",
            r.macro_sensitivity, r.macro_precision
        );
    }
    println!(
        "curves: {}, {}",
        run.pipeline.curves_path.display(),
        run.infection.curves_path.display()
    );
    Ok(())
}
