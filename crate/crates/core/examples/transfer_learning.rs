//! Compares epochs to a validation Dice target with and without an encoder
//! pretrained on classification, on a small 32x32 configuration.
//!
//! cargo run --release --example transfer_learning

use std::path::Path;

use lungnet::net::{ArchConfig, SkipMode};
use lungnet::pipeline::{pretrain_encoder, train_and_save, NetKind, TrainOptions};
use lungnet::synth::generate_dataset;
use lungnet::training::{load_weights, TrainConfig};

fn main() -> lungnet::Result<()> {
    let root = Path::new("target/example_transfer");
    let manifest = generate_dataset(30, 7, 32, root.join("data"))?;
    let arch = ArchConfig {
        levels: 3,
        base_width: 4,
        input_hw: 32,
        skip_mode: SkipMode::Streamlined,
        with_classifier: true,
        num_classes: 3,
        dropout_rate: 0.5,
        classifier_width: 16,
        dense_widths: [32, 16],
    };
    let opts = TrainOptions {
        stop_at_target: true,
        ..TrainOptions::default()
    };
    let cfg = TrainConfig {
        epochs: 40,
        batch_size: 16,
        ..TrainConfig::default()
    };
    let pre_cfg = TrainConfig {
        epochs: 20,
        learning_rate: 3e-4,
        ..cfg.clone()
    };
    let encoder = pretrain_encoder(
        &arch,
        &manifest,
        &pre_cfg,
        &TrainOptions::default(),
        &root.join("pretrain"),
    )?;
    let init = load_weights(&encoder.weights_path)?;
    let with = train_and_save(
        NetKind::Pipeline,
        &arch,
        &manifest,
        &cfg,
        &opts,
        Some(&init),
        &root.join("with"),
    )?;
    let without = train_and_save(
        NetKind::Pipeline,
        &arch,
        &manifest,
        &cfg,
        &opts,
        None,
        &root.join("without"),
    )?;
    let show = |e: Option<usize>| {
        e.map_or(format!("not within {} epochs", cfg.epochs), |e| {
            format!("{e} epochs")
        })
    };
    println!("val lung dice >= {}:", opts.dice_target);
    println!("  with transfer    {}", show(with.history.epochs_to_target));
    println!(
        "  from scratch     {}",
        show(without.history.epochs_to_target)
    );
    Ok(())
}
