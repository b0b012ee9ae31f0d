//! Builds an infection report for one phantom. With trained desk-scale weights
//! the networks make the prediction; without, the ground truth stands in for it.
//!
//! cargo run --release --example infer_report -- [pipeline.ilnw infection.ilnw]

use std::path::Path;

use lungnet::net::ArchConfig;
use lungnet::pipeline::{
    generate_report, report_from_prediction, GroundTruth, Prediction, Predictor, DEFAULT_TAU,
};
use lungnet::synth::{generate_phantom, Label};
use lungnet::Rng;

fn main() -> lungnet::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let s = generate_phantom(&mut Rng::new(11), Label::PneumoniaLike, 64)?;
    let truth = GroundTruth {
        lung: s.lung_mask.clone(),
        infection: s.inf_mask.clone(),
    };
    let overlay = Path::new("target/report_overlay.ppm");
    let report = match args.as_slice() {
        [pipeline, infection] => {
            let predictor = Predictor::load(
                &ArchConfig::desk(),
                Path::new(pipeline),
                Path::new(infection),
                DEFAULT_TAU,
            )?;
            generate_report(&predictor, &s.image, Some(&truth), overlay)?
        }
        _ => {
            let pred = Prediction::from_ground_truth(&truth, s.label);
            report_from_prediction(&s.image, &pred, Some(&truth), overlay)?
        }
    };
    println!("{}", report.to_json()?);
    Ok(())
}
