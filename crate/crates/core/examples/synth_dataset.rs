//! Generates a small phantom dataset and prints per-class lesion statistics.
//!
//! cargo run --example synth_dataset -- [out_dir]

use lungnet::synth::{generate_dataset, load_dataset, Label, Split};

fn main() -> lungnet::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/example_data".into());
    let manifest = generate_dataset(10, 42, 64, &out)?;
    println!("{} samples written to {out}", manifest.rows.len());
    let samples = load_dataset(&manifest, Split::Train)?;
    for label in Label::ALL {
        let of_class: Vec<_> = samples.iter().filter(|s| s.label == label).collect();
        let mean = |f: &dyn Fn(&lungnet::synth::Sample) -> usize| {
            of_class.iter().map(|s| f(s) as f64).sum::<f64>() / of_class.len() as f64
        };
        println!(
            "{label:<10} n={:<3} lung px {:>7.1}  infection px {:>6.1}",
            of_class.len(),
            mean(&|s| s.lung_mask.count()),
            mean(&|s| s.inf_mask.count())
        );
    }
    Ok(())
}
