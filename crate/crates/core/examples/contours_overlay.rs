//! Traces lung and lesion boundaries of one phantom and writes the overlay.
//!
//! cargo run --example contours_overlay -- [out.ppm]

use lungnet::pipeline::{extract_contours, render_overlay, severity};
use lungnet::synth::{generate_phantom, Label};
use lungnet::Rng;

fn main() -> lungnet::Result<()> {
    let out = std::env::args()
        .nth(1)
        .unwrap_or_else(|| "target/overlay.ppm".into());
    let s = generate_phantom(&mut Rng::new(3), Label::CovidLike, 128)?;
    let lungs = extract_contours(&s.lung_mask);
    let lesions = extract_contours(&s.inf_mask);
    for (i, c) in lungs.iter().enumerate() {
        println!("lung contour {i}: {} boundary pixels", c.pixels().len());
    }
    println!("{} lesion contours", lesions.len());
    println!("severity {:.2}%", severity(&s.inf_mask, &s.lung_mask)?);
    render_overlay(&s.image, &lungs, &lesions, &out)?;
    println!("overlay written to {out}");
    Ok(())
}
