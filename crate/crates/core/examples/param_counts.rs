//! Parameter counts of the three skip topologies at desk and paper scale.
//!
//! cargo run --example param_counts

use lungnet::net::{count_parameters, ArchConfig, SkipMode};

fn main() -> lungnet::Result<()> {
    for (name, base) in [
        ("desk", ArchConfig::desk()),
        ("paper scale", ArchConfig::paper_scale()),
    ] {
        println!(
            "{name} (w={}, hw={}, L={}):",
            base.base_width, base.input_hw, base.levels
        );
        for mode in SkipMode::ALL {
            let with = count_parameters(&base.clone().with_skip_mode(mode))?;
            let without =
                count_parameters(&base.clone().with_skip_mode(mode).with_classifier(false))?;
            println!("  {mode:<12} {with:>11} with classifier  {without:>11} segmentation only");
        }
    }
    Ok(())
}
