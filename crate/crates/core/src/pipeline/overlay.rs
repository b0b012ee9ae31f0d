//! Contour overlays on the input image.

use std::path::Path;

use super::contour::Contour;
use crate::error::{Error, Result};
use crate::image::{GrayImage, RgbImage};
use crate::synth::write_ppm;

pub const LUNG_COLOR: [u8; 3] = [0, 255, 0];
pub const INFECTION_COLOR: [u8; 3] = [255, 0, 0];

/// Gray image replicated to RGB with lung contours in green and infection
/// contours in red on top.
pub fn overlay_image(
    image: &GrayImage,
    lung: &[Contour],
    infection: &[Contour],
) -> Result<RgbImage> {
    let mut rgb = RgbImage::from_gray(image);
    for (contours, color) in [(lung, LUNG_COLOR), (infection, INFECTION_COLOR)] {
        for c in contours {
            for &(x, y) in &c.points {
                if x >= image.width || y >= image.height {
                    return Err(Error::InvalidArgument(format!(
                        "contour point ({x}, {y}) outside {}x{} image",
                        image.width, image.height
                    )));
                }
                rgb.set(x, y, color);
            }
        }
    }
    Ok(rgb)
}

/// Renders [`overlay_image`] and writes it as a binary PPM.
pub fn render_overlay(
    image: &GrayImage,
    lung: &[Contour],
    infection: &[Contour],
    out_path: impl AsRef<Path>,
) -> Result<()> {
    write_ppm(out_path, &overlay_image(image, lung, infection)?)
}
