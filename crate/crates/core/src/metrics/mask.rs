use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Row-major `{0, 1}` pixel grid.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMask {
    width: usize,
    height: usize,
    bits: Vec<u8>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            bits: vec![0; width * height],
        }
    }

    pub fn from_bits(width: usize, height: usize, bits: Vec<u8>) -> Result<Self> {
        if bits.len() != width * height {
            return Err(Error::shape(
                "mask",
                format!(
                    "{width}x{height} mask needs {} pixels, got {}",
                    width * height,
                    bits.len()
                ),
            ));
        }
        if let Some(pos) = bits.iter().position(|&b| b > 1) {
            return Err(Error::InvalidArgument(format!(
                "mask pixel {pos} has value {}; only 0 and 1 are allowed",
                bits[pos]
            )));
        }
        Ok(Self {
            width,
            height,
            bits,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut bits = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                bits.push(f(x, y) as u8);
            }
        }
        Self {
            width,
            height,
            bits,
        }
    }

    /// Pixels strictly above `threshold` become foreground.
    pub fn from_threshold(
        width: usize,
        height: usize,
        values: &[f64],
        threshold: f64,
    ) -> Result<Self> {
        if values.len() != width * height {
            return Err(Error::shape(
                "mask",
                format!("{width}x{height} mask from {} values", values.len()),
            ));
        }
        Ok(Self {
            width,
            height,
            bits: values.iter().map(|&v| (v > threshold) as u8).collect(),
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits[y * self.width + x] != 0
    }

    /// Like [`BinaryMask::get`] but `false` outside the grid.
    pub fn get_signed(&self, x: isize, y: isize) -> bool {
        x >= 0
            && y >= 0
            && (x as usize) < self.width
            && (y as usize) < self.height
            && self.get(x as usize, y as usize)
    }

    pub fn set(&mut self, x: usize, y: usize, on: bool) {
        self.bits[y * self.width + x] = on as u8;
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b != 0).count()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.iter().all(|&b| b == 0)
    }

    pub fn same_dims(&self, other: &BinaryMask) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn is_subset_of(&self, other: &BinaryMask) -> bool {
        self.same_dims(other) && self.bits.iter().zip(&other.bits).all(|(&a, &b)| a <= b)
    }

    pub fn and(&self, other: &BinaryMask) -> BinaryMask {
        BinaryMask {
            width: self.width,
            height: self.height,
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a & b)
                .collect(),
        }
    }

    /// `(1, 1, H, W)` tensor of 0.0 / 1.0.
    pub fn to_tensor(&self) -> Tensor {
        Tensor::from_vec(
            &[1, 1, self.height, self.width],
            self.bits.iter().map(|&b| b as f64).collect(),
        )
        .expect("dimensions match by construction")
    }

    /// Each pixel replicated into a `factor x factor` block.
    pub fn upscale(&self, factor: usize) -> BinaryMask {
        BinaryMask::from_fn(self.width * factor, self.height * factor, |x, y| {
            self.get(x / factor, y / factor)
        })
    }
}
